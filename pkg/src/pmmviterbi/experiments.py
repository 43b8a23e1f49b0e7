"""Named, seeded experiment recipes producing CSV tables.

Each recipe is a function ``(seed, steps) -> (header, rows)``. Output is a
deterministic function of the recipe name, seed and step count.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .arith import get_arith
from .canonical import glm_scalar_model, noinf_model, nonodes_model, tiebreak_model, two_state_model
from .dp import LEX, TieRule, _normalise, constrained_path, forward_step, next_rank
from .model import PMM
from .nodes import scan_nodes
from .online import DecoderConfig, OnlineDecoder
from .simulate import simulate

TIEBREAK_WORD = (1, 1, 2, 1, 1, 1, 1)
TIEBREAK_PIN_TIMES = (2, 4)


def first_state_series(model: PMM, obs: Sequence, tie: TieRule = LEX) -> np.ndarray:
    """First coordinate of the offline Viterbi path of ``obs[:n]`` for every n.

    Carries, for each state, the first state of the selected best path into
    it, so one forward pass answers all prefixes. Entries are 1-based and 0
    where the prefix has zero likelihood.
    """
    ar = get_arith(False)
    ny = model.n_states
    lex = tie.lexicographic
    out = np.zeros(len(obs), dtype=np.int64)
    v = np.array(model.initial(model.check_obs(obs[0]), ar), copy=True)
    rank = np.arange(ny, dtype=np.int64)
    first = np.arange(ny, dtype=np.int64)
    for n in range(len(obs)):
        if n:
            K = model.kernel(obs[n - 1], obs[n], ar)
            v, bp = forward_step(ar, v, K, lex, rank)
            first = np.where(bp >= 0, first[np.maximum(bp, 0)], -1)
            if lex:
                rank = next_rank(rank, bp)
        v, top = _normalise(ar, v)
        if top is None:
            break
        tied = [k for k in range(ny) if ar.eq(v[k], 0.0)]
        last = min(tied, key=lambda k: rank[k]) if lex else tied[0]
        out[n] = first[last] + 1
    return out


def walk(obs: Sequence) -> np.ndarray:
    """``S_n = n_1(x_{2:n}) - n_2(x_{2:n})`` for every n (S_1 = 0)."""
    x = np.asarray(obs, dtype=np.int64)
    steps = np.where(x[1:] == 1, 1, -1)
    return np.concatenate([[0], np.cumsum(steps)])


def checkpoints(steps: int, grid: int = 100) -> list[int]:
    """Powers of two from 2^10, an even grid of ``grid`` points, and ``steps``."""
    pts = {2 ** k for k in range(10, 64) if 2 ** k <= steps}
    pts.update(int(round(steps * k / grid)) for k in range(1, grid + 1))
    return sorted(p for p in pts if p >= 1)


def no_stabilize(seed: int, steps: int = 2 ** 17):
    model = noinf_model()
    obs = simulate(model, steps, seed).obs_list()
    firsts = first_state_series(model, obs)
    flips = np.concatenate([[0], np.cumsum(firsts[1:] != firsts[:-1])])
    s = walk(obs)
    rows = [(n, int(firsts[n - 1]), int(flips[n - 1]), int(s[n - 1])) for n in checkpoints(steps)]
    return ("n", "first_state", "flips_so_far", "walk"), rows


def no_nodes(seed: int, steps: int = 10_000):
    model = nonodes_model()
    obs = simulate(model, steps, seed).obs_list()
    counts = {r: [0, 0] for r in range(11)}
    for rep in scan_nodes(model, obs, range(11)):
        counts[rep.order][0] += 1
        counts[rep.order][1] += rep.is_strong()
    return ("order", "nodes", "strong_nodes"), [(r, c[0], c[1]) for r, c in counts.items()]


def tiebreak_pathology(seed: int = 0, steps: int = 0):
    """Pins at the two overlapping barrier positions of the embedded word.

    The word is fixed, so ``seed`` and ``steps`` are ignored.
    """
    model = tiebreak_model()
    a, b = TIEBREAK_PIN_TIMES
    rows = []
    for i in (1, 2):
        for j in (1, 2):
            res = constrained_path(model, list(TIEBREAK_WORD), pins={a: i, b: j}, exact=True)
            rows.append((i, j, res.loglik, int(res.ok)))
    return (f"pin_t{a}", f"pin_t{b}", "loglik", "finite"), rows


def _growth(model: PMM, order: int, seed: int, steps: int):
    obs = simulate(model, steps, seed).obs_list()
    dec = OnlineDecoder(model, DecoderConfig(order=order))
    marks = set(checkpoints(steps))
    rows = []
    for n, x in enumerate(obs, start=1):
        dec.push(x)
        if n in marks:
            d = dec.diagnostics
            rows.append((n, len(dec.committed), d.commits, dec.buffered))
    return ("n", "committed", "commits", "buffered"), rows


def barrier_growth(seed: int, steps: int = 100_000):
    return _growth(two_state_model(), 1, seed, steps)


def glm_growth(seed: int, steps: int = 20_000):
    return _growth(glm_scalar_model(), 1, seed, steps)


@dataclass(frozen=True)
class ExperimentRecipe:
    name: str
    run: Callable
    steps: int
    description: str


RECIPES = {
    r.name: r for r in (
        ExperimentRecipe("no-stabilize", no_stabilize, 2 ** 17,
                         "First Viterbi state of growing prefixes under the noInf model."),
        ExperimentRecipe("no-nodes", no_nodes, 10_000,
                         "Node counts at orders 0..10 under the identity-transition HMM."),
        ExperimentRecipe("tiebreak-pathology", tiebreak_pathology, 0,
                         "Pinned likelihoods at two overlapping barrier positions."),
        ExperimentRecipe("barrier-growth", barrier_growth, 100_000,
                         "Committed prefix length of the online decoder, two-state PMM, r=1."),
        ExperimentRecipe("glm-growth", glm_growth, 20_000,
                         "Committed prefix length of the online decoder, scalar Gaussian switching, r=1."),
    )
}


def run_experiment(name: str, seed: int, steps: int | None = None):
    if name not in RECIPES:
        raise KeyError(f"unknown experiment {name!r}; choose from {', '.join(RECIPES)}")
    recipe = RECIPES[name]
    return recipe.run(seed, recipe.steps if steps is None else steps)


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()
