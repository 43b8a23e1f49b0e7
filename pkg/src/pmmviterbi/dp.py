"""Max-product dynamic programming over hidden paths.

``delta_t(y)`` is the largest joint weight of ``x_{1:t}`` with a hidden path
ending in ``y``; ``segment_max`` gives the matrix of best kernel products over
a segment with both end states pinned. Decoding supports three tie rules:

* ``LEX`` -- among maximisers return the lexicographically smallest path
  ``(y_1, ..., y_n)`` with ``1 < 2 < ...``;
* ``COLEX`` -- the smallest path read backwards from ``y_n``;
* ``TieRule.pinned(...)`` -- force given states at given times, then break
  the remaining ties lexicographically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .arith import EQ_TOL, NEG_INF, Arith, fraction_log, get_arith
from .model import PMM, ModelError, path_log_likelihood, path_weight_exact

#: maximum number of paths the brute-force oracle will enumerate
ORACLE_LIMIT = 10 ** 7


class GuardError(ValueError):
    """A problem instance exceeds a documented size guard."""


@dataclass(frozen=True)
class TieRule:
    kind: str  # "lex" | "colex" | "pinned"
    pins: tuple[tuple[int, int], ...] = ()  # (time, state), both 1-based

    def __post_init__(self):
        if self.kind not in ("lex", "colex", "pinned"):
            raise ValueError(f"unknown tie rule {self.kind!r}")

    @classmethod
    def pinned(cls, pins: Mapping[int, int]) -> "TieRule":
        return cls("pinned", tuple(sorted((int(t), int(s)) for t, s in pins.items())))

    @classmethod
    def parse(cls, name: str) -> "TieRule":
        key = name.strip().lower()
        aliases = {"lex": "lex", "lexicographic": "lex", "colex": "colex",
                   "co-lexicographic": "colex", "colexicographic": "colex"}
        if key not in aliases:
            raise ValueError(f"unknown tie rule {name!r} (use lex or colex)")
        return cls(aliases[key])

    @property
    def lexicographic(self) -> bool:
        return self.kind != "colex"


LEX = TieRule("lex")
COLEX = TieRule("colex")


@dataclass(frozen=True)
class DecodeResult:
    path: tuple[int, ...] | None
    score: object  # log weight (float) or exact weight (Fraction)
    loglik: float
    ties: int = 0  # states tied at the final argmax
    diagnostic: str | None = None

    @property
    def ok(self) -> bool:
        return self.path is not None


@dataclass
class DeltaTable:
    """Normalised delta vectors, backpointers and the normalising offsets.

    Float mode: ``log delta_t = delta[t] + offsets[t]``.
    Exact mode: ``delta_t = delta[t] * scale(t)`` with ``scale`` the product
    of ``divisors[:t + 1]``; ``offsets`` holds its float log.
    """

    delta: np.ndarray
    backptr: np.ndarray
    offsets: np.ndarray
    exact: bool
    divisors: list = field(default_factory=list)
    zero_from: int | None = None  # first 1-based time with an all-zero column
    final_rank: np.ndarray | None = None

    def __len__(self) -> int:
        return self.delta.shape[0]

    @property
    def arith(self) -> Arith:
        return get_arith(self.exact)

    def raw(self, t: int) -> np.ndarray:
        """Un-normalised delta at 1-based time ``t``."""
        row = self.delta[t - 1]
        if not self.exact:
            return row + self.offsets[t - 1]
        scale = Fraction(1)
        for d in self.divisors[:t]:
            scale *= d
        return row * scale

    def log_raw(self, t: int) -> np.ndarray:
        if not self.exact:
            return self.raw(t)
        return np.array([fraction_log(v) for v in self.delta[t - 1]]) + self.offsets[t - 1]


def kernels(model: PMM, obs: Sequence, ar: Arith) -> list[np.ndarray]:
    """``K_t = q(x_t, . | x_{t-1}, .)`` for t = 2..n (list index t - 2)."""
    return [model.kernel(obs[t - 1], obs[t], ar) for t in range(1, len(obs))]


# ---------------------------------------------------------------------------
# one forward step
# ---------------------------------------------------------------------------

def _tied(ar: Arith, cand: np.ndarray, best: np.ndarray) -> np.ndarray:
    if ar.exact:
        return np.asarray(cand == best[None, :], dtype=bool)
    return cand >= best[None, :] - EQ_TOL


def _zero_mask(ar: Arith, v: np.ndarray) -> np.ndarray:
    if ar.exact:
        return np.asarray(v == 0, dtype=bool)
    return v == NEG_INF


def next_rank(rank: np.ndarray, bp: np.ndarray) -> np.ndarray:
    """Lexicographic rank of the best path into each state, given the ranks
    one step earlier and the chosen predecessors (-1 for none)."""
    n = len(rank)
    big = n + 1
    key = np.where(bp >= 0, rank[np.maximum(bp, 0)], big)
    order = np.lexsort((np.arange(n), key))
    out = np.empty(n, dtype=np.int64)
    out[order] = np.arange(n)
    return out


def forward_step(ar: Arith, prev: np.ndarray, K: np.ndarray, lexicographic: bool,
                 rank: np.ndarray | None):
    """One application of the delta recursion.

    Returns the new (un-normalised) vector and the backpointers. With
    ``lexicographic`` the predecessor among tied maximisers is the one whose
    best path has the smallest rank; otherwise the lowest-labelled one.
    """
    cand = ar.mul(prev[:, None], K)
    best = cand.max(axis=0)
    tied = _tied(ar, cand, best)
    if lexicographic:
        key = np.where(tied, rank[:, None], len(rank) + 1)
        bp = key.argmin(axis=0)
    else:
        bp = tied.argmax(axis=0)
    bp = bp.astype(np.int64)
    bp[_zero_mask(ar, best)] = -1
    return best, bp


def _normalise(ar: Arith, v: np.ndarray):
    top = v.max()
    if ar.is_zero(top):
        return v, None
    if ar.exact:
        return v / top, top
    return v - top, top


def _pin_mask(ar: Arith, v: np.ndarray, state: int) -> np.ndarray:
    out = ar.zeros(v.shape)
    out[state] = v[state]
    return out


def _forward(model: PMM, obs: Sequence, ar: Arith, tie: TieRule,
             pins: Mapping[int, int], include_initial: bool, normalize: bool) -> DeltaTable:
    """``pins`` maps 0-based times to 0-based states."""
    n, ny = len(obs), model.n_states
    for x in obs:
        model.check_obs(x)
    if include_initial:
        v = np.array(model.initial(obs[0], ar), copy=True)
    else:
        v = ar.ones(ny)
    if 0 in pins:
        v = _pin_mask(ar, v, pins[0])
    dtype = object if ar.exact else float
    delta = np.empty((n, ny), dtype=dtype)
    backptr = np.full((n, ny), -1, dtype=np.int64)
    offsets = np.zeros(n)
    divisors: list = []
    zero_from = None
    lex = tie.lexicographic
    rank = np.arange(ny, dtype=np.int64)
    total = 0.0

    def record(t, vec):
        nonlocal total, zero_from
        if normalize:
            vec, top = _normalise(ar, vec)
        else:
            top = None
        if top is None:
            divisors.append(Fraction(1))
            if ar.is_zero(vec.max()) and zero_from is None:
                zero_from = t + 1
        else:
            divisors.append(top if ar.exact else None)
            total += ar.to_log(top)
        offsets[t] = total
        delta[t] = vec
        return vec

    v = record(0, v)
    for t in range(1, n):
        K = model.kernel(obs[t - 1], obs[t], ar)
        v, bp = forward_step(ar, v, K, lex, rank)
        if t in pins:
            v = _pin_mask(ar, v, pins[t])
            bp = np.where(np.arange(ny) == pins[t], bp, -1)
        if lex:
            rank = next_rank(rank, bp)
        backptr[t] = bp
        v = record(t, v)
    return DeltaTable(delta, backptr, offsets, ar.exact,
                      divisors if ar.exact else [], zero_from, rank)


def delta_forward(model: PMM, obs: Sequence, exact: bool = False, tie: TieRule = LEX,
                  normalize: bool = True) -> DeltaTable:
    ar = get_arith(exact)
    _require_exact(model, ar)
    return _forward(model, obs, ar, tie, {}, True, normalize)


def _require_exact(model: PMM, ar: Arith) -> None:
    if ar.exact and not model.supports_exact:
        raise ModelError("exact arithmetic needs a discrete model")


def _backtrack(table: DeltaTable, last: int) -> tuple[int, ...]:
    n = len(table)
    path = [0] * n
    s = last
    for t in range(n - 1, -1, -1):
        path[t] = s + 1
        if t:
            s = int(table.backptr[t, s])
    return tuple(path)


def _decode(model: PMM, obs: Sequence, ar: Arith, tie: TieRule, pins: Mapping[int, int],
            include_initial: bool, normalize: bool = True) -> DecodeResult:
    if len(obs) == 0:
        raise ValueError("observation sequence is empty")
    _require_exact(model, ar)
    table = _forward(model, obs, ar, tie, pins, include_initial, normalize)
    last_row = table.delta[-1]
    best = last_row.max()
    if ar.is_zero(best):
        t0 = table.zero_from or len(obs)
        return DecodeResult(None, ar.zero, NEG_INF, 0,
                            f"zero-likelihood: no positive-probability path (all-zero delta at t={t0})")
    tied = [k for k in range(model.n_states) if ar.eq(last_row[k], best)]
    if tie.lexicographic:
        last = min(tied, key=lambda k: table.final_rank[k])
    else:
        last = tied[0]
    path = _backtrack(table, last)
    if ar.exact:
        score = table.raw(len(obs))[last]
        loglik = fraction_log(score)
    else:
        score = float(last_row[last] + table.offsets[-1])
        loglik = path_log_likelihood(model, obs, path, include_initial)
    return DecodeResult(path, score, loglik, len(tied))


def _pins_from_rule(tie: TieRule, n: int, model: PMM) -> dict[int, int]:
    pins = {}
    for t, s in tie.pins:
        if not 1 <= t <= n:
            raise ValueError(f"pin time {t} outside 1..{n}")
        pins[t - 1] = model.check_state(s)
    return pins


def viterbi_path(model: PMM, obs: Sequence, tie: TieRule = LEX, exact: bool = False,
                 normalize: bool = True) -> DecodeResult:
    """A maximiser of ``p(x_{1:n}, y_{1:n})`` chosen by ``tie``.

    For a pinned rule the pins are honoured; if that loses likelihood against
    the unconstrained maximum the result carries a ``pins-suboptimal``
    diagnostic.
    """
    ar = get_arith(exact)
    if tie.kind != "pinned":
        return _decode(model, obs, ar, tie, {}, True, normalize)
    pinned = _decode(model, obs, ar, tie, _pins_from_rule(tie, len(obs), model), True, normalize)
    free = _decode(model, obs, ar, LEX, {}, True, normalize)
    if free.ok and (not pinned.ok or not ar.eq(pinned.score, free.score)):
        note = "pins-suboptimal: the pinned path is not a maximiser"
        if pinned.diagnostic:
            note += "; " + pinned.diagnostic
        return DecodeResult(pinned.path, pinned.score, pinned.loglik, pinned.ties, note)
    return pinned


def constrained_path(model: PMM, obs: Sequence, start_state: int | None = None,
                     end_state: int | None = None, include_initial: bool = True,
                     tie: TieRule = LEX, exact: bool = False,
                     pins: Mapping[int, int] | None = None) -> DecodeResult:
    """Best path over ``obs`` with optional first/last states pinned.

    ``pins`` may add interior constraints (1-based time -> state). With
    ``include_initial=False`` the weight is the product of kernel terms only.
    """
    n = len(obs)
    if n == 0:
        raise ValueError("observation segment is empty")
    p: dict[int, int] = {}
    for t, s in (pins or {}).items():
        if not 1 <= t <= n:
            raise ValueError(f"pin time {t} outside 1..{n}")
        p[t - 1] = model.check_state(s)
    for t, s in ((0, start_state), (n - 1, end_state)):
        if s is None:
            continue
        s0 = model.check_state(s)
        if p.get(t, s0) != s0:
            return DecodeResult(None, get_arith(exact).zero, NEG_INF, 0,
                                "zero-likelihood: conflicting pins")
        p[t] = s0
    rule = LEX if tie.kind == "pinned" else tie
    return _decode(model, obs, get_arith(exact), rule, p, include_initial)


# ---------------------------------------------------------------------------
# segment maxima
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentMaxMatrix:
    """``matrix[i, j]`` is the best kernel product over the segment from state
    i+1 at its first time to state j+1 at its last (log weight or Fraction)."""

    start: int
    end: int
    matrix: np.ndarray
    exact: bool

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def log(self) -> np.ndarray:
        if not self.exact:
            return np.asarray(self.matrix, dtype=float)
        return np.vectorize(fraction_log, otypes=[float])(self.matrix)

    def support(self) -> np.ndarray:
        return ~_zero_mask(get_arith(self.exact), self.matrix)

    def entry(self, i: int, j: int):
        return self.matrix[i - 1, j - 1]


def segment_product(ar: Arith, ks: Sequence[np.ndarray], n_states: int) -> np.ndarray:
    m = ar.identity(n_states)
    for K in ks:
        m = ar.matprod(m, K)
    return m


def segment_max(model: PMM, obs_segment: Sequence, exact: bool = False,
                start: int = 1) -> SegmentMaxMatrix:
    if len(obs_segment) == 0:
        raise ValueError("segment must contain at least one observation")
    ar = get_arith(exact)
    _require_exact(model, ar)
    m = segment_product(ar, kernels(model, obs_segment, ar), model.n_states)
    return SegmentMaxMatrix(start, start + len(obs_segment) - 1, m, exact)


def maxplus_product(a: SegmentMaxMatrix, b: SegmentMaxMatrix) -> SegmentMaxMatrix:
    """Glue two segments sharing their boundary time."""
    if a.end != b.start or a.exact != b.exact:
        raise ValueError("segments must share an endpoint and an arithmetic")
    ar = get_arith(a.exact)
    return SegmentMaxMatrix(a.start, b.end, ar.matprod(a.matrix, b.matrix), a.exact)


# ---------------------------------------------------------------------------
# brute force
# ---------------------------------------------------------------------------

def check_guard(n_states: int, n: int, limit: int = ORACLE_LIMIT) -> None:
    if n_states ** n > limit:
        raise GuardError(f"|Y|^n = {n_states}^{n} exceeds the enumeration guard {limit}")


def all_path_weights(model: PMM, obs: Sequence, include_initial: bool = True,
                     exact: bool = False) -> np.ndarray:
    """Weight of every hidden path as an ``(|Y|,) * n`` array (C order =
    lexicographic order of paths)."""
    ar = get_arith(exact)
    _require_exact(model, ar)
    n, ny = len(obs), model.n_states
    check_guard(ny, n)
    w = np.array(model.initial(obs[0], ar), copy=True) if include_initial else ar.ones(ny)
    for t in range(1, n):
        K = model.kernel(obs[t - 1], obs[t], ar)
        w = ar.mul(w[..., :, None], K.reshape((1,) * (t - 1) + K.shape))
    return w


def brute_force_oracle(model: PMM, obs: Sequence, start_pin: int | None = None,
                       end_pin: int | None = None, include_initial: bool = True,
                       exact: bool = False) -> DecodeResult:
    """Exhaustive maximisation; the returned path is the lexicographically
    smallest maximiser and ``ties`` counts all maximisers."""
    if len(obs) == 0:
        raise ValueError("observation sequence is empty")
    ar = get_arith(exact)
    w = all_path_weights(model, obs, include_initial, exact)
    ny = model.n_states
    sel = [slice(None)] * len(obs)
    mask = np.zeros(w.shape, dtype=bool)
    if start_pin is not None:
        sel[0] = model.check_state(start_pin)
    if end_pin is not None:
        e = model.check_state(end_pin)
        if len(obs) == 1 and start_pin is not None and sel[0] != e:
            return DecodeResult(None, ar.zero, NEG_INF, 0, "zero-likelihood: conflicting pins")
        sel[-1] = e
    mask[tuple(sel)] = True
    flat = w.ravel()
    allowed = mask.ravel()
    cands = flat[allowed]
    best = cands.max()
    if ar.is_zero(best):
        return DecodeResult(None, ar.zero, NEG_INF, 0, "zero-likelihood: no positive path")
    hits = np.flatnonzero(allowed & _tied(ar, flat[:, None], np.array([best], dtype=flat.dtype))[:, 0])
    first = int(hits[0])
    path = tuple(int(s) + 1 for s in np.unravel_index(first, (ny,) * len(obs)))
    loglik = fraction_log(best) if exact else path_log_likelihood(model, obs, path, include_initial)
    return DecodeResult(path, best if exact else float(best), loglik, len(hits))


def enumerate_paths(n_states: int, n: int):
    """All hidden paths of length ``n`` in lexicographic order (1-based)."""
    check_guard(n_states, n)
    return itertools.product(range(1, n_states + 1), repeat=n)


def path_score(model: PMM, obs, path, include_initial: bool = True, exact: bool = False):
    if exact:
        return path_weight_exact(model, obs, path, include_initial)
    return path_log_likelihood(model, obs, path, include_initial)


def loglik_close(a: float, b: float, tol: float = 1e-9) -> bool:
    if a == b:
        return True
    return math.isfinite(a) and math.isfinite(b) and abs(a - b) <= tol
