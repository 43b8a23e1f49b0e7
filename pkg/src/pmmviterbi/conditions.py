"""Checkable sufficient conditions for infinitely many (strong) barriers.

Three families are covered: HMMs with discrete emissions, general discrete
PMMs, and linear switching models with Gaussian noise. Conditions stated
with an arbitrary reference measure are read for discrete X with the
counting measure (a set has positive measure iff it is non-empty).
Irreducibility of a general chain is replaced by reachability on the finite
joint state space; for Gaussian models it follows from primitivity because
the noise densities are positive everywhere.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .arith import as_fraction
from .dp import GuardError, segment_max
from .model import DiscretePMM, GaussianLinearSwitching, Hmm, ModelError, PMM
from .nodes import y_plus

MAX_CLUSTER_STATES = 12
MAX_SEARCH_LEN = 6


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Primitivity:
    primitive: bool
    exponent: int | None  # smallest R with all-positive R-th power


def _positive_pattern(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=object)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if any(v < 0 for v in a.ravel()):
        raise ValueError("matrix must be non-negative")
    return np.array([[bool(v > 0) for v in row] for row in a], dtype=bool)


def _bool_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.int64) @ b.astype(np.int64)) > 0


def primitivity(matrix) -> Primitivity:
    """Boolean powers up to the Wielandt bound ``(n - 1)^2 + 1``."""
    pat = _positive_pattern(matrix)
    n = pat.shape[0]
    if n == 0:
        return Primitivity(False, None)
    power = pat.copy()
    for r in range(1, (n - 1) ** 2 + 2):
        if power.all():
            return Primitivity(True, r)
        power = _bool_matmul(power, pat)
    return Primitivity(False, None)


def reachability(matrix) -> np.ndarray:
    """``reach[i, j]``: j can be reached from i in one or more steps."""
    pat = _positive_pattern(matrix)
    reach = pat.copy()
    while True:
        nxt = reach | _bool_matmul(reach, pat)
        if (nxt == reach).all():
            return reach
        reach = nxt


def is_irreducible(matrix) -> bool:
    reach = reachability(matrix)
    return bool(reach.all())


# ---------------------------------------------------------------------------
# HMM corollary
# ---------------------------------------------------------------------------

@dataclass
class ConditionIReport:
    column_max: list  # p_.j = max_i p_ij per state
    witnesses: dict  # state -> symbols where f_j(x) p_.j beats every other state
    values: dict  # state -> {symbol: (f_j(x) p_.j, max_{i != j} f_i(x) p_.i)}
    failing_states: list
    scores: dict  # state -> {symbol: f_state(x) p_.state}

    @property
    def passed(self) -> bool:
        return not self.failing_states


@dataclass
class ClusterReport:
    supports: dict  # state -> symbols x with f_state(x) > 0
    clusters: list
    weak_clusters: list
    primitivity: dict  # weak cluster (tuple) -> Primitivity of P_C


@dataclass
class HmmCorollaryReport:
    condition_i: ConditionIReport
    clusters: ClusterReport
    primitive_weak_cluster: tuple | None
    irreducible: bool
    failing: list = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return not self.failing


def condition_i(model: Hmm) -> ConditionIReport:
    P, E = model.transitions, model.emissions
    ny, nx = E.shape
    col = [max(P[:, j]) for j in range(ny)]
    witnesses, values, failing = {}, {}, []
    scores = {i + 1: {x + 1: E[i, x] * col[i] for x in range(nx)} for i in range(ny)}
    for j in range(ny):
        vals, syms = {}, []
        for x in range(nx):
            lhs = E[j, x] * col[j]
            rhs = max((E[i, x] * col[i] for i in range(ny) if i != j), default=Fraction(0))
            vals[x + 1] = (lhs, rhs)
            if lhs > rhs:
                syms.append(x + 1)
        witnesses[j + 1] = syms
        values[j + 1] = vals
        if not syms:
            failing.append(j + 1)
    return ConditionIReport(col, witnesses, values, failing, scores)


def cluster_report(model: Hmm) -> ClusterReport:
    E, P = model.emissions, model.transitions
    ny, nx = E.shape
    if ny > MAX_CLUSTER_STATES:
        raise GuardError(f"|Y| = {ny} exceeds the cluster enumeration guard {MAX_CLUSTER_STATES}")
    supports = {i + 1: frozenset(x + 1 for x in range(nx) if E[i, x] > 0) for i in range(ny)}
    all_x = frozenset(range(1, nx + 1))
    clusters, weak, prim = [], [], {}
    for size in range(1, ny + 1):
        for C in itertools.combinations(range(1, ny + 1), size):
            inside = all_x
            for i in C:
                inside = inside & supports[i]
            outside = frozenset()
            for i in range(1, ny + 1):
                if i not in C:
                    outside = outside | supports[i]
            if inside and not (inside & outside):
                clusters.append(C)
            if inside - outside:
                weak.append(C)
                idx = [i - 1 for i in C]
                prim[C] = primitivity(P[np.ix_(idx, idx)])
    return ClusterReport(supports, clusters, weak, prim)


def check_hmm_corollary(model: Hmm) -> HmmCorollaryReport:
    """Condition (i), a weak cluster with primitive ``P_C`` and irreducible Y."""
    if not isinstance(model, Hmm) or model.emissions is None:
        raise ModelError("the HMM corollary needs an HMM with discrete emissions")
    ci = condition_i(model)
    cl = cluster_report(model)
    good = next((C for C in cl.weak_clusters if cl.primitivity[C].primitive), None)
    irreducible = is_irreducible(model.transitions)
    failing = []
    for j in ci.failing_states:
        rows = ci.values[j]
        failing.append({"item": "condition (i)", "state": j,
                        "lhs": {x: v[0] for x, v in rows.items()},
                        "competitor": {x: v[1] for x, v in rows.items()},
                        "scores": {i: ci.scores[i] for i in ci.scores if i != j}})
    if good is None:
        failing.append({"item": "condition (ii)",
                        "what": "no weak cluster with primitive P_C"})
    if not irreducible:
        failing.append({"item": "irreducibility", "what": "hidden chain is reducible"})
    return HmmCorollaryReport(ci, cl, good, irreducible, failing)


def two_state_hmm_distinct_emissions(model: Hmm) -> bool:
    if not isinstance(model, Hmm) or model.emissions is None or model.n_states != 2:
        raise ModelError("needs a two-state HMM with discrete emissions")
    E = model.emissions
    return any(E[0, x] != E[1, x] for x in range(E.shape[1]))


# ---------------------------------------------------------------------------
# discrete PMM corollary
# ---------------------------------------------------------------------------

@dataclass
class CycleWitness:
    cycle: tuple
    state: int
    col_strict: bool  # p_11 > p_i1 for i != 1
    row_strict: bool  # p_11 > p_1i for i != 1
    epsilon: float  # 1 - max_{i,j != 1} p_ij / p_11


@dataclass
class DiscreteCorollaryReport:
    irreducible: bool
    support_size: int  # number of joint states in the reachable support
    condition_i: bool
    subpositive_words: list  # words x_{1:q} with rectangular Y+
    condition_ii: bool
    cycles: list  # CycleWitness
    failing: list = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return not self.failing


def joint_support(model: DiscretePMM) -> tuple[list, np.ndarray]:
    """Joint states reachable from the initial law and their transition pattern."""
    table, init = model.joint_table(), model.initial_table()
    n_x, n_y = init.shape
    start = {(x, y) for x in range(n_x) for y in range(n_y) if init[x, y] > 0}
    seen, stack = set(start), list(start)
    while stack:
        a, i = stack.pop()
        for b in range(n_x):
            for j in range(n_y):
                if table[a, i, b, j] > 0 and (b, j) not in seen:
                    seen.add((b, j))
                    stack.append((b, j))
    states = sorted(seen)
    pat = np.array([[table[a, i, b, j] > 0 for (b, j) in states] for (a, i) in states],
                   dtype=bool)
    return [(a + 1, i + 1) for a, i in states], pat


def _words(n_x: int, lo: int, hi: int):
    for q in range(lo, hi + 1):
        yield from itertools.product(range(1, n_x + 1), repeat=q)


def check_discrete_corollary(model: DiscretePMM, max_q: int = 4, max_n: int = 4,
                             relabel: bool = False) -> DiscreteCorollaryReport:
    """Irreducibility of Z on its support, (i) a subpositive word and (ii) a
    dominance cycle, searched over words of length at most ``max_q`` /
    ``max_n``."""
    if not model.is_discrete:
        raise ModelError("needs a discrete model")
    if max_q > MAX_SEARCH_LEN or max_n > MAX_SEARCH_LEN:
        raise GuardError(f"search length exceeds the guard {MAX_SEARCH_LEN}")
    states, pat = joint_support(model)
    irreducible = bool(reachability(pat).all())
    n_x = model.n_symbols
    words = []
    for w in _words(n_x, 2, max_q):
        yp = y_plus(segment_max(model, w, exact=True))
        if yp.first and yp.is_rectangle:
            words.append(w)
    support = set(states)
    cycles = []
    roles = range(1, model.n_states + 1) if relabel else (1,)
    for w in _words(n_x, 2, max_n):
        if w[0] != w[-1]:
            continue
        p = segment_max(model, w, exact=True).matrix
        for s in roles:
            wit = _corollary_cycle(p, s - 1)
            if wit is not None and (w[0], s) in support:
                cycles.append(CycleWitness(w, s, *wit))
    failing = []
    if not irreducible:
        failing.append({"item": "irreducibility", "what": "Z is reducible on its support"})
    if not words:
        failing.append({"item": "condition (i)", "what": f"no subpositive word of length <= {max_q}"})
    if not cycles:
        failing.append({"item": "condition (ii)", "what": f"no dominance cycle of length <= {max_n}"})
    return DiscreteCorollaryReport(irreducible, len(states), bool(words), words,
                                   bool(cycles), cycles, failing)


def _corollary_cycle(p: np.ndarray, s: int):
    ny = p.shape[0]
    p11 = p[s, s]
    if p11 == 0:
        return None
    others = [i for i in range(ny) if i != s]
    if not all(p11 > p[i, j] for i in others for j in others):
        return None
    if not all(p11 >= p[i, s] and p11 >= p[s, i] for i in others):
        return None
    col = all(p11 > p[i, s] for i in others)
    row = all(p11 > p[s, i] for i in others)
    if not (col or row):
        return None
    inner = [p[i, j] for i in others for j in others]
    eps = float(1 - max(inner) / p11) if inner else 1.0
    return col, row, eps


# ---------------------------------------------------------------------------
# Gaussian linear switching corollary
# ---------------------------------------------------------------------------

@dataclass
class HijTest:
    i: int
    j: int
    ratio: float  # p_11 sqrt|S_j| / (p_ij sqrt|S_1|), inf when p_ij = 0
    empty: bool
    quad_form: float | None  # (z - mu_j)' S_j^-1 (z - mu_j) at z = (I - F(j)) x*
    bound: float | None  # -2 ln ratio
    outside: bool


@dataclass
class GlmConditionReport:
    primitive: bool
    exponent: int | None
    dominance: bool
    dominance_margin: Fraction  # p_11 - max_{i != 1} p_i1
    nonsingular: bool
    fixed_point: list | None
    h_tests: list
    cycle_ok: bool
    drift: Fraction
    drift_ok: bool
    harris_by_drift: bool
    failing: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return not self.failing


def _norm1(F: np.ndarray) -> Fraction:
    """Maximum absolute column sum, computed on the decimal values of F."""
    cols = [sum((abs(as_fraction(float(v))) for v in F[:, c]), Fraction(0))
            for c in range(F.shape[1])]
    return max(cols)


def check_glm_corollary(model) -> GlmConditionReport:
    if isinstance(model, Hmm) and model.gaussian is not None:
        model = model.as_linear_switching()
    if not isinstance(model, GaussianLinearSwitching):
        raise ModelError("needs a Gaussian linear switching model")
    P = model.transitions
    ny, d = model.n_states, model.dim
    prim = primitivity(P)
    col1 = [P[i, 0] for i in range(ny)]
    rivals = [P[i, 0] for i in range(1, ny)]
    margin = P[0, 0] - max(rivals) if rivals else P[0, 0]
    dominance = P[0, 0] == max(col1)
    I = np.eye(d)
    A = I - model.F[0]
    tests: list[HijTest] = []
    nonsingular = abs(np.linalg.det(A)) > 1e-12
    x_star = None
    if nonsingular:
        x_star = np.linalg.solve(A, model.means[0])
        det = [float(np.linalg.det(S)) for S in model.covariances]
        for i in range(ny):
            for j in range(1, ny):
                pij = P[i, j]
                if pij == 0:
                    tests.append(HijTest(i + 1, j + 1, math.inf, True, None, None, True))
                    continue
                ratio = float(P[0, 0] / pij) * math.sqrt(det[j] / det[0])
                if ratio > 1:
                    tests.append(HijTest(i + 1, j + 1, ratio, True, None, None, True))
                    continue
                z = (I - model.F[j]) @ x_star - model.means[j]
                quad = float(z @ np.linalg.solve(model.covariances[j], z))
                bound = -2.0 * math.log(ratio)
                tests.append(HijTest(i + 1, j + 1, ratio, False, quad, bound, quad > bound))
    cycle_ok = nonsingular and all(t.outside for t in tests)
    drift = max(sum((P[i, j] * _norm1(model.F[j]) for j in range(ny)), Fraction(0))
                for i in range(ny))
    drift_ok = drift < 1
    failing = []
    if not prim.primitive:
        failing.append({"item": "(i) primitivity", "what": "P is not primitive"})
    if not dominance:
        failing.append({"item": "(ii) column dominance", "margin": margin})
    if not nonsingular:
        failing.append({"item": "(iii) cycle", "what": "I - F(1) is singular"})
    elif not cycle_ok:
        bad = [t for t in tests if not t.outside]
        failing.append({"item": "(iii) cycle", "pairs": [(t.i, t.j) for t in bad]})
    if not drift_ok:
        failing.append({"item": "(iv) drift", "value": drift})
    notes = ["Gaussian noise densities are positive everywhere, so every point is "
             "reachable once P is irreducible; E|xi|_1 is finite."]
    return GlmConditionReport(
        prim.primitive, prim.exponent, dominance, margin, nonsingular,
        None if x_star is None else x_star.tolist(), tests, cycle_ok, drift, drift_ok,
        prim.primitive and drift_ok, failing, notes)


def check_all(model: PMM, which: str = "all") -> dict:
    """Run every corollary applicable to ``model`` (or only ``which``)."""
    out = {}
    want = {"hmm", "discrete", "glm"} if which == "all" else {which}
    if "hmm" in want:
        if isinstance(model, Hmm) and model.emissions is not None:
            out["hmm"] = check_hmm_corollary(model)
        elif which == "hmm":
            raise ModelError("model is not an HMM with discrete emissions")
    if "discrete" in want:
        if model.is_discrete:
            out["discrete"] = check_discrete_corollary(model)
        elif which == "discrete":
            raise ModelError("model is not discrete")
    if "glm" in want:
        gaussian = isinstance(model, GaussianLinearSwitching) or (
            isinstance(model, Hmm) and model.gaussian is not None)
        if gaussian:
            out["glm"] = check_glm_corollary(model)
        elif which == "glm":
            raise ModelError("model is not a Gaussian linear switching model")
    return out
