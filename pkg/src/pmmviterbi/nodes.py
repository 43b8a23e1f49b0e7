"""Nodes, barriers and their certification.

Time ``t`` of ``x_{1:m}`` is an ``i``-node of order ``r = m - t`` when

    delta_t(i) p_ij(x_{t:m}) >= delta_t(k) p_kj(x_{t:m})   for all j, k,

and a strong ``i``-node when the inequality is strict for every ``k != i``
whose left side is positive. A block of observations is a barrier when it
forces a node wherever it appears. Certification is sound but sufficient
only (block-local inequalities); ``falsify_barrier`` searches for embeddings
that break a claimed barrier.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .arith import Arith, as_fraction, get_arith
from .dp import (
    GuardError,
    SegmentMaxMatrix,
    _require_exact,
    delta_forward,
    kernels,
    segment_max,
    segment_product,
)
from .model import PMM, ModelError
from .simulate import simulate

MAX_CYCLE_LEN = 6


@dataclass(frozen=True)
class NodeReport:
    t: int
    order: int
    node_states: tuple[int, ...]
    strong_states: tuple[int, ...]

    @property
    def m(self) -> int:
        return self.t + self.order

    @property
    def is_node(self) -> bool:
        return bool(self.node_states)

    def is_strong(self, state: int | None = None) -> bool:
        return bool(self.strong_states) if state is None else state in self.strong_states


def node_states_from(ar: Arith, delta_t: np.ndarray, seg: np.ndarray):
    """Node and strong-node states (1-based) for ``delta_t`` and ``p_ij(x_{t:m})``."""
    a = ar.mul(delta_t[:, None], seg)
    col_max = a.max(axis=0)
    ny = len(delta_t)
    nodes, strong = [], []
    for i in range(ny):
        if not all(ar.ge(a[i, j], col_max[j]) for j in range(ny)):
            continue
        nodes.append(i + 1)
        if all(ar.is_zero(a[i, j]) or ar.gt(a[i, j], a[k, j])
               for j in range(ny) for k in range(ny) if k != i):
            strong.append(i + 1)
    return tuple(nodes), tuple(strong)


def detect_node(model: PMM, obs: Sequence, t: int, exact: bool = False) -> NodeReport:
    """Evaluate the node inequality at time ``t`` (1-based) of ``obs = x_{1:m}``."""
    m = len(obs)
    if not 1 <= t <= m:
        raise ValueError(f"t={t} outside 1..{m}")
    table = delta_forward(model, obs[:t], exact=exact)
    seg = segment_max(model, obs[t - 1:], exact=exact, start=t)
    nodes, strong = node_states_from(get_arith(exact), table.delta[t - 1], seg.matrix)
    return NodeReport(t, m - t, nodes, strong)


def scan_nodes(model: PMM, obs: Sequence, orders: Sequence[int] = range(11),
               exact: bool = False, include_empty: bool = False) -> list[NodeReport]:
    """Node reports for every time ``t`` and order ``r`` with ``t + r <= n``.

    Only nodes are returned unless ``include_empty``.
    """
    ar = get_arith(exact)
    table = delta_forward(model, obs, exact=exact)
    ks = kernels(model, obs, ar)
    orders = sorted(set(int(r) for r in orders))
    if orders and orders[0] < 0:
        raise ValueError("orders must be non-negative")
    r_max = orders[-1] if orders else -1
    wanted = set(orders)
    n, ny = len(obs), model.n_states
    out = []
    for t in range(1, n + 1):
        seg = ar.identity(ny)
        for r in range(0, min(r_max, n - t) + 1):
            if r:
                seg = ar.matprod(seg, ks[t + r - 2])
            if r not in wanted:
                continue
            nodes, strong = node_states_from(ar, table.delta[t - 1], seg)
            if nodes or include_empty:
                out.append(NodeReport(t, r, nodes, strong))
    return out


@dataclass(frozen=True)
class YPlusSet:
    pairs: frozenset
    first: frozenset  # projection onto the first state
    second: frozenset

    @property
    def empty(self) -> bool:
        return not self.pairs

    @property
    def is_rectangle(self) -> bool:
        return all((i, j) in self.pairs for i in self.first for j in self.second)


def y_plus(seg: SegmentMaxMatrix) -> YPlusSet:
    sup = seg.support()
    pairs = frozenset((i + 1, j + 1) for i, j in zip(*np.nonzero(sup)))
    return YPlusSet(pairs, frozenset(i for i, _ in pairs), frozenset(j for _, j in pairs))


def y_plus_of(model: PMM, obs_segment: Sequence, exact: bool = True) -> YPlusSet:
    return y_plus(segment_max(model, obs_segment, exact=exact and model.supports_exact))


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass
class BarrierCertificate:
    block: tuple
    split: int  # 1-based position of the node inside the block
    order: int
    state: int  # barrier state (plays the role of state 1)
    strict: bool
    method: str  # "prop21" | "A-conditions"
    exact: bool
    witnesses: list = field(default_factory=list)
    relabel: dict | None = None  # {1: state, state: 1} when state != 1
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["block"] = [_jsonable(v) for v in self.block]
        d["witnesses"] = [dict(w, margin=_margin_json(w["margin"])) for w in self.witnesses]
        return d

    def reverify(self, model: PMM) -> bool:
        """Recheck the recorded inequalities from the block alone."""
        res = verify_barrier_prop21(model, self.block, self.split, exact=self.exact,
                                    state=self.state)
        if not isinstance(res, BarrierCertificate):
            return False
        return res.strict or not self.strict


@dataclass
class Refusal:
    block: tuple
    split: int
    state: int
    violations: list  # (i, j, k, margin) with negative margin
    reason: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["block"] = [_jsonable(v) for v in self.block]
        d["violations"] = [dict(v, margin=_margin_json(v["margin"])) for v in self.violations]
        return d


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _margin_json(m: float):
    if math.isinf(m):
        return "inf" if m > 0 else "-inf"
    return m


def _relabel(state: int, ny: int):
    perm = list(range(ny))
    perm[0], perm[state - 1] = perm[state - 1], perm[0]
    return perm


def verify_barrier_prop21(model: PMM, block: Sequence, l: int, exact: bool = False,
                          state: int = 1) -> BarrierCertificate | Refusal:
    """Check ``p_{i s}(b_{1:l}) p_{s j}(b_{l:M}) >= p_ik(b_{1:l}) p_kj(b_{l:M})``
    for all ``i, j, k`` with ``s = state``; success certifies an ``s``-barrier
    of order ``M - l`` whose node sits at block position ``l``."""
    block = tuple(block)
    M = len(block)
    if M < 3 or not 2 <= l <= M - 1:
        raise ValueError("need M >= 3 and 2 <= l <= M - 1")
    ar = get_arith(exact)
    _require_exact(model, ar)
    s = model.check_state(state)
    left = segment_max(model, block[:l], exact=exact).matrix
    right = segment_max(model, block[l - 1:], exact=exact).matrix
    ny = model.n_states
    witnesses, violations = [], []
    strict = True
    for i, j in itertools.product(range(ny), range(ny)):
        lhs = ar.mul(left[i, s], right[s, j])
        for k in range(ny):
            if k == s:
                continue
            rhs = ar.mul(left[i, k], right[k, j])
            margin = ar.margin(lhs, rhs)
            rec = {"i": i + 1, "j": j + 1, "k": k + 1, "margin": margin}
            if not ar.ge(lhs, rhs):
                violations.append(rec)
                continue
            if not ar.is_zero(lhs) and not ar.gt(lhs, rhs):
                strict = False
            witnesses.append(rec)
    if violations:
        return Refusal(block, l, state, violations,
                       f"{len(violations)} inequalities fail at split {l}")
    return BarrierCertificate(block, l, M - l, state, strict, "prop21", exact, witnesses,
                              None if state == 1 else {1: state, state: 1})


def triple_barrier(model: PMM, triplet: Sequence, state: int = 1,
                   exact: bool = False) -> BarrierCertificate | Refusal:
    """Order-1 barrier test on three consecutive observations."""
    if len(triplet) != 3:
        raise ValueError("triplet must have length 3")
    return verify_barrier_prop21(model, triplet, 2, exact=exact, state=state)


def prop21_splits(model: PMM, block: Sequence, exact: bool = False, state: int = 1):
    """Certificates from the split-point inequality at every interior split of ``block``."""
    out = []
    for l in range(2, len(block)):
        res = verify_barrier_prop21(model, block, l, exact=exact, state=state)
        if isinstance(res, BarrierCertificate):
            out.append(res)
    return out


# ---------------------------------------------------------------------------
# A1 - A3
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AConditionsInput:
    candidates: tuple  # observation vectors of length n_{2N+2}
    indices: tuple  # n_1 < ... < n_{2N+2}, 1-based
    epsilon: Fraction
    delta: Fraction
    Delta: Fraction

    @classmethod
    def of(cls, candidates, indices, epsilon, delta, Delta) -> "AConditionsInput":
        return cls(tuple(tuple(c) for c in candidates), tuple(int(i) for i in indices),
                   as_fraction(epsilon), as_fraction(delta), as_fraction(Delta))

    @property
    def N(self) -> int:
        return (len(self.indices) - 2) // 2

    def validate(self) -> None:
        idx = self.indices
        if len(idx) < 6 or len(idx) % 2:
            raise ValueError("need 2N + 2 indices with N >= 2")
        if any(b <= a for a, b in zip(idx, idx[1:])) or idx[0] < 2:
            raise ValueError("indices must be strictly increasing with n_1 >= 2")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.delta <= self.Delta:
            raise ValueError("need 0 < delta <= Delta")
        for c in self.candidates:
            if len(c) != idx[-1]:
                raise ValueError(f"candidate of length {len(c)}, expected n_(2N+2) = {idx[-1]}")


@dataclass
class AConditionsReport:
    A1: bool
    A1_strong: bool
    A1_col_strict: bool
    A1_row_strict: bool
    A2: bool
    A3: bool
    A3_value: float
    failures: list
    certificates: list
    order: int

    @property
    def passed(self) -> bool:
        return self.A1 and self.A2 and self.A3

    def to_dict(self) -> dict:
        d = asdict(self)
        d["certificates"] = [c.to_dict() for c in self.certificates]
        return d


def _const(ar: Arith, v: Fraction):
    return v if ar.exact else math.log(v) if v > 0 else -math.inf


def check_A_conditions(model: PMM, inp: AConditionsInput, exact: bool = True,
                       state: int = 1) -> AConditionsReport:
    inp.validate()
    ar = get_arith(exact)
    _require_exact(model, ar)
    s = model.check_state(state)
    ny = model.n_states
    idx, N = inp.indices, inp.N
    one_minus_eps = _const(ar, 1 - inp.epsilon)
    lo, hi = _const(ar, inp.delta), _const(ar, inp.Delta)
    failures = []
    col_strict = row_strict = True
    a1 = True
    others = [i for i in range(ny) if i != s]

    def fail(cond, section, what, **kw):
        failures.append({"condition": cond, "section": list(section), "what": what, **kw})

    sections = set()
    for c in inp.candidates:
        for k in range(2 * N):
            sections.add(tuple(c[idx[k] - 1: idx[k + 1]]))
    for sec in sorted(sections, key=repr):
        p = segment_max(model, sec, exact=exact).matrix
        p11 = p[s, s]
        for i in others:
            if not ar.ge(p11, p[i, s]):
                a1 = False
                fail("A1", sec, "p11 >= p_i1", i=i + 1, margin=ar.margin(p11, p[i, s]))
            elif not ar.gt(p11, p[i, s]):
                col_strict = False
            if not ar.ge(p11, p[s, i]):
                a1 = False
                fail("A1", sec, "p11 >= p_1i", i=i + 1, margin=ar.margin(p11, p[s, i]))
            elif not ar.gt(p11, p[s, i]):
                row_strict = False
        lhs = ar.mul(p11, one_minus_eps)
        for i, j in itertools.product(others, others):
            if not ar.gt(lhs, p[i, j]):
                a1 = False
                fail("A1", sec, "p11 (1 - eps) > p_ij", i=i + 1, j=j + 1,
                     margin=ar.margin(lhs, p[i, j]))

    a2 = True
    for side, cut in (("left", (1, idx[0])), ("right", (idx[-2], idx[-1]))):
        flanks = sorted({tuple(c[cut[0] - 1: cut[1]]) for c in inp.candidates}, key=repr)
        for sec in flanks:
            seg = segment_max(model, sec, exact=exact)
            p = seg.matrix
            yp = y_plus(seg)
            for i, j in itertools.product(range(ny), range(ny)):
                if not ar.ge(hi, p[i, j]):
                    a2 = False
                    fail("A2", sec, "p_ij <= Delta", i=i + 1, j=j + 1)
            if yp.empty:
                a2 = False
                fail("A2", sec, f"Y+ of the {side} flank is empty")
                continue
            if side == "left":
                for i in sorted(yp.first):
                    if not ar.ge(p[i - 1, s], lo):
                        a2 = False
                        fail("A2", sec, "p_i1 >= delta", i=i, margin=ar.margin(p[i - 1, s], lo))
            else:
                for j in sorted(yp.second):
                    if not ar.ge(p[s, j - 1], lo):
                        a2 = False
                        fail("A2", sec, "p_1j >= delta", j=j, margin=ar.margin(p[s, j - 1], lo))

    a3_exact = inp.Delta / inp.delta * (1 - inp.epsilon) ** N
    a3 = a3_exact < 1
    if not a3:
        failures.append({"condition": "A3", "what": "Delta/delta (1-eps)^N < 1",
                         "value": float(a3_exact)})
    a1_strong = a1 and (col_strict or row_strict)
    order = idx[-1] - idx[N]
    certs = []
    if a1 and a2 and a3:
        for c in inp.candidates:
            cert = BarrierCertificate(tuple(c), idx[N], order, state, a1_strong,
                                      "A-conditions", exact, [],
                                      None if state == 1 else {1: state, state: 1})
            others_p21 = [p.order for p in prop21_splits(model, c, exact=exact, state=state)]
            if others_p21:
                cert.notes.append({"prop21_orders": others_p21})
            certs.append(cert)
    return AConditionsReport(a1, a1_strong, col_strict, row_strict, a2, a3,
                             float(a3_exact), failures, certs, order)


# ---------------------------------------------------------------------------
# cyclic centre parts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CenterCandidate:
    cycle: tuple  # x_{1:n} with x_1 = x_n
    state: int
    epsilon: float  # 1 - max_{(i,j) != (1,1)} p_ij / p_11
    col_strict: bool  # p_11 > p_i1 for all i != 1
    row_strict: bool  # p_11 > p_1i for all i != 1
    N: int

    @property
    def center(self) -> tuple:
        """``2N`` copies of ``x_{1:n-1}`` followed by ``x_n``."""
        return tuple(self.cycle[:-1]) * (2 * self.N) + (self.cycle[-1],)


def find_cyclic_center(model: PMM, max_cycle_len: int = 4, N: int = 2,
                       relabel: bool = False, exact: bool = True) -> list[CenterCandidate]:
    """Cycles ``x_{1:n}``, ``2 <= n <= max_cycle_len``, with ``x_1 = x_n`` and
    ``p_11(x) > p_ij(x)`` for every ``(i, j) != (1, 1)``.

    With ``relabel`` every state is tried in the role of state 1.
    """
    if not model.is_discrete:
        raise ModelError("cyclic centre search needs a discrete observation space")
    if max_cycle_len > MAX_CYCLE_LEN:
        raise GuardError(f"max_cycle_len {max_cycle_len} exceeds the guard {MAX_CYCLE_LEN}")
    if N < 2:
        raise ValueError("N must be at least 2")
    ar = get_arith(exact)
    symbols = range(1, model.n_symbols + 1)
    states = range(1, model.n_states + 1) if relabel else (1,)
    out = []
    for n in range(2, max_cycle_len + 1):
        for head in symbols:
            for mid in itertools.product(symbols, repeat=n - 2):
                cyc = (head,) + mid + (head,)
                p = segment_max(model, cyc, exact=exact).matrix
                for st in states:
                    c = _dominance(ar, p, st - 1)
                    if c is not None:
                        out.append(CenterCandidate(cyc, st, *c, N))
    return out


def _dominance(ar: Arith, p: np.ndarray, s: int):
    ny = p.shape[0]
    p11 = p[s, s]
    if ar.is_zero(p11):
        return None
    rest = [p[i, j] for i in range(ny) for j in range(ny) if (i, j) != (s, s)]
    if not all(ar.gt(p11, v) for v in rest):
        return None
    if rest:
        second = max(rest)
        if ar.exact:
            eps = float(1 - second / p11)
        else:
            eps = -math.expm1(second - p11)
    else:
        eps = 1.0
    others = [i for i in range(ny) if i != s]
    col = all(ar.gt(p11, p[i, s]) for i in others)
    row = all(ar.gt(p11, p[s, i]) for i in others)
    return eps, col, row


# ---------------------------------------------------------------------------
# randomised falsification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Counterexample:
    trial: int
    observations: tuple
    block_start: int  # 1-based position of b_1
    t: int
    order: int
    report: NodeReport


def _is_node(ar: Arith, model: PMM, obs, t: int, m: int, state, strong: bool) -> NodeReport:
    table = delta_forward(model, obs[:t], exact=ar.exact)
    seg = segment_product(ar, kernels(model, obs[t - 1:m], ar), model.n_states)
    nodes, strongs = node_states_from(ar, table.delta[t - 1], seg)
    return NodeReport(t, m - t, nodes, strongs)


def _holds(rep: NodeReport, state, strong: bool) -> bool:
    pool = rep.strong_states if strong else rep.node_states
    return bool(pool) if state is None else state in pool


def embed_check(model: PMM, prefix: Sequence, block: Sequence, suffix: Sequence, order: int,
                state: int | None = None, strong: bool = False, exact: bool = False):
    """Embed ``block`` after ``prefix`` and test for a node of the claimed order
    at ``t = u + M - order`` using ``x_{1:u+M+|suffix|}``."""
    ar = get_arith(exact)
    obs = list(prefix) + list(block) + list(suffix)
    t = len(prefix) + len(block) - order
    if t < 1:
        raise ValueError("order exceeds the embedded sequence")
    rep = _is_node(ar, model, obs, t, len(obs), state, strong)
    return _holds(rep, state, strong), rep, obs


def falsify_barrier(model: PMM, block: Sequence, order: int, trials: int, seed: int,
                    state: int | None = None, strong: bool = False, exact: bool = False,
                    max_prefix: int = 30, max_suffix: int = 10) -> Counterexample | None:
    """Search for an embedding of ``block`` where the claimed node fails.

    Trial ``k`` draws from ``SeedSequence([seed, k])``. Even trials use a
    simulated prefix, odd trials uniform random symbols (resampled from the
    model if that prefix has zero likelihood); suffixes are uniform. The
    lowest failing trial is returned, or ``None``.
    """
    if not model.is_discrete:
        raise ModelError("falsification needs a discrete model")
    if trials < 1:
        raise ValueError("trials must be positive")
    ar = get_arith(exact)
    block = [int(b) for b in block]
    n_x = model.n_symbols
    min_prefix = max(1, order - len(block) + 1)
    for k in range(trials):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, k])))
        u = int(rng.integers(min_prefix, max(min_prefix, max_prefix) + 1))
        s = int(rng.integers(0, max_suffix + 1))
        if k % 2 == 0:
            prefix = simulate(model, u, int(rng.integers(2 ** 63))).obs_list()
        else:
            prefix = [int(v) for v in rng.integers(1, n_x + 1, size=u)]
            if ar.is_zero(delta_forward(model, prefix, exact=exact).delta[-1].max()):
                prefix = simulate(model, u, int(rng.integers(2 ** 63))).obs_list()
        suffix = [int(v) for v in rng.integers(1, n_x + 1, size=s)]
        ok, rep, obs = embed_check(model, prefix, block, suffix, order, state, strong, exact)
        if not ok:
            return Counterexample(k, tuple(obs), u + 1, rep.t, order, rep)
    return None
