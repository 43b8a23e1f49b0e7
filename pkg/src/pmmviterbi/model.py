"""Pairwise Markov model specifications.

A model is anything that can produce, for a pair of consecutive
observations, the |Y| x |Y| matrix ``K[i, j] = q(x, j | x_prev, i)`` and, for
a first observation, the vector ``p(x_1, y_1 = j)``. States and discrete
observation symbols are labelled from 1 in every public signature; arrays
are indexed from 0.

Four families are supported:

``GenericDiscrete``
    an arbitrary joint kernel on a finite X x Y;
``Hmm``
    ``q(x, j | x', i) = p_ij f_j(x)`` with discrete or Gaussian emissions;
``DiscreteSwitching``
    ``q(x, j | x', i) = p_ij f_j(x | x')`` on a finite X;
``GaussianLinearSwitching``
    ``X_k = F(Y_k) X_{k-1} + xi_k(Y_k)`` with Gaussian noise.

Probabilities are stored as exact fractions (parsed from decimal or
rational strings) so discrete models support exact arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .arith import (
    FLOAT,
    NEG_INF,
    Arith,
    as_fraction,
    fraction_array,
    log_array,
)

ROW_SUM_TOL = 1e-12
LOG_2PI = math.log(2.0 * math.pi)


class ModelError(ValueError):
    """Invalid model specification."""


class SchemaError(ModelError):
    pass


class RowSumError(ModelError):
    def __init__(self, what: str, row, deviation: float):
        self.what = what
        self.row = row
        self.deviation = deviation
        super().__init__(f"{what}: row {row} sums to 1{deviation:+.3e}")


class CovarianceError(ModelError):
    pass


class ConstraintError(ModelError):
    def __init__(self, parameter: str, value, lower, upper):
        self.parameter = parameter
        self.value = value
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"{parameter}={value} outside its admissible interval [{lower}, {upper}]"
        )


@dataclass(frozen=True)
class ObservationSpace:
    kind: str  # "discrete" | "euclidean"
    size: int  # symbol count |X| or dimension d

    def __post_init__(self):
        if self.kind not in ("discrete", "euclidean"):
            raise ModelError(f"unknown observation space kind {self.kind!r}")
        if self.size < 1:
            raise ModelError("observation space must be non-empty")

    @property
    def discrete(self) -> bool:
        return self.kind == "discrete"


def _check_stochastic(what: str, rows: np.ndarray, labels=None) -> None:
    """Rows of an object array of Fractions must be probability vectors."""
    for r, row in enumerate(rows):
        label = labels[r] if labels is not None else r + 1
        for v in row:
            if v < 0 or v > 1:
                raise ModelError(f"{what}: row {label} has entry {v} outside [0, 1]")
        dev = float(sum(row, Fraction(0)) - 1)
        if abs(dev) > ROW_SUM_TOL:
            raise RowSumError(what, label, dev)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _cholesky(cov: np.ndarray, what: str) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise CovarianceError(f"{what}: covariance must be square")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
        raise CovarianceError(f"{what}: covariance is not symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(cov)
        raise CovarianceError(
            f"{what}: covariance is not positive definite (eigenvalues {eig.tolist()})"
        ) from None


class PMM:
    """Common interface shared by every model family."""

    n_states: int
    obs_space: ObservationSpace
    name: str = ""
    #: labels of states for transformed models (e.g. pairs after pairing)
    state_labels: tuple | None = None
    #: labels of discrete observation symbols for transformed models
    obs_labels: tuple | None = None

    @property
    def is_discrete(self) -> bool:
        return self.obs_space.discrete

    @property
    def supports_exact(self) -> bool:
        return self.is_discrete

    # -- densities ----------------------------------------------------------
    def kernel(self, x_prev, x, ar: Arith = FLOAT) -> np.ndarray:
        """Matrix ``K[i, j] = q(x, j | x_prev, i)`` in the weights of ``ar``."""
        raise NotImplementedError

    def initial(self, x, ar: Arith = FLOAT) -> np.ndarray:
        """Vector ``p(x_1 = x, y_1 = j)``."""
        raise NotImplementedError

    def check_obs(self, x):
        raise NotImplementedError

    def check_state(self, y: int) -> int:
        if not (1 <= int(y) <= self.n_states):
            raise ModelError(f"state {y} outside 1..{self.n_states}")
        return int(y) - 1

    # -- sampling -----------------------------------------------------------
    n_uniforms: int = 1

    def sample_initial(self, u: np.ndarray):
        """Draw ``(x_1, state index)`` from a block of uniforms."""
        raise NotImplementedError

    def sample_next(self, x_prev, y_prev: int, u: np.ndarray):
        """Draw ``(x, state index)`` given the previous pair (0-based state)."""
        raise NotImplementedError


def _inverse_cdf(cum: np.ndarray, u: float, positive: np.ndarray) -> int:
    k = int(np.searchsorted(cum, u, side="right"))
    if k >= len(cum) or not positive[k]:
        # u fell on float round-off past the last positive mass
        k = int(np.flatnonzero(positive)[-1])
    return k


class DiscretePMM(PMM):
    """Finite X x Y model backed by the full joint kernel table.

    ``table[x', y', x, y] = q(x, y | x', y')`` and ``init[x, y] = p(x, y)``,
    both 0-based object arrays of Fractions.
    """

    def _setup_tables(self, table: np.ndarray, init: np.ndarray) -> None:
        n_x, n_y = init.shape
        self.n_states = n_y
        self.obs_space = ObservationSpace("discrete", n_x)
        self._table = _frozen(table)
        self._init = _frozen(init)
        self._log_table = _frozen(log_array(table))
        self._log_init = _frozen(log_array(init))
        flat = np.array([[float(v) for v in table[a, b].ravel()]
                         for a in range(n_x) for b in range(n_y)])
        self._cum = np.cumsum(flat, axis=1).reshape(n_x, n_y, -1)
        self._pos = np.array([[v > 0 for v in table[a, b].ravel()]
                              for a in range(n_x) for b in range(n_y)]).reshape(n_x, n_y, -1)
        init_flat = np.array([float(v) for v in init.ravel()])
        self._init_cum = np.cumsum(init_flat)
        self._init_pos = np.array([v > 0 for v in init.ravel()])

    @property
    def n_symbols(self) -> int:
        return self.obs_space.size

    def check_obs(self, x) -> int:
        xi = int(x)
        if xi != x or not (1 <= xi <= self.n_symbols):
            raise ModelError(f"observation {x!r} outside symbols 1..{self.n_symbols}")
        return xi

    def kernel(self, x_prev, x, ar: Arith = FLOAT) -> np.ndarray:
        a, b = int(x_prev) - 1, int(x) - 1
        if ar.exact:
            return self._table[a, :, b, :]
        return self._log_table[a, :, b, :]

    def initial(self, x, ar: Arith = FLOAT) -> np.ndarray:
        b = int(x) - 1
        if ar.exact:
            return self._init[b, :]
        return self._log_init[b, :]

    def joint_table(self) -> np.ndarray:
        """Exact ``q[x', y', x, y]`` (0-based)."""
        return self._table

    def initial_table(self) -> np.ndarray:
        """Exact ``p[x, y]`` (0-based)."""
        return self._init

    def joint_matrix(self) -> tuple[list[tuple[int, int]], np.ndarray]:
        """Joint-state order ``[(x, y), ...]`` (1-based) and square kernel."""
        n_x, n_y = self.n_symbols, self.n_states
        order = [(x, y) for y in range(1, n_y + 1) for x in range(1, n_x + 1)]
        m = np.empty((len(order), len(order)), dtype=object)
        for r, (xp, yp) in enumerate(order):
            for c, (x, y) in enumerate(order):
                m[r, c] = self._table[xp - 1, yp - 1, x - 1, y - 1]
        return order, m

    n_uniforms = 1

    def sample_initial(self, u):
        k = _inverse_cdf(self._init_cum, u[0], self._init_pos)
        x, y = divmod(k, self.n_states)
        return x + 1, y

    def sample_next(self, x_prev, y_prev, u):
        a = int(x_prev) - 1
        k = _inverse_cdf(self._cum[a, y_prev], u[0], self._pos[a, y_prev])
        x, y = divmod(k, self.n_states)
        return x + 1, y


class GenericDiscrete(DiscretePMM):
    """Arbitrary kernel on X x Y.

    ``kernel[x', y', x, y]`` and ``initial[x, y]`` use 0-based indices; use
    :func:`generic_from_joint` to build one from a square joint matrix.
    """

    family = "generic_discrete"

    def __init__(self, kernel, initial, name: str = ""):
        table = fraction_array(kernel)
        init = fraction_array(initial)
        if table.ndim != 4 or init.ndim != 2:
            raise SchemaError("kernel must be 4-d (x', y', x, y) and initial 2-d (x, y)")
        n_x, n_y = init.shape
        if table.shape != (n_x, n_y, n_x, n_y):
            raise SchemaError(f"kernel shape {table.shape} does not match initial {init.shape}")
        rows = table.reshape(n_x * n_y, n_x * n_y)
        labels = [(x + 1, y + 1) for x in range(n_x) for y in range(n_y)]
        _check_stochastic("kernel", rows, labels)
        _check_stochastic("initial", init.reshape(1, -1), ["(x1, y1)"])
        self.name = name
        self._setup_tables(table, init)


def generic_from_joint(order: Sequence[tuple[int, int]], matrix, initial, name: str = "",
                       n_obs: int | None = None, n_states: int | None = None) -> GenericDiscrete:
    """Build a :class:`GenericDiscrete` from a joint-state transition matrix.

    ``order`` lists 1-based ``(x, y)`` pairs labelling rows/columns of
    ``matrix``; ``initial`` is a vector in the same order. Pairs absent from
    ``order`` get a zero initial mass and, as previous states, a kernel row
    equal to the first listed row (they are never visited).
    """
    order = [(int(x), int(y)) for x, y in order]
    if len(set(order)) != len(order):
        raise SchemaError("joint_states contains duplicates")
    n_x = n_obs or max(x for x, _ in order)
    n_y = n_states or max(y for _, y in order)
    m = fraction_array(matrix)
    v = fraction_array(initial)
    k = len(order)
    if m.shape != (k, k) or v.shape != (k,):
        raise SchemaError(f"kernel must be {k}x{k} and initial length {k}")
    _check_stochastic("kernel", m, order)
    table = np.empty((n_x, n_y, n_x, n_y), dtype=object)
    table.fill(Fraction(0))
    init = np.empty((n_x, n_y), dtype=object)
    init.fill(Fraction(0))
    filled = set()
    for r, (xp, yp) in enumerate(order):
        for c, (x, y) in enumerate(order):
            table[xp - 1, yp - 1, x - 1, y - 1] = m[r, c]
        init[xp - 1, yp - 1] = v[r]
        filled.add((xp, yp))
    for xp, yp in itertools.product(range(1, n_x + 1), range(1, n_y + 1)):
        if (xp, yp) not in filled:
            table[xp - 1, yp - 1] = table[order[0][0] - 1, order[0][1] - 1]
    return GenericDiscrete(table, init, name=name)


class Hmm(PMM):
    """Hidden Markov model ``q(x, j | x', i) = p_ij f_j(x)``.

    Give either ``emissions`` (|Y| x |X| probabilities) or ``gaussian`` as
    ``(means, covariances)``.
    """

    family = "hmm"

    def __init__(self, transitions, initial_hidden, emissions=None, gaussian=None,
                 name: str = ""):
        self.name = name
        self.transitions = _frozen(fraction_array(transitions))
        self.initial_hidden = _frozen(fraction_array(initial_hidden))
        n_y = self.transitions.shape[0]
        if self.transitions.shape != (n_y, n_y) or self.initial_hidden.shape != (n_y,):
            raise SchemaError("transitions must be square and initial_hidden match it")
        _check_stochastic("transitions", self.transitions)
        _check_stochastic("initial_hidden", self.initial_hidden.reshape(1, -1), ["(y1)"])
        if (emissions is None) == (gaussian is None):
            raise SchemaError("exactly one of emissions / gaussian emissions is required")
        self.n_states = n_y
        if emissions is not None:
            self.emissions = _frozen(fraction_array(emissions))
            if self.emissions.ndim != 2 or self.emissions.shape[0] != n_y:
                raise SchemaError("emissions must be |Y| x |X|")
            _check_stochastic("emissions", self.emissions)
            self.gaussian = None
            self._discrete = _HmmTables(self)
            self.obs_space = self._discrete.obs_space
        else:
            means, covs = gaussian
            means = np.atleast_2d(np.asarray(means, dtype=float))
            if means.shape[0] != n_y:
                means = means.reshape(n_y, -1)
            d = means.shape[1]
            self.emissions = None
            self.gaussian = (means, np.asarray(covs, dtype=float).reshape(n_y, d, d))
            self._gls = GaussianLinearSwitching(
                self.transitions, np.zeros((n_y, d, d)), means, self.gaussian[1],
                initial_hidden=self.initial_hidden,
                initial_means=means, initial_covariances=self.gaussian[1])
            self.obs_space = self._gls.obs_space

    @property
    def _impl(self) -> PMM:
        return self._discrete if self.emissions is not None else self._gls

    def as_linear_switching(self) -> "GaussianLinearSwitching":
        if self.gaussian is None:
            raise ModelError("HMM has discrete emissions")
        return self._gls

    def kernel(self, x_prev, x, ar: Arith = FLOAT):
        return self._impl.kernel(x_prev, x, ar)

    def initial(self, x, ar: Arith = FLOAT):
        return self._impl.initial(x, ar)

    def check_obs(self, x):
        return self._impl.check_obs(x)

    @property
    def n_uniforms(self):
        return self._impl.n_uniforms

    def sample_initial(self, u):
        return self._impl.sample_initial(u)

    def sample_next(self, x_prev, y_prev, u):
        return self._impl.sample_next(x_prev, y_prev, u)

    @property
    def n_symbols(self) -> int:
        return self.obs_space.size

    def joint_table(self):
        return self._discrete.joint_table()

    def initial_table(self):
        return self._discrete.initial_table()

    def joint_matrix(self):
        return self._discrete.joint_matrix()


class _HmmTables(DiscretePMM):
    def __init__(self, hmm: Hmm):
        p, e, pi = hmm.transitions, hmm.emissions, hmm.initial_hidden
        n_y, n_x = e.shape
        table = np.empty((n_x, n_y, n_x, n_y), dtype=object)
        for a, i, b, j in itertools.product(range(n_x), range(n_y), range(n_x), range(n_y)):
            table[a, i, b, j] = p[i, j] * e[j, b]
        init = np.empty((n_x, n_y), dtype=object)
        for b, j in itertools.product(range(n_x), range(n_y)):
            init[b, j] = pi[j] * e[j, b]
        self._setup_tables(table, init)


class DiscreteSwitching(DiscretePMM):
    """Markov switching model on a finite X: ``q(x, j | x', i) = p_ij f_j(x | x')``.

    ``emissions[j][x'][x]`` and ``initial[x][y]`` are 0-based.
    """

    family = "discrete_switching"

    def __init__(self, transitions, emissions, initial, name: str = ""):
        self.name = name
        self.transitions = _frozen(fraction_array(transitions))
        self.emissions = _frozen(fraction_array(emissions))
        n_y = self.transitions.shape[0]
        if self.transitions.shape != (n_y, n_y):
            raise SchemaError("transitions must be square")
        if self.emissions.ndim != 3 or self.emissions.shape[0] != n_y \
                or self.emissions.shape[1] != self.emissions.shape[2]:
            raise SchemaError("emissions must be |Y| x |X| x |X|")
        n_x = self.emissions.shape[1]
        _check_stochastic("transitions", self.transitions)
        for j in range(n_y):
            _check_stochastic(f"emissions[state {j + 1}]", self.emissions[j])
        init = fraction_array(initial)
        if init.shape != (n_x, n_y):
            raise SchemaError("initial must be |X| x |Y|")
        _check_stochastic("initial", init.reshape(1, -1), ["(x1, y1)"])
        table = np.empty((n_x, n_y, n_x, n_y), dtype=object)
        for a, i, b, j in itertools.product(range(n_x), range(n_y), range(n_x), range(n_y)):
            table[a, i, b, j] = self.transitions[i, j] * self.emissions[j, a, b]
        self._setup_tables(table, init)


class GaussianLinearSwitching(PMM):
    """``X_k = F(Y_k) X_{k-1} + xi_k(Y_k)``, ``xi(j) ~ N(means[j], covariances[j])``.

    The law of ``X_1`` given ``Y_1 = j`` is ``N(initial_means[j],
    initial_covariances[j])``; both default to the standard normal.
    """

    family = "gaussian_linear_switching"
    n_uniforms: int

    def __init__(self, transitions, F, means, covariances, initial_hidden=None,
                 initial_means=None, initial_covariances=None, name: str = ""):
        self.name = name
        self.transitions = _frozen(fraction_array(transitions))
        n_y = self.transitions.shape[0]
        if self.transitions.shape != (n_y, n_y):
            raise SchemaError("transitions must be square")
        _check_stochastic("transitions", self.transitions)
        means = np.asarray(means, dtype=float)
        if means.ndim == 1:
            means = means.reshape(n_y, -1)
        d = means.shape[1]
        self.dim = d
        self.F = _frozen(np.asarray(F, dtype=float).reshape(n_y, d, d))
        self.means = _frozen(means.reshape(n_y, d))
        self.covariances = _frozen(np.asarray(covariances, dtype=float).reshape(n_y, d, d))
        if initial_hidden is None:
            initial_hidden = [Fraction(1, n_y)] * n_y
        self.initial_hidden = _frozen(fraction_array(initial_hidden))
        _check_stochastic("initial_hidden", self.initial_hidden.reshape(1, -1), ["(y1)"])
        if initial_means is None:
            initial_means = np.zeros((n_y, d))
        if initial_covariances is None:
            initial_covariances = np.broadcast_to(np.eye(d), (n_y, d, d))
        self.initial_means = _frozen(np.asarray(initial_means, dtype=float).reshape(n_y, d).copy())
        self.initial_covariances = _frozen(
            np.asarray(initial_covariances, dtype=float).reshape(n_y, d, d).copy())
        self.n_states = n_y
        self.obs_space = ObservationSpace("euclidean", d)
        self._chol = np.stack([_cholesky(c, f"covariance of state {j + 1}")
                               for j, c in enumerate(self.covariances)])
        self._init_chol = np.stack([_cholesky(c, f"initial covariance of state {j + 1}")
                                    for j, c in enumerate(self.initial_covariances)])
        self._logdet = 2.0 * np.log(np.diagonal(self._chol, axis1=1, axis2=2)).sum(axis=1)
        self._init_logdet = 2.0 * np.log(np.diagonal(self._init_chol, axis1=1, axis2=2)).sum(axis=1)
        self._log_p = log_array(self.transitions)
        self._log_pi = log_array(self.initial_hidden)
        p_float = np.array([[float(v) for v in row] for row in self.transitions])
        self._p_cum = np.cumsum(p_float, axis=1)
        self._p_pos = p_float > 0
        pi = np.array([float(v) for v in self.initial_hidden])
        self._pi_cum = np.cumsum(pi)
        self._pi_pos = pi > 0
        self._chol_inv = np.linalg.inv(self._chol)
        self._init_chol_inv = np.linalg.inv(self._init_chol)
        self.n_uniforms = 1 + 2 * ((d + 1) // 2)

    @property
    def supports_exact(self) -> bool:
        return False

    def check_obs(self, x) -> np.ndarray:
        v = np.asarray(x, dtype=float).reshape(-1)
        if v.shape != (self.dim,):
            raise ModelError(f"observation of dimension {v.size}, model has d={self.dim}")
        return v

    def _gauss_logpdf(self, resid: np.ndarray, chol_inv, logdet) -> np.ndarray:
        # resid: (Y, d) -> (Y,)
        z = np.einsum("jab,jb->ja", chol_inv, resid)
        return -0.5 * (self.dim * LOG_2PI + logdet + (z * z).sum(axis=1))

    def noise_logpdf(self, x, x_prev) -> np.ndarray:
        """``log h_j(x - F(j) x_prev)`` for every state j."""
        x = self.check_obs(x)
        xp = self.check_obs(x_prev)
        resid = x[None, :] - np.einsum("jab,b->ja", self.F, xp) - self.means
        return self._gauss_logpdf(resid, self._chol_inv, self._logdet)

    def kernel(self, x_prev, x, ar: Arith = FLOAT):
        if ar.exact:
            raise ModelError("exact arithmetic is not available for Gaussian models")
        return self._log_p + self.noise_logpdf(x, x_prev)[None, :]

    def initial(self, x, ar: Arith = FLOAT):
        if ar.exact:
            raise ModelError("exact arithmetic is not available for Gaussian models")
        x = self.check_obs(x)
        resid = x[None, :] - self.initial_means
        return self._log_pi + self._gauss_logpdf(resid, self._init_chol_inv, self._init_logdet)

    def _normals(self, u: np.ndarray) -> np.ndarray:
        # Box-Muller on consecutive uniform pairs; 1 - u keeps the log finite
        out = []
        for a, b in zip(u[0::2], u[1::2]):
            rad = math.sqrt(-2.0 * math.log(1.0 - a))
            out.append(rad * math.cos(2.0 * math.pi * b))
            out.append(rad * math.sin(2.0 * math.pi * b))
        return np.array(out[: self.dim])

    def sample_initial(self, u):
        y = _inverse_cdf(self._pi_cum, u[0], self._pi_pos)
        x = self.initial_means[y] + self._init_chol[y] @ self._normals(u[1:])
        return x, y

    def sample_next(self, x_prev, y_prev, u):
        y = _inverse_cdf(self._p_cum[y_prev], u[0], self._p_pos[y_prev])
        xi = self.means[y] + self._chol[y] @ self._normals(u[1:])
        return self.F[y] @ np.asarray(x_prev, dtype=float) + xi, y


# ---------------------------------------------------------------------------
# constructors and transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoStatePmmParams:
    p: Fraction
    q: Fraction
    lambda1: Fraction
    lambda2: Fraction
    mu1: Fraction
    mu2: Fraction

    @classmethod
    def of(cls, p, q, lambda1, lambda2, mu1, mu2) -> "TwoStatePmmParams":
        return cls(*(as_fraction(v) for v in (p, q, lambda1, lambda2, mu1, mu2)))

    def intervals(self) -> dict[str, tuple[Fraction, Fraction]]:
        p, q = self.p, self.q
        return {
            "lambda1": (max((2 * p - 1) / p, Fraction(0)), Fraction(1)),
            "lambda2": (max((q + p - 1) / p, Fraction(0)), min(q / p, Fraction(1))),
            "mu1": (max((p + q - 1) / q, Fraction(0)), min(p / q, Fraction(1))),
            "mu2": (max((2 * q - 1) / q, Fraction(0)), Fraction(1)),
        }

    def validate(self) -> None:
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (0 < v < 1):
                raise ConstraintError(name, v, 0, 1)
        for name, (lo, hi) in self.intervals().items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ConstraintError(name, v, lo, hi)


#: joint-state order of the two-state PMM matrix, as (x, y)
TWO_STATE_ORDER = [(1, 1), (1, 2), (2, 1), (2, 2)]


def two_state_matrix(params: TwoStatePmmParams) -> np.ndarray:
    """The 4 x 4 transition matrix of Z in the order of ``TWO_STATE_ORDER``."""
    p, q = params.p, params.q
    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2
    rows = [
        [p * l1, p * (1 - l1), p * (1 - l1), 1 + p * l1 - 2 * p],
        [p * l2, p * (1 - l2), q - p * l2, 1 + p * l2 - q - p],
        [q * m1, q * (1 - m1), p - q * m1, 1 + q * m1 - p - q],
        [q * m2, q * (1 - m2), q * (1 - m2), 1 + q * m2 - 2 * q],
    ]
    return fraction_array(rows)


def build_two_state_pmm(params: TwoStatePmmParams, initial=None,
                        name: str = "two-state PMM") -> GenericDiscrete:
    """Two-state PMM on X = Y = {1, 2} whose marginals share the matrix
    ``[[p, 1-p], [q, 1-q]]``. The initial law defaults to uniform."""
    params.validate()
    if initial is None:
        initial = [Fraction(1, 4)] * 4
    return generic_from_joint(TWO_STATE_ORDER, two_state_matrix(params), initial,
                              name=name, n_obs=2, n_states=2)


def kernel_log_density(model: PMM, z_prev, z_next) -> float:
    """``log q(z_next | z_prev)`` for 1-based ``(obs, state)`` pairs."""
    (x_prev, y_prev), (x, y) = z_prev, z_next
    i, j = model.check_state(y_prev), model.check_state(y)
    model.check_obs(x_prev)
    model.check_obs(x)
    return float(model.kernel(x_prev, x)[i, j])


def initial_log_density(model: PMM, z) -> float:
    x, y = z
    j = model.check_state(y)
    model.check_obs(x)
    return float(model.initial(x)[j])


def path_log_likelihood(model: PMM, obs, path, include_initial: bool = True) -> float:
    """Log-likelihood of a fixed hidden path, summed with ``math.fsum``."""
    terms = []
    if include_initial:
        terms.append(float(model.initial(obs[0])[path[0] - 1]))
    for t in range(1, len(obs)):
        terms.append(float(model.kernel(obs[t - 1], obs[t])[path[t - 1] - 1, path[t] - 1]))
    if any(v == NEG_INF for v in terms):
        return NEG_INF
    return math.fsum(terms)


def path_weight_exact(model: PMM, obs, path, include_initial: bool = True) -> Fraction:
    from .arith import EXACT
    w = Fraction(1)
    if include_initial:
        w *= model.initial(obs[0], EXACT)[path[0] - 1]
    for t in range(1, len(obs)):
        w *= model.kernel(obs[t - 1], obs[t], EXACT)[path[t - 1] - 1, path[t] - 1]
    return w


def _pair_states(positive) -> list[tuple[int, int]]:
    n = positive.shape[0]
    return [(i + 1, j + 1) for i in range(n) for j in range(n) if positive[i, j]]


def pair_model(model: PMM) -> PMM:
    """Group consecutive time steps into pairs.

    The paired chain has observations ``(X_{2k-1}, X_{2k})`` and hidden
    states ``(Y_{2k-1}, Y_{2k})`` restricted to pairs that can occur. Paired
    discrete symbols are numbered ``(a - 1) * |X| + b``; see ``obs_labels``.
    """
    if isinstance(model, Hmm) and model.gaussian is not None:
        return pair_model(model.as_linear_switching())
    if isinstance(model, Hmm):
        return _pair_hmm(model)
    if isinstance(model, GaussianLinearSwitching):
        return _pair_gls(model)
    if isinstance(model, DiscretePMM):
        return _pair_generic(model)
    raise ModelError(f"pairing not supported for {type(model).__name__}")


def _pair_transitions(p: np.ndarray, states) -> np.ndarray:
    out = np.empty((len(states), len(states)), dtype=object)
    for r, (_, j) in enumerate(states):
        for c, (k, l) in enumerate(states):
            out[r, c] = p[j - 1, k - 1] * p[k - 1, l - 1]
    return out


def _pair_hmm(model: Hmm) -> Hmm:
    p, e = model.transitions, model.emissions
    states = _pair_states(p > 0)
    n_x = e.shape[1]
    obs_labels = tuple((a, b) for a in range(1, n_x + 1) for b in range(1, n_x + 1))
    em = np.empty((len(states), n_x * n_x), dtype=object)
    for s, (i, j) in enumerate(states):
        for o, (a, b) in enumerate(obs_labels):
            em[s, o] = e[i - 1, a - 1] * e[j - 1, b - 1]
    pi = model.initial_hidden
    init = np.array([pi[i - 1] * p[i - 1, j - 1] for i, j in states], dtype=object)
    out = Hmm(_pair_transitions(p, states), init, emissions=em,
              name=f"paired {model.name}".strip())
    out.state_labels = tuple(states)
    out.obs_labels = obs_labels
    return out


def _pair_generic(model: DiscretePMM) -> GenericDiscrete:
    table, init = model.joint_table(), model.initial_table()
    n_x, n_y = model.n_symbols, model.n_states
    reach = np.zeros((n_y, n_y), dtype=bool)
    for a, i, b, j in itertools.product(range(n_x), range(n_y), range(n_x), range(n_y)):
        if table[a, i, b, j] > 0:
            reach[i, j] = True
    states = _pair_states(reach)
    obs_labels = tuple((a, b) for a in range(1, n_x + 1) for b in range(1, n_x + 1))
    n_o, n_s = len(obs_labels), len(states)
    new = np.empty((n_o, n_s, n_o, n_s), dtype=object)
    for (o1, (x1, x2)), (s1, (y1, y2)) in itertools.product(enumerate(obs_labels), enumerate(states)):
        for (o2, (x3, x4)), (s2, (y3, y4)) in itertools.product(enumerate(obs_labels), enumerate(states)):
            new[o1, s1, o2, s2] = (table[x2 - 1, y2 - 1, x3 - 1, y3 - 1]
                                   * table[x3 - 1, y3 - 1, x4 - 1, y4 - 1])
    new_init = np.empty((n_o, n_s), dtype=object)
    for (o, (x1, x2)), (s, (y1, y2)) in itertools.product(enumerate(obs_labels), enumerate(states)):
        new_init[o, s] = init[x1 - 1, y1 - 1] * table[x1 - 1, y1 - 1, x2 - 1, y2 - 1]
    out = GenericDiscrete(new, new_init, name=f"paired {model.name}".strip())
    out.state_labels = tuple(states)
    out.obs_labels = obs_labels
    return out


def _pair_gls(model: GaussianLinearSwitching) -> GaussianLinearSwitching:
    p = model.transitions
    states = _pair_states(p > 0)
    d = model.dim
    eye, zero = np.eye(d), np.zeros((d, d))
    F2, mu2, cov2, init_mu, init_cov = [], [], [], [], []
    pi = model.initial_hidden
    init_w = []
    for i, j in states:
        Fi, Fj = model.F[i - 1], model.F[j - 1]
        F2.append(np.block([[zero, Fi], [zero, Fj @ Fi]]))
        mi, mj = model.means[i - 1], model.means[j - 1]
        mu2.append(np.concatenate([mi, Fj @ mi + mj]))
        B = np.block([[eye, zero], [Fj, eye]])
        D = np.block([[model.covariances[i - 1], zero], [zero, model.covariances[j - 1]]])
        cov2.append(B @ D @ B.T)
        # (X_1, X_2) given (Y_1, Y_2) = (i, j)
        m0, S0 = model.initial_means[i - 1], model.initial_covariances[i - 1]
        init_mu.append(np.concatenate([m0, Fj @ m0 + mj]))
        init_cov.append(np.block([[S0, S0 @ Fj.T],
                                  [Fj @ S0, Fj @ S0 @ Fj.T + model.covariances[j - 1]]]))
        init_w.append(pi[i - 1] * p[i - 1, j - 1])
    out = GaussianLinearSwitching(_pair_transitions(p, states), np.array(F2), np.array(mu2),
                                  np.array(cov2), initial_hidden=init_w,
                                  initial_means=np.array(init_mu),
                                  initial_covariances=np.array(init_cov),
                                  name=f"paired {model.name}".strip())
    out.state_labels = tuple(states)
    return out


def pair_observations(model: PMM, obs) -> list:
    """Map a length-2n observation sequence onto the paired model's symbols."""
    if len(obs) % 2:
        raise ValueError("paired decoding needs an even number of observations")
    if model.is_discrete:
        n_x = model.obs_space.size
        return [(int(obs[2 * k]) - 1) * n_x + int(obs[2 * k + 1]) for k in range(len(obs) // 2)]
    return [np.concatenate([np.atleast_1d(obs[2 * k]), np.atleast_1d(obs[2 * k + 1])])
            for k in range(len(obs) // 2)]
