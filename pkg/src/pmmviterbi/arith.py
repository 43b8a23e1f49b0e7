"""Weight arithmetic for max-product dynamic programming.

Two interchangeable number systems are used throughout the package:

* ``FLOAT`` -- log-domain floats. Zero probability is ``-inf``, products are
  sums and the comparison helpers apply fixed absolute tolerances.
* ``EXACT`` -- probabilities as :class:`fractions.Fraction` held in numpy
  object arrays. Products are exact and comparisons are exact.

Every routine that maximises over paths takes one of these objects and never
inspects the representation directly.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

NEG_INF = -math.inf

#: two log weights closer than this are treated as equal (ties)
EQ_TOL = 1e-12
#: a log-domain inequality is strict only when the margin exceeds this
STRICT_TOL = 1e-10


def as_fraction(value) -> Fraction:
    """Parse a probability given as a decimal string, rational string, int,
    float or Fraction. Floats go through ``repr`` so ``0.8`` becomes 4/5."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a probability")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite probability {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a probability")


def fraction_log(value: Fraction) -> float:
    """Natural log of a non-negative rational, robust to huge numerators."""
    if value < 0:
        raise ValueError("log of negative weight")
    if value == 0:
        return NEG_INF
    return math.log(value.numerator) - math.log(value.denominator)


def fraction_array(values) -> np.ndarray:
    """Object array of Fractions with the shape of ``values``."""
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = as_fraction(arr[idx])
    return out


def log_array(fractions: np.ndarray) -> np.ndarray:
    """Float log-domain copy of an object array of Fractions."""
    out = np.empty(fractions.shape, dtype=float)
    for idx in np.ndindex(fractions.shape):
        out[idx] = fraction_log(fractions[idx])
    return out


class Arith:
    """Semiring operations plus tolerant comparisons; see module docstring."""

    exact: bool
    name: str

    def zeros(self, shape) -> np.ndarray:
        raise NotImplementedError

    def ones(self, shape) -> np.ndarray:
        raise NotImplementedError

    # --- semiring -----------------------------------------------------------
    def mul(self, a, b):
        raise NotImplementedError

    def identity(self, n: int) -> np.ndarray:
        """Max-plus identity: one on the diagonal, zero elsewhere."""
        out = self.zeros((n, n))
        for i in range(n):
            out[i, i] = self.one
        return out

    def matprod(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """C[i, j] = max_k a[i, k] * b[k, j] in the max-product semiring."""
        return self.mul(a[:, :, None], b[None, :, :]).max(axis=1)

    def vecmat(self, v: np.ndarray, m: np.ndarray) -> np.ndarray:
        return self.mul(v[:, None], m).max(axis=0)

    # --- comparisons --------------------------------------------------------
    def is_zero(self, a) -> bool:
        raise NotImplementedError

    def eq(self, a, b) -> bool:
        raise NotImplementedError

    def ge(self, a, b) -> bool:
        """Non-strict ``a >= b`` (ties allowed)."""
        raise NotImplementedError

    def gt(self, a, b) -> bool:
        """Strict ``a > b`` beyond the strictness threshold."""
        raise NotImplementedError

    def to_log(self, a) -> float:
        raise NotImplementedError

    def margin(self, a, b) -> float:
        """log(a) - log(b) as a float, with inf conventions for zeros."""
        la, lb = self.to_log(a), self.to_log(b)
        if la == NEG_INF and lb == NEG_INF:
            return 0.0
        return la - lb

    def tied(self, values, best) -> list[int]:
        return [k for k, v in enumerate(values) if self.eq(v, best)]

    def __repr__(self) -> str:
        return f"<Arith {self.name}>"


class _FloatArith(Arith):
    exact = False
    name = "float"
    one = 0.0
    zero = NEG_INF

    def zeros(self, shape):
        return np.full(shape, NEG_INF)

    def ones(self, shape):
        return np.zeros(shape)

    def mul(self, a, b):
        return a + b

    def is_zero(self, a):
        return a == NEG_INF

    def eq(self, a, b):
        if a == b:
            return True
        return abs(a - b) <= EQ_TOL

    def ge(self, a, b):
        return a >= b - EQ_TOL

    def gt(self, a, b):
        if a == NEG_INF:
            return False
        return a > b + STRICT_TOL

    def to_log(self, a):
        return float(a)


class _ExactArith(Arith):
    exact = True
    name = "exact"
    one = Fraction(1)
    zero = Fraction(0)

    def zeros(self, shape):
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out

    def ones(self, shape):
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(1))
        return out

    def mul(self, a, b):
        return a * b

    def is_zero(self, a):
        return a == 0

    def eq(self, a, b):
        return a == b

    def ge(self, a, b):
        return a >= b

    def gt(self, a, b):
        return a > b

    def to_log(self, a):
        return fraction_log(a)


FLOAT: Arith = _FloatArith()
EXACT: Arith = _ExactArith()


def get_arith(exact: bool) -> Arith:
    return EXACT if exact else FLOAT


class CompensatedSum:
    """Running float sum with Neumaier compensation."""

    __slots__ = ("total", "_comp")

    def __init__(self, start: float = 0.0):
        self.total = float(start)
        self._comp = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if not math.isfinite(t):
            self.total, self._comp = t, 0.0
            return
        if abs(self.total) >= abs(x):
            self._comp += (self.total - t) + x
        else:
            self._comp += (x - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        if not math.isfinite(self.total):
            return self.total
        return self.total + self._comp
