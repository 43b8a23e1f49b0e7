"""Shared generators for the test suite."""

from fractions import Fraction

import numpy as np

from pmmviterbi.model import GenericDiscrete


def random_rows(rng, n_rows, width, zero_prob=0.3, top=3):
    """Rows of small-denominator probabilities, some entries zero."""
    out = []
    for _ in range(n_rows):
        w = rng.integers(0, top + 1, size=width)
        w[rng.random(width) < zero_prob] = 0
        if w.sum() == 0:
            w[rng.integers(width)] = 1
        s = int(w.sum())
        out.append([Fraction(int(v), s) for v in w])
    return out


def random_generic(rng, n_states=None, n_obs=None, zero_prob=0.3, top=3):
    ny = n_states or int(rng.integers(1, 5))
    nx = n_obs or int(rng.integers(1, 4))
    rows = random_rows(rng, nx * ny, nx * ny, zero_prob, top)
    kernel = np.array(rows, dtype=object).reshape(nx, ny, nx, ny)
    init = np.array(random_rows(rng, 1, nx * ny, zero_prob, top)[0], dtype=object).reshape(nx, ny)
    return GenericDiscrete(kernel, init, name="random")


def random_obs(rng, model, n):
    return [int(v) for v in rng.integers(1, model.n_symbols + 1, size=n)]


def colex_key(path):
    return tuple(reversed(path))
