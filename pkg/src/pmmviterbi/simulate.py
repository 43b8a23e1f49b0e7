"""Seeded trajectory sampling.

Randomness comes from numpy's PCG64 seeded with the user seed. Step ``k``
(0-based) consumes uniforms ``k * B .. k * B + B - 1`` of the stream where
``B = model.n_uniforms``: the first picks the joint (or hidden) move by
inverse CDF and the rest feed Box-Muller pairs for Gaussian noise. The
stream is drawn in fixed-size chunks, which does not change the values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PMM

CHUNK = 4096


@dataclass(frozen=True)
class Trajectory:
    observations: np.ndarray  # (n,) ints for discrete X, (n, d) floats otherwise
    hidden: np.ndarray  # (n,) 1-based state labels

    def __len__(self) -> int:
        return len(self.hidden)

    def obs_list(self) -> list:
        if self.observations.ndim == 1:
            return [int(v) for v in self.observations]
        return list(self.observations)


def uniform_stream(seed: int, width: int):
    """Yield rows of ``width`` uniforms in [0, 1), one row per time step."""
    rng = np.random.Generator(np.random.PCG64(seed))
    while True:
        block = rng.random((CHUNK, width))
        yield from block


def simulate(model: PMM, steps: int, seed: int) -> Trajectory:
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    rows = uniform_stream(seed, model.n_uniforms)
    hidden = np.empty(steps, dtype=np.int64)
    if model.is_discrete:
        obs = np.empty(steps, dtype=np.int64)
    else:
        obs = np.empty((steps, model.obs_space.size), dtype=float)
    x, y = model.sample_initial(next(rows))
    obs[0], hidden[0] = x, y + 1
    for k in range(1, steps):
        x, y = model.sample_next(x, y, next(rows))
        obs[k], hidden[k] = x, y + 1
    return Trajectory(obs, hidden)
