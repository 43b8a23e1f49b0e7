"""Streaming piecewise Viterbi decoding.

After each observation ``x_m`` the decoder tests whether ``t = m - r`` is a
node of order ``r``. When it is (and is far enough from the previous commit)
the piece of the path between the previous committed node and ``t`` is
solved with both ends pinned and emitted; it never changes afterwards.
``flush`` returns the best continuation from the last committed node, which
is provisional.

Consecutive commits may pin different states; the piece between them is then
pinned at the earlier node's state on the left and the new one on the right.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .arith import NEG_INF, Arith, CompensatedSum, get_arith
from .dp import LEX, TieRule, constrained_path, _require_exact
from .model import PMM, path_log_likelihood
from .nodes import node_states_from


class ZeroLikelihoodError(RuntimeError):
    """Every hidden path of the stream so far has zero probability."""

    def __init__(self, t: int):
        self.t = t
        super().__init__(f"zero-likelihood stream: all delta entries vanish at t={t}")


class BufferFull(RuntimeError):
    """The uncommitted buffer reached ``max_buffer`` under the blocking policy."""


@dataclass(frozen=True)
class DecoderConfig:
    order: int = 1
    separation: int | None = None  # defaults to the order
    tie: TieRule = LEX
    require_strong: bool = False
    max_buffer: int | None = None
    overflow: str = "block"  # "block" | "force"
    exact: bool = False

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.separation is not None and self.separation < 0:
            raise ValueError("separation must be non-negative")
        if self.overflow not in ("block", "force"):
            raise ValueError("overflow must be 'block' or 'force'")
        if self.max_buffer is not None and self.max_buffer <= self.order:
            raise ValueError("max_buffer must exceed the order")

    @property
    def gap(self) -> int:
        return self.order if self.separation is None else self.separation


@dataclass
class Diagnostics:
    observations: int = 0
    nodes_seen: int = 0
    commits: int = 0
    forced_commits: int = 0
    committed_length: int = 0
    buffer_high_water: int = 0
    last_node: tuple | None = None  # (time, state)
    commit_times: list = field(default_factory=list)
    conforming: bool = True


class _SlidingProduct:
    """Max-product of the last few kernel matrices via two stacks."""

    def __init__(self, ar: Arith, n_states: int):
        self.ar = ar
        self.eye = ar.identity(n_states)
        self.front: list = []  # (element, product of it and all newer front items)
        self.back: list = []
        self.back_agg = self.eye

    def __len__(self) -> int:
        return len(self.front) + len(self.back)

    def push(self, m: np.ndarray) -> None:
        self.back.append(m)
        self.back_agg = self.ar.matprod(self.back_agg, m)

    def pop(self) -> None:
        if not self.front:
            agg = self.eye
            for m in reversed(self.back):
                agg = self.ar.matprod(m, agg)
                self.front.append((m, agg))
            self.back = []
            self.back_agg = self.eye
        self.front.pop()

    def clear(self) -> None:
        self.front, self.back, self.back_agg = [], [], self.eye

    def product(self) -> np.ndarray:
        if not self.front:
            return self.back_agg
        return self.ar.matprod(self.front[-1][1], self.back_agg)


class OnlineDecoder:
    def __init__(self, model: PMM, config: DecoderConfig = DecoderConfig()):
        self.model = model
        self.config = config
        self.ar = get_arith(config.exact)
        _require_exact(model, self.ar)
        self.m = 0
        self._prev_obs = None
        self._deltas: deque = deque(maxlen=config.order + 1)
        self._window = _SlidingProduct(self.ar, model.n_states)
        # observations from the last committed node (inclusive) to m
        self._buffer: list = []
        self._buffer_start = 1
        self._last: tuple[int, int] | None = None  # (time, 0-based state)
        self._committed: list[int] = []
        self._loglik = CompensatedSum()
        self._dead: ZeroLikelihoodError | None = None
        self.diagnostics = Diagnostics()

    # -- views ---------------------------------------------------------------
    @property
    def committed(self) -> tuple[int, ...]:
        return tuple(self._committed)

    @property
    def committed_loglik(self) -> float:
        return self._loglik.value

    @property
    def buffered(self) -> int:
        return len(self._buffer)

    # -- streaming ------------------------------------------------------------
    def push(self, x) -> list[tuple[int, int]]:
        """Consume one observation; return newly committed ``(t, state)`` rows."""
        if self._dead is not None:
            raise self._dead
        cfg = self.config
        x = self.model.check_obs(x)
        if cfg.max_buffer is not None and len(self._buffer) >= cfg.max_buffer:
            if cfg.overflow == "block":
                raise BufferFull(f"{len(self._buffer)} uncommitted observations (max_buffer)")
        ar = self.ar
        if self.m == 0:
            v = np.array(self.model.initial(x, ar), copy=True)
        else:
            K = self.model.kernel(self._prev_obs, x, ar)
            v = ar.mul(self._deltas[-1][:, None], K).max(axis=0)
            if cfg.order:
                if len(self._window) == cfg.order:
                    self._window.pop()
                self._window.push(K)
        self.m += 1
        self._prev_obs = x
        self._buffer.append(x)
        top = v.max()
        if ar.is_zero(top):
            self._dead = ZeroLikelihoodError(self.m)
            raise self._dead
        v = v / top if ar.exact else v - top
        self._deltas.append(v)
        d = self.diagnostics
        d.observations = self.m
        d.buffer_high_water = max(d.buffer_high_water, len(self._buffer))

        out: list[tuple[int, int]] = []
        t = self.m - cfg.order
        if t >= 1 and len(self._deltas) == cfg.order + 1:
            delta_t = self._deltas[0]
            seg = self._window.product() if cfg.order else ar.identity(self.model.n_states)
            nodes, strong = node_states_from(ar, delta_t, seg)
            pool = strong if cfg.require_strong else nodes
            if pool:
                d.nodes_seen += 1
                d.last_node = (t, pool[0])
                far = self._last is None or (t > self._last[0] and t >= self._last[0] + cfg.gap)
                if far:
                    out = self._commit(t, pool[0] - 1)
        if (not out and cfg.max_buffer is not None and cfg.overflow == "force"
                and len(self._buffer) >= cfg.max_buffer and t > self._buffer_start):
            out = self._force(t)
        return out

    def _solve_piece(self, t: int, end_state: int | None):
        seg = self._buffer[: t - self._buffer_start + 1]
        end = None if end_state is None else end_state + 1
        start = None if self._last is None else self._last[1] + 1
        return constrained_path(self.model, seg, start, end,
                                include_initial=self._last is None,
                                tie=self.config.tie, exact=self.config.exact)

    def _emit(self, t: int, path: Sequence[int], loglik: float) -> list[tuple[int, int]]:
        first = 0 if self._last is None else 1
        rows = [(self._buffer_start + k, s) for k, s in enumerate(path) if k >= first]
        self._committed.extend(s for _, s in rows)
        self._loglik.add(loglik)
        state = path[-1] - 1
        drop = t - self._buffer_start
        self._buffer = self._buffer[drop:]
        self._buffer_start = t
        self._last = (t, state)
        d = self.diagnostics
        d.commits += 1
        d.commit_times.append(t)
        d.committed_length = len(self._committed)
        return rows

    def _commit(self, t: int, state: int) -> list[tuple[int, int]]:
        res = self._solve_piece(t, state)
        if not res.ok:
            # pins at two nodes that cannot be joined: skip this node
            return []
        return self._emit(t, res.path, res.loglik)

    def _force(self, t: int) -> list[tuple[int, int]]:
        full = self._solve_piece(self.m, None)
        if not full.ok:
            return []
        k = t - self._buffer_start
        piece = full.path[: k + 1]
        if self._last is None:
            ll = path_log_likelihood(self.model, self._buffer[: k + 1], piece, True)
        else:
            ll = path_log_likelihood(self.model, self._buffer[: k + 1], piece, False)
        self.diagnostics.forced_commits += 1
        self.diagnostics.conforming = False
        return self._emit(t, piece, ll)

    def flush(self) -> "FlushResult":
        """Best continuation of the committed prefix over the buffered tail."""
        d = self.diagnostics
        if self.m == 0:
            return FlushResult([], 0.0, 0.0, d)
        if self._dead is not None:
            return FlushResult([], NEG_INF, NEG_INF, d)
        res = self._solve_piece(self.m, None)
        if not res.ok:
            return FlushResult([], NEG_INF, NEG_INF, d)
        first = 0 if self._last is None else 1
        tail = [(self._buffer_start + k, s) for k, s in enumerate(res.path) if k >= first]
        total = CompensatedSum(self._loglik.value)
        total.add(res.loglik)
        return FlushResult(tail, res.loglik, total.value, d)


@dataclass
class FlushResult:
    tail: list  # provisional (t, state) rows
    tail_loglik: float
    total_loglik: float  # committed prefix plus tail
    diagnostics: Diagnostics


def open_stream(model: PMM, config: DecoderConfig | None = None, **kw) -> OnlineDecoder:
    return OnlineDecoder(model, config or DecoderConfig(**kw))


def decode_stream(model: PMM, observations: Iterable, config: DecoderConfig | None = None,
                  **kw) -> tuple[OnlineDecoder, FlushResult]:
    dec = open_stream(model, config, **kw)
    for x in observations:
        dec.push(x)
    return dec, dec.flush()
