"""Dynamically evolving sparse support and the coordinate-wise noisy channel.

Indices are 0-based throughout: components live in ``range(n)``.

At every time step each of the ``s`` active components flips an independent
Ber(p) coin.  Components whose coin comes up 0 stay put; the others are
replaced by a uniformly drawn set of distinct fresh locations outside the
retained set.  A fresh location may coincide with the old position of a
component that moved (with ``s == 1`` this is "jump uniformly over [n]").
"""
from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BudgetExhausted",
    "DynamicsConfig",
    "Hypothesis",
    "MeasurementRecord",
    "SupportState",
    "SupportTrajectory",
    "WorldOracle",
    "evolve_support",
    "init_support",
    "observe",
    "simulate_hits",
    "simulate_trajectory",
    "trajectory_to_csv",
    "world_oracle",
]


class BudgetExhausted(RuntimeError):
    """Raised when a world oracle is asked for more than ``m`` measurements."""


class Hypothesis(str, Enum):
    NULL = "null"
    ALTERNATIVE = "alternative"


@dataclass(frozen=True)
class DynamicsConfig:
    """Parameters of the signal law: dimension, sparsity, resample rate, amplitude."""

    n: int
    s: int
    p: float
    mu: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if int(self.s) != self.s or self.s < 1:
            raise ValueError(f"s must be a positive integer, got {self.s!r}")
        if self.s > self.n:
            raise ValueError(f"sparsity s={self.s} exceeds dimension n={self.n}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p!r}")
        if not self.mu >= 0.0:
            raise ValueError(f"mu must be non-negative, got {self.mu!r}")


@dataclass(frozen=True)
class SupportState:
    """Support at time ``t``.

    ``slots`` is the enumeration S_1, ..., S_s used to attach coins to
    components; ``active`` is the same information as a set.
    """

    slots: tuple[int, ...]
    t: int = 1

    @property
    def active(self) -> frozenset[int]:
        return frozenset(self.slots)

    def __contains__(self, index: int) -> bool:
        return index in self.slots

    def __len__(self) -> int:
        return len(self.slots)


@dataclass(frozen=True)
class SupportTrajectory:
    states: tuple[SupportState, ...]
    # resampled[t] lists the slot positions whose coin came up 1 between
    # states[t] and states[t + 1]
    resampled: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class MeasurementRecord:
    t: int
    a: int
    y: float


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _draw_fresh(n: int, retained: Sequence[int], count: int, uniforms: Iterable[float]) -> list[int]:
    """Draw ``count`` distinct indices uniformly from ``range(n)`` minus ``retained``.

    Rejection-free: the k-th draw picks a rank in the complement of the
    currently occupied set and maps it to an index by walking the sorted
    occupied list.
    """
    occupied = sorted(retained)
    fresh = []
    it = iter(uniforms)
    for _ in range(count):
        free = n - len(occupied)
        rank = int(next(it) * free)
        if rank >= free:  # guards u * free rounding up to free
            rank = free - 1
        # smallest x with x - #{o <= x} == rank
        x = rank
        lo = 0
        while True:
            hi = bisect.bisect_right(occupied, x)
            if hi == lo:
                break
            x += hi - lo
            lo = hi
        bisect.insort(occupied, x)
        fresh.append(x)
    return fresh


def init_support(cfg: DynamicsConfig, rng) -> SupportState:
    """Uniformly random ``s``-subset of ``range(n)`` at time 1."""
    rng = _as_generator(rng)
    if cfg.s > cfg.n:
        raise ValueError("s > n")
    slots = _draw_fresh(cfg.n, (), cfg.s, rng.random(cfg.s))
    return SupportState(tuple(slots), t=1)


def _evolve_slots(slots: Sequence[int], flags: Sequence[bool], n: int, uniforms) -> list[int]:
    retained = [x for x, f in zip(slots, flags) if not f]
    moved = len(slots) - len(retained)
    if moved == 0:
        return list(slots)
    fresh = iter(_draw_fresh(n, retained, moved, uniforms))
    return [next(fresh) if f else x for x, f in zip(slots, flags)]


def evolve_support(state: SupportState, cfg: DynamicsConfig, rng) -> SupportState:
    """One step of the support dynamics; the returned state has ``t + 1``."""
    rng = _as_generator(rng)
    if len(state.slots) != cfg.s:
        raise ValueError(f"state has {len(state.slots)} components, config says s={cfg.s}")
    return _step(state, cfg, rng)[0]


def _step(state: SupportState, cfg: DynamicsConfig, rng: np.random.Generator):
    flags = rng.random(cfg.s) < cfg.p
    moved = int(flags.sum())
    slots = _evolve_slots(state.slots, flags.tolist(), cfg.n, rng.random(moved) if moved else ())
    return SupportState(tuple(slots), t=state.t + 1), tuple(int(i) for i in np.flatnonzero(flags))


def observe(state: SupportState | None, a: int, cfg: DynamicsConfig, rng) -> float:
    """``mu * 1{a in support} + N(0, 1)``; ``state=None`` is the empty (null) support."""
    rng = _as_generator(rng)
    if not 0 <= a < cfg.n:
        raise IndexError(f"probe index {a} outside range(0, {cfg.n})")
    w = float(rng.standard_normal())
    if state is not None and a in state.slots:
        return cfg.mu + w
    return w


def simulate_trajectory(cfg: DynamicsConfig, m: int, rng) -> SupportTrajectory:
    """Support path S^(1), ..., S^(m) together with the per-step resample masks."""
    rng = _as_generator(rng)
    if m < 1:
        raise ValueError("m must be >= 1")
    state = init_support(cfg, rng)
    states = [state]
    resampled = []
    for _ in range(m - 1):
        state, flipped = _step(state, cfg, rng)
        states.append(state)
        resampled.append(flipped)
    return SupportTrajectory(tuple(states), tuple(resampled))


def trajectory_to_csv(traj: SupportTrajectory, fh=None) -> str:
    """Write ``t, active_indices, resampled_count``; returns the text as well.

    ``resampled_count`` on row ``t`` is the number of components redrawn on
    the way into ``S^(t)`` (0 on the first row).
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "active_indices", "resampled_count"])
    for i, state in enumerate(traj.states):
        count = len(traj.resampled[i - 1]) if i > 0 else 0
        writer.writerow([state.t, ";".join(str(x) for x in sorted(state.slots)), count])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


class _Buffered:
    """Block-buffered draws from one generator, so per-step calls stay cheap."""

    __slots__ = ("_rng", "_kind", "_block", "_buf", "_pos")

    def __init__(self, rng: np.random.Generator, kind: str, block: int = 4096):
        self._rng = rng
        self._kind = kind
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def _refill(self):
        if self._kind == "normal":
            self._buf = self._rng.standard_normal(self._block).tolist()
        else:
            self._buf = self._rng.random(self._block).tolist()
        self._pos = 0

    def next(self) -> float:
        if self._pos >= len(self._buf):
            self._refill()
        v = self._buf[self._pos]
        self._pos += 1
        return v

    def take(self, k: int):
        for _ in range(k):
            yield self.next()


@dataclass
class WorldOracle:
    """Stateful measurement channel for one simulated experiment.

    Each :meth:`measure` call consumes one time step.  Under the alternative
    the support evolves between consecutive calls; under the null every
    observation is pure noise.  At most ``m`` calls are allowed.
    """

    cfg: DynamicsConfig
    hypothesis: Hypothesis
    m: int
    rng: np.random.Generator
    support_rng: np.random.Generator | None = None
    _t: int = field(default=0, init=False)
    _slots: list[int] | None = field(default=None, init=False)
    _members: set[int] = field(default_factory=set, init=False)
    _probes: list[int] = field(default_factory=list, init=False)
    _obs: list[float] = field(default_factory=list, init=False)
    _hits: list[bool] = field(default_factory=list, init=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("budget m must be >= 1")
        self.hypothesis = Hypothesis(self.hypothesis)
        self._noise = _Buffered(self.rng, "normal")
        self._unif = _Buffered(self.rng if self.support_rng is None else self.support_rng, "uniform")
        if self.hypothesis is Hypothesis.ALTERNATIVE:
            self._slots = _draw_fresh(self.cfg.n, (), self.cfg.s, self._unif.take(self.cfg.s))
            self._members = set(self._slots)

    @property
    def t(self) -> int:
        """Number of measurements taken so far."""
        return self._t

    @property
    def remaining(self) -> int:
        return self.m - self._t

    @property
    def support(self) -> SupportState | None:
        """Support that the next measurement will see (``None`` under the null)."""
        if self._slots is None:
            return None
        return SupportState(tuple(self._slots), t=self._t + 1)

    def _advance(self):
        s, p, unif = self.cfg.s, self.cfg.p, self._unif
        if p == 0.0:
            return
        flags = [unif.next() < p for _ in range(s)]
        if any(flags):
            self._slots = _evolve_slots(self._slots, flags, self.cfg.n, unif.take(sum(flags)))
            self._members = set(self._slots)

    def measure(self, a: int) -> float:
        if self._t >= self.m:
            raise BudgetExhausted(f"measurement budget m={self.m} exhausted")
        if not 0 <= a < self.cfg.n:
            raise IndexError(f"probe index {a} outside range(0, {self.cfg.n})")
        if self._slots is not None and self._t > 0:
            self._advance()
        y = self._noise.next()
        hit = a in self._members
        if hit:
            y += self.cfg.mu
        self._t += 1
        self._probes.append(a)
        self._obs.append(y)
        self._hits.append(hit)
        return y

    @property
    def records(self) -> list[MeasurementRecord]:
        return [MeasurementRecord(t + 1, a, y) for t, (a, y) in enumerate(zip(self._probes, self._obs))]

    @property
    def hits(self) -> list[bool]:
        """Whether each past probe landed on an active component (simulation ground truth)."""
        return list(self._hits)


def world_oracle(cfg: DynamicsConfig, hypothesis, m: int, rng, support_rng=None) -> WorldOracle:
    """``rng`` drives the noise; ``support_rng`` (default: the same stream) drives the support."""
    support_rng = None if support_rng is None else _as_generator(support_rng)
    return WorldOracle(cfg, Hypothesis(hypothesis), m, _as_generator(rng), support_rng)


def _distinct_rows(x: np.ndarray) -> np.ndarray:
    srt = np.sort(x, axis=1)
    return ~(srt[:, 1:] == srt[:, :-1]).any(axis=1)


def _redraw_until_distinct(s_mat: np.ndarray, flags: np.ndarray, n: int, rng) -> np.ndarray:
    """Fill flagged entries with uniform draws, rejecting rows with repeated values.

    Accepted rows are uniform over tuples of distinct fresh values outside the
    retained (unflagged) entries of that row.
    """
    pending = np.arange(s_mat.shape[0])
    while pending.size:
        cand = np.where(flags[pending], rng.integers(0, n, size=(pending.size, s_mat.shape[1])), s_mat[pending])
        ok = _distinct_rows(cand)
        s_mat[pending[ok]] = cand[ok]
        pending = pending[~ok]
    return s_mat


def simulate_hits(design: Sequence[int], cfg: DynamicsConfig, n_paths: int, rng) -> np.ndarray:
    """Hit indicators ``1{A_t in S^(t)}`` for ``n_paths`` independent support paths.

    Vectorised over paths; returns a boolean array of shape ``(n_paths, m)``.
    ``design`` is one probe sequence shared by all paths, or an
    ``(n_paths, m)`` array with one sequence per path.  Same law as
    :func:`simulate_trajectory`.
    """
    rng = _as_generator(rng)
    probes = np.asarray(design, dtype=np.int64)
    if probes.ndim == 2:
        if probes.shape[0] != n_paths:
            raise ValueError("per-path design needs one row per path")
        m = probes.shape[1]
    else:
        probes = probes.reshape(1, -1)
        m = probes.shape[1]
    cols = probes.T[:, :, None]
    n, s, p = cfg.n, cfg.s, cfg.p
    hits = np.empty((n_paths, m), dtype=bool)
    if n_paths == 0 or m == 0:
        return hits
    slots = np.zeros((n_paths, s), dtype=np.int64)
    _redraw_until_distinct(slots, np.ones((n_paths, s), dtype=bool), n, rng)
    for t in range(m):
        if t > 0 and p > 0.0:
            flags = rng.random((n_paths, s)) < p
            rows = np.flatnonzero(flags.any(axis=1))
            if rows.size:
                sub = slots[rows]
                _redraw_until_distinct(sub, flags[rows], n, rng)
                slots[rows] = sub
        hits[:, t] = (slots == cols[t]).any(axis=1)
    return hits
