"""Adaptive detection: probe random components one after another, each with an STT.

The detector needs only ``n``, the number of queries ``T`` and the level
``epsilon``.  It never sees the resample rate or the amplitude.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .signal_model import WorldOracle, _as_generator
from .stt import SttRunRecord, SttSchedule, SttVerdict, make_schedule, run_stt

__all__ = ["DetectorConfig", "Verdict", "detect", "detector_T", "verdict_to_json"]


def detector_T(n: int, s: int, epsilon: float) -> int:
    """Number of queries ``ceil(9n/(2s) * log2(3/epsilon))``."""
    if not 1 <= s <= n:
        raise ValueError(f"need 1 <= s <= n, got s={s}, n={n}")
    if not 0.0 < epsilon < 1.0 / 3.0:
        raise ValueError(f"epsilon must lie in (0, 1/3), got {epsilon!r}")
    return max(1, math.ceil(9.0 * n / (2.0 * s) * math.log2(3.0 / epsilon)))


@dataclass(frozen=True)
class DetectorConfig:
    T: int
    m: int
    epsilon: float
    schedule: SttSchedule = field(default=None)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("budget m must be >= 1")
        if self.schedule is None:
            object.__setattr__(self, "schedule", make_schedule(self.T, self.epsilon))
        elif self.schedule.T != self.T or self.schedule.epsilon != self.epsilon:
            raise ValueError("schedule was built for a different (T, epsilon)")

    @classmethod
    def for_problem(cls, n: int, s: int, epsilon: float, m: int | None = None) -> "DetectorConfig":
        """Query count from :func:`detector_T`; the budget defaults to ``2T``."""
        T = detector_T(n, s, epsilon)
        return cls(T=T, m=2 * T if m is None else m, epsilon=epsilon)


@dataclass(frozen=True)
class Verdict:
    psi: int
    measurements_used: int
    runs: tuple[SttRunRecord, ...]

    def to_dict(self) -> dict:
        return {
            "psi": self.psi,
            "measurements_used": self.measurements_used,
            "runs": [r.to_dict() for r in self.runs],
        }


def verdict_to_json(verdict: Verdict, **kwargs) -> str:
    return json.dumps(verdict.to_dict(), **kwargs)


def detect(cfg: DetectorConfig, n: int, world: WorldOracle, rng) -> Verdict:
    """Run the detector against ``world``; ``psi = 1`` on the first "Signal" run."""
    if world.m != cfg.m:
        raise ValueError(f"world budget {world.m} differs from detector budget {cfg.m}")
    rng = _as_generator(rng)
    queries = rng.integers(0, n, size=cfg.T).tolist()
    schedule = cfg.schedule
    measure = world.measure
    runs = []
    used = 0
    psi = 0
    for q in queries:
        left = cfg.m - used
        if left < 1:
            break
        record = run_stt(schedule, lambda q=q: measure(q), left, q=q)
        runs.append(record)
        used += record.n_obs
        if record.verdict is SttVerdict.SIGNAL:
            psi = 1
            break
        if record.verdict is SttVerdict.BUDGET_TRUNCATED:
            break
    assert used <= cfg.m
    return Verdict(psi=psi, measurements_used=used, runs=tuple(runs))
