"""Sequential Thresholding Test: a running-mean test with a shrinking upper ladder.

The test observes up to ``k`` values.  After the j-th value it stops with
"no signal" if the running mean is ``<= t_k`` and with "signal" if the mean
is ``> t_j``.  Because ``t_j`` decreases to ``t_k`` the corridor closes at
step ``k``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .signal_model import BudgetExhausted

__all__ = [
    "SttRunRecord",
    "SttSchedule",
    "SttVerdict",
    "c_factor",
    "make_schedule",
    "run_stt",
    "schedule_to_json",
]


class SttVerdict(str, Enum):
    SIGNAL = "Signal"
    NO_SIGNAL = "NoSignal"
    BUDGET_TRUNCATED = "BudgetTruncated"


def c_factor(x: float) -> float:
    """``2 (1 + log log(1/x) / log(1/x))`` for ``0 < x < 1/e`` (natural logs)."""
    if not 0.0 < x < math.exp(-1.0):
        raise ValueError(f"c_factor needs 0 < x < 1/e, got {x!r}")
    lx = math.log(1.0 / x)
    return 2.0 * (1.0 + math.log(lx) / lx)


@dataclass(frozen=True)
class SttSchedule:
    k: int
    thresholds: tuple[float, ...]
    c_val: float
    T: int
    epsilon: float

    @property
    def floor(self) -> float:
        """Lower stopping boundary ``t_k``."""
        return self.thresholds[-1]

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "epsilon": self.epsilon,
            "k": self.k,
            "c_val": self.c_val,
            "thresholds": list(self.thresholds),
        }


def make_schedule(T: int, epsilon: float) -> SttSchedule:
    """Test length ``floor(log(T/2))`` and ladder ``t_j = sqrt(c(2 eps/T) log(2T/eps) / j)``.

    Each null run declares "signal" with probability at most ``epsilon / T``.
    """
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    k = math.floor(math.log(T / 2.0))
    if k < 1:
        raise ValueError(f"T={T} gives test length k={k} < 1; need T >= 6")
    x = 2.0 * epsilon / T
    if not x < math.exp(-1.0):
        raise ValueError(f"2*epsilon/T = {x} must be below 1/e")
    c_val = c_factor(x)
    top = math.sqrt(c_val * math.log(2.0 * T / epsilon))
    thresholds = tuple(top / math.sqrt(j) for j in range(1, k + 1))
    return SttSchedule(k=k, thresholds=thresholds, c_val=c_val, T=int(T), epsilon=epsilon)


def schedule_to_json(schedule: SttSchedule, **kwargs) -> str:
    return json.dumps(schedule.to_dict(), **kwargs)


@dataclass(frozen=True)
class SttRunRecord:
    q: int | None
    n_obs: int
    verdict: SttVerdict
    running_means: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"q": self.q, "n_obs": self.n_obs, "verdict": self.verdict.value}


def run_stt(
    schedule: SttSchedule,
    source: Callable[[], float],
    budget_left: int,
    q: int | None = None,
) -> SttRunRecord:
    """Run one test against ``source``, a zero-argument callable returning the next value.

    At most ``min(k, budget_left)`` values are drawn.  If the budget runs out
    before a decision (or ``source`` raises :class:`BudgetExhausted`) the run
    ends as ``BUDGET_TRUNCATED``.
    """
    if budget_left < 1:
        raise ValueError("budget_left must be >= 1")
    thresholds = schedule.thresholds
    floor = thresholds[-1]
    limit = min(schedule.k, budget_left)
    total = 0.0
    means = []
    for j in range(1, limit + 1):
        try:
            x = source()
        except BudgetExhausted:
            return SttRunRecord(q, j - 1, SttVerdict.BUDGET_TRUNCATED, tuple(means))
        total += x
        mean = total / j
        means.append(mean)
        if mean <= floor:
            return SttRunRecord(q, j, SttVerdict.NO_SIGNAL, tuple(means))
        if mean > thresholds[j - 1]:
            return SttRunRecord(q, j, SttVerdict.SIGNAL, tuple(means))
    if limit < schedule.k:
        return SttRunRecord(q, limit, SttVerdict.BUDGET_TRUNCATED, tuple(means))
    # unreachable for a valid ladder: at j = k one of the two checks fires
    return SttRunRecord(q, limit, SttVerdict.NO_SIGNAL, tuple(means))
