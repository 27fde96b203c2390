"""Non-adaptive sensing designs and two baseline tests.

A design is the full probe sequence, fixed before any data exist.  The global
sum test thresholds the standardised sum of all observations; the sub-sampling
test probes a few components repeatedly and thresholds the largest group mean.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .signal_model import _as_generator

__all__ = [
    "DesignKind",
    "SensingDesign",
    "TestResult",
    "design_to_csv",
    "global_sum_test",
    "make_subsample_design",
    "make_uniform_design",
    "subsample_components",
    "subsample_max_test",
]


class DesignKind(str, Enum):
    ONE_EACH = "one-each-subsample"
    BLOCK = "block-subsample"
    UNIFORM_IID = "uniform-iid"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SensingDesign:
    probes: tuple[int, ...]
    kind: DesignKind = DesignKind.CUSTOM
    n: int | None = None
    block_length: int = 1

    def __post_init__(self):
        if self.n is not None and any(not 0 <= a < self.n for a in self.probes):
            raise ValueError("probe index outside range(n)")
        if self.kind is DesignKind.ONE_EACH and len(set(self.probes)) != len(self.probes):
            raise ValueError("one-each design must probe distinct components")
        if self.kind is DesignKind.BLOCK:
            r = self.block_length
            if r < 1 or len(self.probes) % r:
                raise ValueError("block design length must be a multiple of the block length")
            heads = self.probes[::r]
            if len(set(heads)) != len(heads):
                raise ValueError("block design must probe distinct components")
            for b, head in enumerate(heads):
                if any(a != head for a in self.probes[b * r:(b + 1) * r]):
                    raise ValueError("block design probes must be constant within each block")

    @property
    def m(self) -> int:
        return len(self.probes)

    def __len__(self) -> int:
        return len(self.probes)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probes, dtype=np.int64)

    def groups(self, y) -> np.ndarray:
        """Observations of a block design reshaped to ``(B, r)``."""
        y = np.asarray(y, dtype=float)
        if y.size != self.m:
            raise ValueError("observation count does not match the design")
        return y.reshape(-1, self.block_length)


def subsample_components(n: int, s: int, epsilon: float) -> int:
    """``B = ceil(log(1/epsilon) * n / s)`` distinct components."""
    return math.ceil(math.log(1.0 / epsilon) * n / s)


def make_subsample_design(n: int, s: int, m: int | None, epsilon: float, rng, blocks: bool = False) -> SensingDesign:
    """Sub-sampling design.

    ``blocks=False``: ``m`` distinct random components, one probe each, in
    random order (``m`` defaults to ``B``).  ``blocks=True``: ``B`` distinct
    components, each probed ``m // B`` consecutive times; the ``m % B``
    leftover probes are not used.
    """
    rng = _as_generator(rng)
    if not blocks:
        if m is None:
            m = subsample_components(n, s, epsilon)
        if not 1 <= m <= n:
            raise ValueError(f"one-each design needs 1 <= m <= n, got m={m}, n={n}")
        probes = rng.choice(n, size=m, replace=False)
        return SensingDesign(tuple(int(a) for a in probes), DesignKind.ONE_EACH, n)
    B = subsample_components(n, s, epsilon)
    if B > n:
        raise ValueError(f"B={B} components exceeds n={n}")
    if m is None or m < B:
        raise ValueError(f"block design needs m >= B={B}, got m={m}")
    r = m // B
    heads = rng.choice(n, size=B, replace=False)
    probes = np.repeat(heads, r)
    return SensingDesign(tuple(int(a) for a in probes), DesignKind.BLOCK, n, block_length=r)


def make_uniform_design(n: int, m: int, rng) -> SensingDesign:
    """``m`` i.i.d. uniform probes (with replacement)."""
    rng = _as_generator(rng)
    if m < 1:
        raise ValueError("m must be >= 1")
    return SensingDesign(tuple(rng.integers(0, n, size=m).tolist()), DesignKind.UNIFORM_IID, n)


def design_to_csv(design: SensingDesign, fh=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "a"])
    for t, a in enumerate(design.probes, start=1):
        writer.writerow([t, a])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


@dataclass(frozen=True)
class TestResult:
    statistic: float
    threshold: float
    decision: int

    __test__ = False  # not a pytest class

    def to_json(self) -> str:
        return json.dumps({"statistic": self.statistic, "threshold": self.threshold, "decision": self.decision})

    def __int__(self) -> int:
        return self.decision


def global_sum_test(y, epsilon: float) -> TestResult:
    """Reject when ``sum(y) / sqrt(m)`` exceeds the standard normal ``1 - epsilon`` quantile."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("global sum test needs at least one observation")
    stat = float(y.sum() / math.sqrt(y.size))
    thr = float(norm.isf(epsilon))
    return TestResult(stat, thr, int(stat > thr))


def subsample_max_test(
    groups: Sequence[Sequence[float]] | np.ndarray,
    n: int,
    s: int,
    m: int,
    epsilon: float,
    literal: bool = False,
) -> TestResult:
    """Largest group mean against a threshold.

    The default threshold ``sqrt(2 log(B/epsilon) / r)`` keeps the null
    rejection rate below ``epsilon`` by a union bound over the ``B`` groups of
    ``r`` observations.  ``literal=True`` uses ``sqrt(n/(s m) * log(n/s))``.
    """
    try:
        g = np.asarray(groups, dtype=float)
    except ValueError as exc:
        raise ValueError("groups must all have the same length") from exc
    if g.ndim != 2 or g.shape[1] == 0:
        raise ValueError("groups must form a non-empty (B, r) array")
    B, r = g.shape
    if literal:
        thr = math.sqrt(n / (s * m) * math.log(n / s))
    else:
        thr = math.sqrt(2.0 * (math.log(B) + math.log(1.0 / epsilon)) / r)
    stat = float(g.mean(axis=1).max())
    return TestResult(stat, thr, int(stat > thr))
