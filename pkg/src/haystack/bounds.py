"""Closed-form upper and lower bounds on the detectable amplitude, plus two Monte Carlo checks.

All logarithms are natural unless a function says otherwise.  Each evaluator
raises :class:`BoundDomainError` outside its domain instead of returning NaN.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .detector import detector_T
from .signal_model import DynamicsConfig, _as_generator, simulate_hits

__all__ = [
    "C_LEMMA2",
    "BlockDecomposition",
    "BoundDomainError",
    "BoundInputs",
    "FORMULAS",
    "MissProbability",
    "bounds_table",
    "BOUNDS_COLUMNS",
    "bounds_table_csv",
    "default_bound_inputs",
    "lemma2_mc_check",
    "miss_probability_bound",
    "miss_probability_mc",
    "mu_lower_as_1sparse",
    "mu_lower_as_generic",
    "mu_lower_na_p0",
    "mu_lower_na_p1",
    "mu_upper_thm1",
]

C_LEMMA2 = 6.0 + 3.0 * math.log(2.0)


class BoundDomainError(ValueError):
    """Inputs outside the region where a bound is defined."""


@dataclass(frozen=True)
class BoundInputs:
    n: int
    s: int
    m: int | None = None
    p: float = 0.0
    epsilon: float = 0.05
    tau: float = 1.0
    c_const: float = C_LEMMA2

    def __post_init__(self):
        if self.n < 1 or self.s < 0 or self.s > self.n:
            raise BoundDomainError(f"need 0 <= s <= n and n >= 1, got n={self.n}, s={self.s}")
        if self.m is not None and self.m < 0:
            raise BoundDomainError("m must be non-negative")
        if not 0.0 <= self.p <= 1.0:
            raise BoundDomainError(f"p must lie in [0, 1], got {self.p!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise BoundDomainError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")


def _need_m(inp: BoundInputs) -> int:
    if inp.m is None or inp.m < 1:
        raise BoundDomainError("this bound needs a positive budget m")
    return inp.m


def _sqrt_nonneg(x: float, what: str) -> float:
    if x < 0.0:
        raise BoundDomainError(f"{what}: squared bound {x:.6g} is negative")
    return math.sqrt(x)


def mu_upper_thm1(inp: BoundInputs) -> float:
    """Amplitude sufficient for the adaptive detector:
    ``tau * sqrt(2 max(2p, 1/log(n/s)) log(n/s)) + sqrt(2 log(4/epsilon))``.
    """
    n, s, p, eps, tau = inp.n, inp.s, inp.p, inp.epsilon, inp.tau
    if not 1 <= s < n:
        raise BoundDomainError(f"need 1 <= s < n, got s={s}, n={n}")
    if not 0.0 < eps < 1.0 / 3.0:
        raise BoundDomainError(f"epsilon must lie in (0, 1/3), got {eps!r}")
    if not tau > 0.0:
        raise BoundDomainError(f"tau must be positive, got {tau!r}")
    lns = math.log(n / s)
    return tau * math.sqrt(2.0 * max(2.0 * p, 1.0 / lns) * lns) + math.sqrt(2.0 * math.log(4.0 / eps))


def mu_lower_na_p0(inp: BoundInputs, constant_variant: str = "proof-final") -> float:
    """Non-adaptive lower bound for a static support:
    ``sqrt(n/(2ms) log(2n/s^2 log(X) + 1))``.

    ``theorem-literal`` uses ``X = 1/e - 4 epsilon``, whose log is negative
    for every admissible epsilon, so it always raises.  ``proof-final`` uses
    ``X = 3/2 - 4 epsilon``.
    """
    n, s, eps = inp.n, inp.s, inp.epsilon
    m = _need_m(inp)
    if inp.p != 0.0:
        raise BoundDomainError("this bound is for p = 0")
    if not 1 <= s <= n / 2:
        raise BoundDomainError(f"need 1 <= s <= n/2, got s={s}, n={n}")
    if n / s > m:
        raise BoundDomainError(f"need n/s <= m, got n/s={n / s:.6g}, m={m}")
    if eps > 1.0 / (2.0 * math.e):
        raise BoundDomainError(f"need epsilon <= 1/(2e), got {eps!r}")
    if constant_variant == "theorem-literal":
        x = 1.0 / math.e - 4.0 * eps
    elif constant_variant == "proof-final":
        x = 1.5 - 4.0 * eps
    else:
        raise ValueError(f"unknown constant_variant {constant_variant!r}")
    if x <= 0.0:
        raise BoundDomainError(f"{constant_variant}: inner log argument {x:.6g} is not positive")
    lx = math.log(x)
    if lx < 0.0:
        raise BoundDomainError(f"{constant_variant}: inner log {lx:.6g} is negative")
    arg = 2.0 * n / s**2 * lx + 1.0
    return _sqrt_nonneg(n / (2.0 * m * s) * math.log(arg), constant_variant)


def mu_lower_na_p1(inp: BoundInputs) -> float:
    """Non-adaptive lower bound when the support is redrawn every step:
    ``sqrt(log(n^2/(s^2 m) log(4(1-2 epsilon)^2 + 1) + 1))``.
    """
    n, s, eps = inp.n, inp.s, inp.epsilon
    m = _need_m(inp)
    if s < 1:
        raise BoundDomainError("need s >= 1")
    if not eps < 0.5:
        raise BoundDomainError(f"need epsilon < 1/2, got {eps!r}")
    inner = math.log(4.0 * (1.0 - 2.0 * eps) ** 2 + 1.0)
    return math.sqrt(math.log(n**2 / (s**2 * m) * inner + 1.0))


def mu_lower_as_generic(inp: BoundInputs) -> float:
    """Lower bound for any (possibly adaptive) design: ``sqrt(2n/(sm) log(1/(4 epsilon)))``."""
    n, s, eps = inp.n, inp.s, inp.epsilon
    m = _need_m(inp)
    if s < 1:
        raise BoundDomainError("need s >= 1")
    if not eps < 0.25:
        raise BoundDomainError(f"need epsilon < 1/4, got {eps!r}")
    return math.sqrt(2.0 * n / (s * m) * math.log(1.0 / (4.0 * eps)))


def mu_lower_as_1sparse(inp: BoundInputs) -> float:
    """Adaptive lower bound for a single moving component:
    ``sqrt(p/(2c) log(log((5/4 - 4 eps)^2 + 1/2) p^2 n^2/(4 c^2 m) + 1))``.
    """
    n, p, eps, c = inp.n, inp.p, inp.epsilon, inp.c_const
    m = _need_m(inp)
    if inp.s != 1:
        raise BoundDomainError(f"this bound is for s = 1, got s={inp.s}")
    if p < 8.0 / m:
        raise BoundDomainError(f"need p >= 8/m = {8.0 / m:.6g}, got p={p!r}")
    if c <= 0.0:
        raise BoundDomainError("c_const must be positive")
    q = (1.25 - 4.0 * eps) ** 2 + 0.5
    if not q > 1.0:
        raise BoundDomainError(f"need (5/4 - 4 eps)^2 + 1/2 > 1, got {q:.6g}")
    inner = math.log(q) * p**2 * n**2 / (4.0 * c**2 * m)
    return math.sqrt(p / (2.0 * c) * math.log(inner + 1.0))


@dataclass(frozen=True)
class MissProbability:
    exact: float
    bound: float

    def __iter__(self):
        return iter((self.exact, self.bound))


def miss_probability_bound(n: int, s: int, m: int) -> MissProbability:
    """Chance that ``m`` distinct probes all miss a static uniform ``s``-support.

    ``exact = prod_{i<m} (n-s-i)/(n-i)``; ``bound = (1 - 2s/n)^(n/s)`` is a
    lower bound on it whenever ``m <= n/s``.
    """
    if m < 0 or s < 0 or n < 1:
        raise BoundDomainError("need n >= 1 and non-negative s, m")
    if m > n - s:
        raise BoundDomainError(f"m={m} exceeds n - s = {n - s}; a hit is certain")
    exact = 1.0
    for i in range(m):
        exact *= (n - s - i) / (n - i)
    if s == 0:
        return MissProbability(1.0, 1.0)
    if m > n / s:
        raise BoundDomainError(f"the closed form needs m <= n/s, got m={m}, n/s={n / s:.6g}")
    bound = max(0.0, 1.0 - 2.0 * s / n) ** (n / s)
    assert exact >= bound, (exact, bound)
    return MissProbability(exact, bound)


def miss_probability_mc(n: int, s: int, m: int, trials: int, rng) -> tuple[float, float]:
    """Empirical no-hit frequency of ``m`` distinct random probes on a static support.

    Returns ``(frequency, se)``.
    """
    rng = _as_generator(rng)
    cfg = DynamicsConfig(n=n, s=s, p=0.0, mu=0.0)
    misses = 0
    chunk = 2000
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        # the support law is exchangeable, so one probe set per chunk has the same law
        probes = rng.choice(n, size=m, replace=False)
        hits = simulate_hits(probes, cfg, k, rng)
        misses += int((~hits.any(axis=1)).sum())
        done += k
    q = misses / trials
    return q, math.sqrt(q * (1.0 - q) / trials)


@dataclass(frozen=True)
class BlockDecomposition:
    """Change times ``0 = tau_0 < ... < tau_N = m`` and the static stretches between them."""

    change_times: tuple[int, ...]

    def __post_init__(self):
        ct = self.change_times
        if len(ct) < 2 or ct[0] != 0 or any(b <= a for a, b in zip(ct, ct[1:])):
            raise ValueError("change times must start at 0 and strictly increase")

    @property
    def m(self) -> int:
        return self.change_times[-1]

    @property
    def count(self) -> int:
        return len(self.change_times) - 1

    @property
    def lengths(self) -> tuple[int, ...]:
        ct = self.change_times
        return tuple(b - a for a, b in zip(ct, ct[1:]))

    @classmethod
    def from_flips(cls, theta) -> "BlockDecomposition":
        """``theta[t-1]`` is the coin at step ``t``; the last coin is forced to 1."""
        theta = np.asarray(theta, dtype=bool).copy()
        if theta.size < 1:
            raise ValueError("need at least one step")
        theta[-1] = True
        return cls((0,) + tuple(int(t) + 1 for t in np.flatnonzero(theta)))

    @classmethod
    def sample(cls, m: int, p: float, rng) -> "BlockDecomposition":
        rng = _as_generator(rng)
        return cls.from_flips(rng.random(m) < p)


def lemma2_mc_check(m: int, p: float, c_const: float = C_LEMMA2, trials: int = 10_000, rng=None) -> tuple[float, float]:
    """Empirical probability that every static stretch has length ``<= 2c/p``.

    Returns ``(estimate, se)``.
    """
    if m < 1 or trials < 1:
        raise ValueError("need m >= 1 and trials >= 1")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p!r}")
    limit = 2.0 * c_const / p
    if p == 1.0 or limit >= m:
        return 1.0, 0.0
    rng = _as_generator(rng)
    good = 0
    chunk = max(1, 4_000_000 // m)
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        theta = rng.random((k, m)) < p
        theta[:, -1] = True
        idx = np.where(theta, np.arange(1, m + 1), 0)
        # last change time at or before each step; gaps are step - previous change
        prev = np.maximum.accumulate(idx, axis=1)
        prev = np.concatenate([np.zeros((k, 1), dtype=prev.dtype), prev[:, :-1]], axis=1)
        gaps = np.where(theta, np.arange(1, m + 1) - prev, 0)
        good += int((gaps.max(axis=1) <= limit).sum())
        done += k
    q = good / trials
    return q, math.sqrt(q * (1.0 - q) / trials)


FORMULAS = {
    "thm1-upper": mu_upper_thm1,
    "na-p0-theorem-literal": lambda inp: mu_lower_na_p0(inp, "theorem-literal"),
    "na-p0-proof-final": lambda inp: mu_lower_na_p0(inp, "proof-final"),
    "na-p1": mu_lower_na_p1,
    "as-generic": mu_lower_as_generic,
    "as-1sparse": mu_lower_as_1sparse,
}

BOUNDS_COLUMNS = ("formula_id", "n", "s", "m", "p", "epsilon", "tau", "value", "status")


def bounds_table(inputs, formulas=None) -> list[dict]:
    """Evaluate every formula on every input; domain errors become status strings."""
    ids = list(FORMULAS) if formulas is None else list(formulas)
    rows = []
    for inp in inputs:
        for fid in ids:
            try:
                value, status = FORMULAS[fid](inp), "ok"
            except BoundDomainError as exc:
                value, status = float("nan"), f"domain-error: {exc}"
            rows.append({
                "formula_id": fid, "n": inp.n, "s": inp.s, "m": "" if inp.m is None else inp.m,
                "p": inp.p, "epsilon": inp.epsilon, "tau": inp.tau, "value": value, "status": status,
            })
    return rows


def bounds_table_csv(rows, fh=None) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BOUNDS_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        out = dict(row)
        if isinstance(out["value"], float) and not math.isnan(out["value"]):
            out["value"] = repr(out["value"])
        writer.writerow(out)
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def default_bound_inputs(n: int = 5000, s: int = 9, epsilon: float = 0.05, tau: float = 1.0) -> list[BoundInputs]:
    """A small grid around the detector presets, used by the CLI when no config is given."""
    T = detector_T(n, s, epsilon)
    base = BoundInputs(n=n, s=s, m=2 * T, p=0.0, epsilon=epsilon, tau=tau)
    return [replace(base, p=p) for p in (0.0, 0.2, 0.8, 1.0)] + [
        BoundInputs(n=n, s=1, m=2 * T, p=0.2, epsilon=epsilon, tau=tau)
    ]
