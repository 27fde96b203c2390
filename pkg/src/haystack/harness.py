"""Monte Carlo risk estimation for the detectors and tests, plus JSON-driven experiment grids.

Every trial draws from its own streams, derived from
``(master_seed, hypothesis, trial, role)``.  Results are therefore identical
for any worker count and any execution order.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import __version__
from .bounds import BoundInputs, mu_upper_thm1
from .detector import DetectorConfig, detect, detector_T
from .nonadaptive import global_sum_test, make_subsample_design, make_uniform_design, subsample_max_test
from .signal_model import DynamicsConfig, Hypothesis, simulate_hits, world_oracle

__all__ = [
    "Algo",
    "ExperimentSpec",
    "RiskEstimate",
    "SpecError",
    "estimate_risk",
    "load_specs",
    "run_experiment_file",
    "run_trial",
    "trial_seed",
]

RISK_COLUMNS = ("n", "s", "p", "mu", "m", "epsilon", "algo", "trials", "fpr", "fpr_se", "fnr", "fnr_se", "risk", "seed")

# role tags for stream derivation
ROLE_NOISE = 0
ROLE_SUPPORT = 1
ROLE_ALGO = 2
_HYP_TAG = {Hypothesis.NULL: 0, Hypothesis.ALTERNATIVE: 1}


class SpecError(ValueError):
    """Malformed or inconsistent experiment specification."""


class Algo(str, Enum):
    ADAPTIVE_STT = "adaptive-stt"
    GLOBAL_SUM = "global-sum"
    SUBSAMPLE_MAX = "subsample-max"
    ALWAYS_NULL = "always-null"


@dataclass(frozen=True)
class ExperimentSpec:
    cfg: DynamicsConfig
    m: int
    epsilon: float
    algo: Algo
    trials: int
    master_seed: int = 0
    tau: float = 1.0
    shared_seeds: bool = False

    def __post_init__(self):
        object.__setattr__(self, "algo", Algo(self.algo))
        if self.trials < 1:
            raise SpecError("trials must be >= 1")
        if self.m < 1:
            raise SpecError("budget m must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise SpecError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not 0 <= self.master_seed < 2**64:
            raise SpecError("master_seed must be a 64-bit unsigned integer")
        if self.algo is Algo.ADAPTIVE_STT:
            T = detector_T(self.cfg.n, self.cfg.s, self.epsilon)
            if self.m < 2 * T:
                raise SpecError(f"adaptive-stt needs m >= 2T = {2 * T}, got m={self.m}")


@dataclass(frozen=True)
class RiskEstimate:
    fpr: float
    fpr_se: float
    fnr: float
    fnr_se: float
    risk: float
    trials_per_side: int

    @classmethod
    def from_counts(cls, false_pos: int, false_neg: int, trials: int) -> "RiskEstimate":
        fpr, fnr = false_pos / trials, false_neg / trials
        return cls(fpr, _se(fpr, trials), fnr, _se(fnr, trials), max(fpr, fnr), trials)

    @property
    def risk_se(self) -> float:
        return self.fpr_se if self.fpr >= self.fnr else self.fnr_se


def _se(q: float, trials: int) -> float:
    return math.sqrt(q * (1.0 - q) / trials)


def trial_seed(master_seed: int, hypothesis, trial: int, role: int, shared: bool = False) -> np.random.SeedSequence:
    """Stream for one role of one trial.  ``shared=True`` drops the hypothesis tag."""
    hyp = 0 if shared else _HYP_TAG[Hypothesis(hypothesis)]
    return np.random.SeedSequence([master_seed, hyp, trial, role])


BATCH = 256  # trials per stream block for the non-adaptive tests


def _batch_decisions(spec: ExperimentSpec, hypothesis: Hypothesis, batch: int, size: int) -> np.ndarray:
    """Decisions of ``size`` non-adaptive trials sharing the streams of block ``batch``.

    Each trial still gets its own design, noise and support path; only the
    stream seeding is per block.
    """
    cfg = spec.cfg
    seed = lambda role: trial_seed(spec.master_seed, hypothesis, batch, role, spec.shared_seeds)  # noqa: E731
    algo_rng = np.random.default_rng(seed(ROLE_ALGO))
    if spec.algo is Algo.GLOBAL_SUM:
        designs = [make_uniform_design(cfg.n, spec.m, algo_rng) for _ in range(size)]
    else:
        designs = [make_subsample_design(cfg.n, cfg.s, spec.m, spec.epsilon, algo_rng, blocks=True) for _ in range(size)]
    probes = np.stack([d.as_array() for d in designs])
    y = np.random.default_rng(seed(ROLE_NOISE)).standard_normal(probes.shape)
    if hypothesis is Hypothesis.ALTERNATIVE and cfg.mu != 0.0:
        y += cfg.mu * simulate_hits(probes, cfg, size, np.random.default_rng(seed(ROLE_SUPPORT)))
    if spec.algo is Algo.GLOBAL_SUM:
        return np.array([global_sum_test(row, spec.epsilon).decision for row in y])
    return np.array([
        subsample_max_test(d.groups(row), cfg.n, cfg.s, d.m, spec.epsilon).decision for d, row in zip(designs, y)
    ])


def run_trial(spec: ExperimentSpec, hypothesis, trial: int) -> int:
    """Decision ``psi`` of one simulated experiment."""
    hypothesis = Hypothesis(hypothesis)
    if spec.algo is Algo.ALWAYS_NULL:
        return 0
    if spec.algo in (Algo.GLOBAL_SUM, Algo.SUBSAMPLE_MAX):
        batch, pos = divmod(trial, BATCH)
        size = min(BATCH, spec.trials - batch * BATCH)
        return int(_batch_decisions(spec, hypothesis, batch, size)[pos])
    cfg = spec.cfg
    seed = lambda role: trial_seed(spec.master_seed, hypothesis, trial, role, spec.shared_seeds)  # noqa: E731
    dcfg = DetectorConfig.for_problem(cfg.n, cfg.s, spec.epsilon, m=spec.m)
    world = world_oracle(cfg, hypothesis, spec.m, np.random.default_rng(seed(ROLE_NOISE)),
                         support_rng=np.random.default_rng(seed(ROLE_SUPPORT)))
    return detect(dcfg, cfg.n, world, np.random.default_rng(seed(ROLE_ALGO))).psi


def _count_errors(spec: ExperimentSpec, hypothesis: Hypothesis, units: range) -> int:
    """Wrong decisions over ``units``: trial indices, or block indices for batched tests."""
    wrong = 1 if hypothesis is Hypothesis.NULL else 0
    if spec.algo in (Algo.GLOBAL_SUM, Algo.SUBSAMPLE_MAX):
        total = 0
        for b in units:
            size = min(BATCH, spec.trials - b * BATCH)
            total += int((_batch_decisions(spec, hypothesis, b, size) == wrong).sum())
        return total
    return sum(run_trial(spec, hypothesis, i) == wrong for i in units)


def _units(spec: ExperimentSpec) -> int:
    if spec.algo in (Algo.GLOBAL_SUM, Algo.SUBSAMPLE_MAX):
        return -(-spec.trials // BATCH)
    return spec.trials


def _chunks(total: int, parts: int) -> list[range]:
    parts = max(1, min(parts, total))
    edges = np.linspace(0, total, parts + 1).astype(int)
    return [range(a, b) for a, b in zip(edges, edges[1:]) if b > a]


def estimate_risk(spec: ExperimentSpec, workers: int = 1) -> RiskEstimate:
    """Error rates over ``spec.trials`` simulations per hypothesis."""
    jobs = [(h, r) for h in (Hypothesis.NULL, Hypothesis.ALTERNATIVE) for r in _chunks(_units(spec), workers)]
    if workers <= 1:
        counts = [_count_errors(spec, h, r) for h, r in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_count_errors, spec, h, r) for h, r in jobs]
            counts = [f.result() for f in futures]
    fp = sum(c for (h, _), c in zip(jobs, counts) if h is Hypothesis.NULL)
    fn = sum(c for (h, _), c in zip(jobs, counts) if h is Hypothesis.ALTERNATIVE)
    return RiskEstimate.from_counts(fp, fn, spec.trials)


_SPEC_FIELDS = {"n", "s", "p", "mu", "mu_preset", "tau", "m", "m_preset", "epsilon", "algo", "trials", "master_seed"}


def spec_from_dict(d: dict, seed_override: int | None = None, trials_override: int | None = None) -> ExperimentSpec:
    if not isinstance(d, dict):
        raise SpecError(f"each spec must be a JSON object, got {type(d).__name__}")
    unknown = set(d) - _SPEC_FIELDS
    if unknown:
        raise SpecError(f"unknown spec fields: {sorted(unknown)}")
    try:
        n, s = int(d["n"]), int(d["s"])
        p = float(d.get("p", 0.0))
        epsilon = float(d["epsilon"])
        tau = float(d.get("tau", 1.0))
        algo = Algo(d["algo"])
        trials = int(trials_override if trials_override is not None else d["trials"])
        seed = int(seed_override if seed_override is not None else d.get("master_seed", 0))
        if "mu" in d and "mu_preset" in d:
            raise SpecError("give either mu or mu_preset, not both")
        if "mu_preset" in d:
            if d["mu_preset"] != "thm1":
                raise SpecError(f"unknown mu_preset {d['mu_preset']!r}")
            mu = mu_upper_thm1(BoundInputs(n=n, s=s, p=p, epsilon=epsilon, tau=tau))
        else:
            mu = float(d["mu"])
        if "m" in d and "m_preset" in d:
            raise SpecError("give either m or m_preset, not both")
        if "m_preset" in d:
            if d["m_preset"] != "2T":
                raise SpecError(f"unknown m_preset {d['m_preset']!r}")
            m = 2 * detector_T(n, s, epsilon)
        else:
            m = int(d["m"])
        cfg = DynamicsConfig(n=n, s=s, p=p, mu=mu)
        return ExperimentSpec(cfg, m, epsilon, algo, trials, seed, tau)
    except SpecError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad spec {d!r}: {exc!r}") from exc


def load_specs(path, seed_override: int | None = None, trials_override: int | None = None) -> tuple[list[ExperimentSpec], str]:
    """Parse a spec file; returns the specs and a hash of the file contents."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        data = json.loads(raw)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec file {path}: {exc}") from exc
    items = data if isinstance(data, list) else [data]
    specs = [spec_from_dict(d, seed_override, trials_override) for d in items]
    return specs, hashlib.sha256(raw).hexdigest()[:16]


def risk_row(spec: ExperimentSpec, est: RiskEstimate) -> list:
    c = spec.cfg
    return [c.n, c.s, c.p, f"{c.mu:.10g}", spec.m, spec.epsilon, spec.algo.value, est.trials_per_side,
            f"{est.fpr:.10g}", f"{est.fpr_se:.10g}", f"{est.fnr:.10g}", f"{est.fnr_se:.10g}", f"{est.risk:.10g}",
            spec.master_seed]


def run_experiment_file(path, out, workers: int = 1, seed_override: int | None = None,
                        trials_override: int | None = None) -> list[RiskEstimate]:
    """Run every spec in ``path`` and write CSV rows to the text stream ``out``.

    A ``#`` header records the seed override, package version and spec hash.
    If a run fails, the rows finished so far stay written and a ``#FAILED``
    line follows before the error propagates.
    """
    specs, digest = load_specs(path, seed_override, trials_override)
    out.write(f"# haystack {__version__} spec_sha256={digest} seed={'per-spec' if seed_override is None else seed_override}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(RISK_COLUMNS)
    results = []
    for i, spec in enumerate(specs):
        try:
            est = estimate_risk(spec, workers)
        except Exception as exc:
            out.write(f"#FAILED spec={i} error={exc!r}\n")
            out.flush()
            raise
        writer.writerow(risk_row(spec, est))
        out.flush()
        results.append(est)
    return results
