"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` to see the verdict lines.
Criteria are checked at their stated tolerances; nothing here is loosened.
"""
import itertools
import math

import mpmath
import numpy as np
import pytest
from scipy import stats

from haystack.bounds import (
    C_LEMMA2,
    BoundDomainError,
    BoundInputs,
    lemma2_mc_check,
    miss_probability_bound,
    miss_probability_mc,
    mu_lower_na_p0,
    mu_upper_thm1,
)
from haystack.detector import detector_T
from haystack.harness import ExperimentSpec, estimate_risk, run_trial
from haystack.likelihood import figure3_sweep, lr_exact_1sparse, lr_exact_p1, lr_nested_mc
from haystack.signal_model import DynamicsConfig
from haystack.stt import SttVerdict, make_schedule, run_stt
from oracles import hypergeom_no_hit, likelihood_ratio_enumerated
from test_bounds import SPOT_VALUES

pytestmark = pytest.mark.slow

N, S, EPS = 5000, 9, 0.05


@pytest.fixture
def report(capsys):
    def emit(label: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return emit


def rate_se(q: float, trials: int) -> float:
    return math.sqrt(q * (1.0 - q) / trials)


def test_c01_detector_risk(report):
    T = detector_T(N, S, EPS)
    assert T == 14768
    details, ok = [], True
    for i, p in enumerate((0.0, 0.2, 0.8)):
        mu = mu_upper_thm1(BoundInputs(N, S, p=p, epsilon=EPS, tau=1.0))
        spec = ExperimentSpec(DynamicsConfig(N, S, p, mu), 2 * T, EPS, "adaptive-stt", 500, master_seed=100 + i)
        est = estimate_risk(spec)
        good = est.risk <= EPS + 3 * est.risk_se
        ok &= good
        details.append(f"p={p} mu={mu:.3f} fpr={est.fpr:.3f} fnr={est.fnr:.3f}")
    report("c01 detector risk <= eps + 3se", ok, "; ".join(details))


def test_c02_type_one_error(report):
    T = detector_T(N, S, EPS)
    mu = mu_upper_thm1(BoundInputs(N, S, p=0.2, epsilon=EPS))
    spec = ExperimentSpec(DynamicsConfig(N, S, 0.2, mu), 2 * T, EPS, "adaptive-stt", 1000, master_seed=200)
    alarms = sum(run_trial(spec, "null", i) for i in range(spec.trials))
    fpr = alarms / spec.trials
    se = rate_se(fpr, spec.trials)
    report("c02 null FPR <= eps + 3se", fpr <= EPS + 3 * se, f"fpr={fpr:.4f} se={se:.4f} over 1000 trials")


def _stt_rate(schedule, rows, verdict) -> float:
    hits = 0
    for row in rows:
        it = iter(row)
        hits += run_stt(schedule, lambda: next(it), schedule.k).verdict is verdict
    return hits / len(rows)


def test_c03_stt_calibration(report):
    T, eps, runs = 20, 0.2, 100_000
    sch = make_schedule(T, eps)
    rng = np.random.default_rng(300)
    null_rate = _stt_rate(sch, rng.standard_normal((runs, sch.k)), SttVerdict.SIGNAL)
    ok = null_rate <= eps / T + 3 * rate_se(eps / T, runs)
    details = [f"k={sch.k} null Signal rate={null_rate:.5f}"]
    for j in (1, sch.k):
        mu = sch.thresholds[j - 1] + math.sqrt(2 * math.log(4 / eps))
        miss = _stt_rate(sch, rng.standard_normal((runs, sch.k)) + mu, SttVerdict.NO_SIGNAL)
        ok &= miss <= eps / 3 + 3 * rate_se(eps / 3, runs)
        details.append(f"j={j} mu={mu:.3f} NoSignal rate={miss:.5f}")
    report("c03 STT calibration", ok, "; ".join(details))


def test_c04_lemma2(report):
    q, se = lemma2_mc_check(1000, 0.05, C_LEMMA2, trials=10_000, rng=np.random.default_rng(400))
    exact_p1 = lemma2_mc_check(1000, 1.0)
    exact_long = lemma2_mc_check(1000, 0.01)  # 2c/p > 1600 >= m
    ok = q > 0.25 - 3 * se and exact_p1 == (1.0, 0.0) and exact_long == (1.0, 0.0)
    report("c04 block-length event", ok, f"P={q:.4f} se={se:.4f}; p=1 -> {exact_p1[0]}; 2c/p>=m -> {exact_long[0]}")


def test_c05_miss_probability(report):
    exact, bound = miss_probability_bound(100, 5, 20)
    freq, se = miss_probability_mc(100, 5, 20, 10_000, np.random.default_rng(500))
    ok = (
        exact == pytest.approx(hypergeom_no_hit(100, 5, 20), rel=1e-12)
        and round(exact, 3) == 0.319
        and round(bound, 4) == 0.1216
        and exact >= bound
        and abs(freq - exact) <= 3 * se
    )
    report("c05 miss probability", ok, f"exact={exact:.5f} bound={bound:.5f} mc={freq:.4f}+-{se:.4f}")


def test_c06_likelihood_oracles(report):
    rng = np.random.default_rng(600)
    n, s, m = 5, 1, 6
    worst_rel, z_max = 0.0, 0.0
    for _ in range(50):
        p = float(rng.uniform())
        mu = float(rng.uniform(0.2, 2.0))
        probes = rng.integers(0, n, size=m)
        y = rng.standard_normal(m) + rng.uniform(0, 1) * mu
        ref = likelihood_ratio_enumerated(y, probes, n, s, p, mu)
        exact = lr_exact_1sparse(y, probes, n, p, mu).value
        worst_rel = max(worst_rel, abs(exact - ref) / ref)
        for q, target in ((p, exact), (1.0, lr_exact_p1(y, probes, n, s, mu).value)):
            est = lr_nested_mc(y, probes, DynamicsConfig(n, s, q, mu), 20_000, rng)
            z_max = max(z_max, abs(est.value - target) / est.se)
    # null mean of L for a fixed design
    probes = rng.integers(0, n, size=m)
    p, mu = 0.4, 1.0
    ls = np.array([lr_exact_1sparse(rng.standard_normal(m), probes, n, p, mu).value for _ in range(10_000)])
    mean, se = ls.mean(), ls.std(ddof=1) / math.sqrt(ls.size)
    ok = worst_rel < 1e-12 and z_max <= 3.0 and abs(mean - 1.0) <= 3 * se
    report("c06 likelihood oracles", ok,
           f"max rel err={worst_rel:.2e}; max |z| nested={z_max:.2f}; E0[L]={mean:.4f}+-{se:.4f}")


def _overlap(a, b) -> bool:
    lo_a, hi_a = a.error_bar
    lo_b, hi_b = b.error_bar
    return lo_a <= hi_b and lo_b <= hi_a


def _by_t(points):
    table = {}
    for pt in points:
        table.setdefault(pt.t_scale, {})[pt.p] = pt
    return dict(sorted(table.items()))


@pytest.fixture(scope="module")
def left_panel():
    return _by_t(figure3_sweep("left", n=500, s=5, epsilon=EPS, seed=0))


@pytest.fixture(scope="module")
def right_panel():
    return _by_t(figure3_sweep("right", n=500, s=5, epsilon=EPS, seed=0))


def test_c07a_left_panel_starts_at_half(report, left_panel):
    first = left_panel[0.0]
    report("c07a bound = 1/2 at t=0", all(pt.bound == 0.5 for pt in first.values()),
           " ".join(f"p={p}:{pt.bound}" for p, pt in first.items()))


def test_c07b_left_panel_curves_overlap(report, left_panel):
    bad = []
    for t, row in left_panel.items():
        for a, b in itertools.combinations(row.values(), 2):
            if not _overlap(a, b):
                bad.append(f"t={t:.1f} p={a.p}:{a.bound:.4f}+-{2 * a.se:.4f} vs p={b.p}:{b.bound:.4f}+-{2 * b.se:.4f}")
    report("c07b left curves pairwise overlap", not bad, f"{len(bad)} disjoint pairs" + (": " + "; ".join(bad[:4]) if bad else ""))


def test_c07c_left_panel_stays_positive(report, left_panel):
    last_t = max(left_panel)
    last = left_panel[last_t]
    positive = all(pt.error_bar[0] > 0 for pt in last.values())
    crosses = all(left_panel[0.0][p].bound > 0.05 > pt.bound for p, pt in last.items())
    report("c07c left bound positive at largest t", positive and crosses,
           f"t={last_t}: " + " ".join(f"p={p}:{pt.bound:.4f}+-{2 * pt.se:.4f}" for p, pt in last.items()))


def test_c08a_right_panel_separates(report, right_panel):
    sep = [
        (t, a.p, b.p)
        for t, row in right_panel.items()
        for a, b in itertools.combinations(row.values(), 2)
        if not _overlap(a, b)
    ]
    report("c08a right curves separate somewhere", bool(sep), f"{len(sep)} disjoint pairs, first {sep[:1]}")


def test_c08b_right_panel_p1_fastest(report, right_panel):
    # p=1 must be lowest at every t, or tied within bars with anything lower
    bad = [
        f"t={t:.1f} p=1:{row[1.0].bound:.4f} > p={q.p}:{q.bound:.4f}"
        for t, row in right_panel.items()
        for q in row.values()
        if q.bound < row[1.0].bound and not _overlap(q, row[1.0])
    ]
    report("c08b right p=1 descends fastest or ties", not bad, f"{len(bad)} violations" + (": " + "; ".join(bad[:3]) if bad else ""))


def test_c09_global_sum_power(report):
    n, s, m = 100, 10, 2500
    mu = 3 * n / (math.sqrt(m) * s)
    spec = ExperimentSpec(DynamicsConfig(n, s, 0.5, mu), m, EPS, "global-sum", 10_000, master_seed=900)
    est = estimate_risk(spec)
    power, target = 1.0 - est.fnr, stats.norm.cdf(3 - stats.norm.isf(EPS))
    report("c09 global sum power", abs(power - target) <= 0.02, f"power={power:.4f} target={target:.4f} fpr={est.fpr:.4f}")


def test_c10_bound_evaluators(report):
    mpmath.mp.dps = 50
    rows, ok = [], True
    for name, got, ref, shown in SPOT_VALUES:
        v, r = got(), ref()
        good = mpmath.nstr(mpmath.mpf(v), 4) == mpmath.nstr(r, 4) and abs(v - float(r)) <= 5e-5 * abs(float(r))
        good &= round(v, len(str(shown).split(".")[1])) == shown
        ok &= good
        rows.append(f"{name}={v:.6g}")
    raised = 0
    grid = np.linspace(1e-6, 1 / (2 * math.e), 400)
    for eps in grid:
        try:
            mu_lower_na_p0(BoundInputs(1024, 4, 1024, 0.0, float(eps)), "theorem-literal")
        except BoundDomainError:
            raised += 1
    ok &= raised == grid.size
    report("c10 bound evaluators", ok, " ".join(rows) + f"; literal variant raised {raised}/{grid.size}")
