import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from haystack.nonadaptive import (
    DesignKind,
    SensingDesign,
    design_to_csv,
    global_sum_test,
    make_subsample_design,
    make_uniform_design,
    subsample_components,
    subsample_max_test,
)


def test_one_each_full_is_permutation():
    d = make_subsample_design(10, 2, 10, 0.05, 0)
    assert sorted(d.probes) == list(range(10)) and d.kind is DesignKind.ONE_EACH


def test_component_count_presets():
    B = subsample_components(5000, 9, 0.05)
    assert B == math.ceil(math.log(20) * 5000 / 9) == 1665
    d = make_subsample_design(5000, 9, None, 0.05, 1)
    assert d.m == B and len(set(d.probes)) == B


def test_block_design_presets():
    d = make_subsample_design(5000, 9, 5000, 0.05, 2, blocks=True)
    assert d.block_length == 3 and d.m == 4995
    heads = d.probes[::3]
    assert len(set(heads)) == 1665
    assert all(d.probes[i] == heads[i // 3] for i in range(d.m))
    assert d.groups(np.zeros(d.m)).shape == (1665, 3)


def test_design_errors():
    with pytest.raises(ValueError):
        make_subsample_design(10, 2, 11, 0.05, 0)
    with pytest.raises(ValueError):
        make_subsample_design(100, 10, 20, 0.05, 0, blocks=True)  # m < B = 30
    with pytest.raises(ValueError):
        make_subsample_design(10, 1, 100, 0.01, 0, blocks=True)  # B > n
    with pytest.raises(ValueError):
        SensingDesign((0, 0), DesignKind.ONE_EACH, 5)
    with pytest.raises(ValueError):
        SensingDesign((0, 0, 1), DesignKind.BLOCK, 5, block_length=2)
    with pytest.raises(ValueError):
        SensingDesign((0, 1, 1, 1), DesignKind.BLOCK, 5, block_length=2)
    with pytest.raises(ValueError):
        SensingDesign((0, 7), n=5)
    with pytest.raises(ValueError):
        make_uniform_design(5, 0, 0)


def test_design_is_pure_function_of_seed():
    a = make_subsample_design(100, 5, None, 0.05, 42)
    b = make_subsample_design(100, 5, None, 0.05, 42)
    assert a == b
    assert make_uniform_design(50, 30, 1) == make_uniform_design(50, 30, 1)


def test_uniform_design_marginals():
    d = make_uniform_design(5, 50_000, 3)
    counts = np.bincount(d.as_array(), minlength=5)
    assert stats.chisquare(counts).pvalue > 0.001


def test_design_csv():
    text = design_to_csv(SensingDesign((3, 1, 4), n=5))
    assert text.splitlines() == ["t,a", "1,3", "2,1", "3,4"]


def test_global_sum_null_rate():
    rng = np.random.default_rng(0)
    trials = 100_000
    y = rng.standard_normal((trials, 20))
    rate = np.mean([global_sum_test(row, 0.05).decision for row in y])
    assert abs(rate - 0.05) < 3 * math.sqrt(0.05 * 0.95 / trials)


def test_global_sum_power_oracle():
    # uniform probes hit i.i.d. with probability s/n, so the statistic is a
    # Gaussian mixture with mean sqrt(m) s mu / n
    n, s, m, eps = 100, 10, 900, 0.05
    mu = 3 * n / (math.sqrt(m) * s)
    rng = np.random.default_rng(1)
    trials = 10_000
    hits = rng.random((trials, m)) < s / n
    y = rng.standard_normal((trials, m)) + mu * hits
    power = np.mean([global_sum_test(row, eps).decision for row in y])
    target = stats.norm.cdf(3 - stats.norm.isf(eps))
    assert target == pytest.approx(0.912, abs=5e-4)
    assert abs(power - target) < 3 * math.sqrt(target * (1 - target) / trials) + 0.005


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_global_sum_permutation_invariant(y, rnd):
    z = list(y)
    rnd.shuffle(z)
    a, b = global_sum_test(y, 0.1), global_sum_test(z, 0.1)
    assert a.statistic == pytest.approx(b.statistic, rel=1e-9, abs=1e-9)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.floats(-10, 10))
def test_global_sum_shift(y, c):
    a = global_sum_test(y, 0.1).statistic
    b = global_sum_test(np.asarray(y) + c, 0.1).statistic
    assert b - a == pytest.approx(c * math.sqrt(len(y)), rel=1e-7, abs=1e-7)


def test_global_sum_empty():
    with pytest.raises(ValueError):
        global_sum_test([], 0.1)


def test_subsample_null_rate_and_union_bound():
    n, s, eps = 100, 10, 0.05
    B, r = subsample_components(n, s, eps), 3
    m = B * r
    res = subsample_max_test(np.zeros((B, r)), n, s, m, eps)
    theta = res.threshold
    assert B * stats.norm.sf(theta * math.sqrt(r)) <= eps
    rng = np.random.default_rng(2)
    trials = 10_000
    rate = np.mean([subsample_max_test(rng.standard_normal((B, r)), n, s, m, eps).decision for _ in range(trials)])
    assert rate <= eps + 3 * math.sqrt(eps * (1 - eps) / trials)


def test_subsample_single_signal_group():
    n, s, eps, B, r = 100, 10, 0.05, 30, 3
    theta = subsample_max_test(np.zeros((B, r)), n, s, B * r, eps).threshold
    rng = np.random.default_rng(3)
    trials = 5000
    det = 0
    for _ in range(trials):
        g = rng.standard_normal((B, r))
        g[0] += 2 * theta
        det += subsample_max_test(g, n, s, B * r, eps).decision
    assert det / trials >= stats.norm.cdf(theta * math.sqrt(r)) - 3 * math.sqrt(0.25 / trials)


def test_subsample_single_group_is_z_test():
    y = np.array([[0.3, 1.1, 0.8, 2.0]])
    res = subsample_max_test(y, 10, 1, 4, 0.05)
    assert res.statistic == pytest.approx(y.mean())
    assert res.threshold == pytest.approx(math.sqrt(2 * math.log(20) / 4))


def test_subsample_literal_threshold():
    res = subsample_max_test(np.zeros((30, 3)), 100, 10, 90, 0.05, literal=True)
    assert res.threshold == pytest.approx(math.sqrt(100 / 900 * math.log(10)))


def test_subsample_ragged_groups():
    with pytest.raises(ValueError):
        subsample_max_test([[1.0, 2.0], [3.0]], 10, 1, 3, 0.05)
    with pytest.raises(ValueError):
        subsample_max_test(np.zeros((3, 0)), 10, 1, 3, 0.05)


def test_result_json():
    res = global_sum_test([1.0, 2.0], 0.05)
    d = json.loads(res.to_json())
    assert d == {"statistic": res.statistic, "threshold": res.threshold, "decision": 1}
    assert int(res) == 1
