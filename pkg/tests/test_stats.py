import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps
from scipy.integrate import trapezoid

from ncbmarket.stats import (
    DegenerateSampleError,
    kde_points,
    kolmogorov_sf,
    ks_asymptotic_p,
    ks_normal_test,
    ks_statistic,
    normal_sf,
    silverman_bandwidth,
    z_from_summary,
    z_test_greater,
    z_test_positive_mean,
)


def brute_force_d(x):
    x = sorted(x)
    n = len(x)
    m, sd = np.mean(x), np.std(x, ddof=1)
    gaps = []
    for i, v in enumerate(x):
        F = sps.norm.cdf((v - m) / sd)
        gaps += [(i + 1) / n - F, F - i / n]
    return max(gaps)


def test_ks_statistic_matches_enumeration():
    x = [0.3, -1.2, 2.2, 0.8, 0.1, -0.4, 1.5, -2.0, 0.05]
    assert ks_statistic(x) == pytest.approx(brute_force_d(x), abs=1e-14)


def test_ks_statistic_matches_statsmodels_lilliefors():
    from statsmodels.stats.diagnostic import lilliefors

    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.normal(size=60)
        d, p = lilliefors(x, dist="norm", pvalmethod="table")
        rep = ks_normal_test(x)
        assert rep.statistic == pytest.approx(d, abs=1e-12)
        assert abs(rep.p_value - p) < 0.03 or (p > 0.2 and rep.p_value > 0.15)


def test_kolmogorov_sf_matches_scipy():
    for lam in (0.3, 0.5, 0.8, 1.0, 1.36, 2.0, 3.0):
        assert kolmogorov_sf(lam) == pytest.approx(sps.kstwobign.sf(lam), abs=1e-12)
    assert ks_asymptotic_p(0.0, 10) == 1.0


def test_ks_power_against_uniform():
    rng = np.random.default_rng(1)
    rejections = sum(ks_normal_test(rng.uniform(size=100)).reject for _ in range(200))
    assert rejections / 200 > 0.5
    big = sum(ks_normal_test(rng.uniform(size=400)).reject for _ in range(100))
    assert big / 100 > 0.95


def test_ks_degenerate():
    with pytest.raises(DegenerateSampleError):
        ks_normal_test([1.0] * 20)
    with pytest.raises(DegenerateSampleError):
        ks_normal_test([1.0, 2.0])


def test_z_identical_samples():
    x = [1.0, 2.0, 3.0, 4.0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = z_test_greater(x, x)
    assert rep.statistic == 0 and rep.p_value == 0.5


def test_z_hand_computation():
    # ā=1.2, b̄=1.0, sd 0.5, n=100 each: z = 0.2 / sqrt(0.0025 + 0.0025)
    rng = np.random.default_rng(2)
    base = rng.normal(size=100)
    base = (base - base.mean()) / base.std(ddof=1) * 0.5
    rep = z_test_greater(base + 1.2, base + 1.0)
    assert rep.statistic == pytest.approx(2.828, abs=1e-3)
    assert rep.p_value == pytest.approx(0.00234, abs=1e-5)


def test_z_warns_on_small_samples():
    with pytest.warns(UserWarning):
        z_test_positive_mean([1.0, 2.0, 3.0])


def test_z_from_summary_table_anchor():
    rep = z_from_summary(995.20, 475.24, 100)
    assert rep.statistic == pytest.approx(20.94, abs=0.01)
    assert rep.p_value < 1e-90


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=30, max_size=60).filter(lambda v: np.std(v) > 1e-3))
def test_z_sign_flip(d):
    p = z_test_positive_mean(d).p_value
    q = z_test_positive_mean([-x for x in d]).p_value
    assert p + q == pytest.approx(1.0, abs=1e-12)


def test_z_monotone_in_mean():
    rng = np.random.default_rng(3)
    b = rng.normal(size=50)
    a = rng.normal(size=50)
    ps = [z_test_greater(a + shift, b).p_value for shift in np.linspace(-1, 1, 21)]
    assert all(x > y for x, y in zip(ps, ps[1:]))
    assert z_test_positive_mean(np.array([-1.0, 1.0] * 20)).p_value == 0.5


def test_normal_sf_tail():
    assert normal_sf(0) == 0.5
    assert normal_sf(20.9) == pytest.approx(sps.norm.sf(20.9), rel=1e-10)


def test_kde_properties():
    rng = np.random.default_rng(4)
    x = rng.normal(size=150)
    sym = np.concatenate([x, -x])
    pts = np.array(kde_points(sym, 201))
    assert np.max(np.abs(pts[:, 1] - pts[::-1, 1])) < 1e-9
    assert trapezoid(pts[:, 1], pts[:, 0]) == pytest.approx(1.0, abs=0.01)


def test_kde_bimodal_equal_peaks():
    cluster = np.linspace(-1, 1, 25)
    pts = np.array(kde_points(np.concatenate([cluster - 20, cluster + 20]), 401))
    left = pts[pts[:, 0] < 0, 1].max()
    right = pts[pts[:, 0] > 0, 1].max()
    assert left == pytest.approx(right, rel=1e-6)
    assert pts[np.argmin(np.abs(pts[:, 0])), 1] < 0.5 * left


def test_silverman_matches_formula():
    x = np.random.default_rng(5).normal(size=80)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    assert silverman_bandwidth(x) == pytest.approx(0.9 * min(x.std(ddof=1), iqr / 1.34) * 80 ** -0.2)
