import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lrfield.errors import ConfigError, DomainError, ResourceError
from lrfield.study import (
    FactorCache,
    FitError,
    StudyConfig,
    boxplot_summary,
    fit_log_rate,
    ks_statistic,
    run_study,
)


def test_ks_examples():
    assert ks_statistic([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert ks_statistic([1, 2], [3, 4]) == 1.0
    assert ks_statistic([1, 3], [2, 4]) == 0.5
    with pytest.raises(DomainError):
        ks_statistic([], [1.0])


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(-20, 20), min_size=1, max_size=40),
    st.lists(st.integers(-20, 20), min_size=1, max_size=40),
)
def test_ks_matches_scipy(a, b):
    d = ks_statistic(a, b)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(stats.ks_2samp(a, b, method="asymp").statistic, abs=1e-12)
    assert d == ks_statistic(b, a)


def test_box_examples():
    assert boxplot_summary([1, 2, 3, 4, 5]) == (b := boxplot_summary([5, 4, 3, 2, 1]))
    assert (b.min, b.q1, b.median, b.q3, b.max) == (1, 2, 3, 4, 5)
    e = boxplot_summary([2.5] * 7)
    assert e.min == e.q1 == e.median == e.q3 == e.max == 2.5
    f = boxplot_summary([1, 2, 3, 4])
    assert (f.q1, f.median, f.q3) == (1.75, 2.5, 3.25)
    with pytest.raises(ConfigError):
        boxplot_summary([])


@settings(max_examples=40)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_box_ordered(v):
    b = boxplot_summary(v)
    assert b.min <= b.q1 <= b.median <= b.q3 <= b.max


GRID = np.arange(200.0, 3001.0, 200.0)


def test_fit_recovers_exact_line():
    d = np.tile(np.exp(-1.512 - 0.000576 * GRID), (5, 1))
    fit = fit_log_rate(d, GRID)
    assert fit.intercept == pytest.approx(-1.512, abs=1e-10)
    assert fit.slope == pytest.approx(-0.000576, abs=1e-10)
    assert fit.n_points == d.size and fit.excluded_zeros == 0


def test_fit_constant():
    fit = fit_log_rate(np.full((4, GRID.size), 0.2), GRID)
    assert fit.slope == pytest.approx(0.0, abs=1e-15)
    assert fit.slope_se == pytest.approx(0.0, abs=1e-15)


def test_fit_noisy():
    rng = np.random.default_rng(99)
    r = np.linspace(20, 120, 200)
    d = np.exp(-0.0006 * r + rng.normal(0, 0.1, r.size))
    fit = fit_log_rate(d[None, :], r)
    assert abs(fit.slope + 0.0006) < 3 * fit.slope_se
    ref = stats.linregress(r, np.log(d))
    assert fit.slope == pytest.approx(ref.slope, rel=1e-10)
    assert fit.slope_se == pytest.approx(ref.stderr, rel=1e-10)


def test_fit_zeros_and_errors():
    d = np.array([[0.1, 0.0, 0.05], [0.2, 0.1, 0.0]])
    fit = fit_log_rate(d, [1.0, 2.0, 3.0])
    assert fit.excluded_zeros == 2 and fit.n_points == 4
    with pytest.raises(FitError):
        fit_log_rate([[0.1, 0.0, 0.0]], [1.0, 2.0, 3.0])
    with pytest.raises(FitError):
        fit_log_rate([[0.1], [0.2], [0.3]], [5.0])


def test_fit_permutation_invariant():
    rng = np.random.default_rng(5)
    d = rng.uniform(0.01, 0.2, size=(20, 6))
    grid = [20, 40, 60, 80, 100, 120]
    a = fit_log_rate(d, grid)
    b = fit_log_rate(d[rng.permutation(20)], grid)
    assert a.slope == pytest.approx(b.slope, rel=1e-12)
    assert a.intercept == pytest.approx(b.intercept, rel=1e-12)
    assert a.slope_se == pytest.approx(b.slope_se, rel=1e-12)


def test_config_validation():
    StudyConfig()
    assert StudyConfig(radii=(20, 40)).reference_radius == pytest.approx(160 / 3)
    bad = [
        dict(radii=(20, 40), reference_radius=40),
        dict(radii=(40, 20)),
        dict(radii=(20, 20, 40)),
        dict(radii=()),
        dict(replicates=49),
        dict(repeats=0),
        dict(alpha=1.5),
        dict(surface="torus"),
        dict(weight="tent"),
        dict(seed=-3),
        dict(workers=0),
    ]
    for kw in bad:
        with pytest.raises(ConfigError):
            StudyConfig(**kw)
    with pytest.raises(ConfigError):
        StudyConfig(g="H3").functional_config()
    StudyConfig(radii=(20,), reference_radius=20, self_test=True)


def small(**kw):
    base = dict(radii=(5.0, 10.0), reference_radius=12.0, replicates=60, repeats=3, points_density=0.3, seed=7)
    base.update(kw)
    return StudyConfig(**base)


def test_small_study_shape_and_metadata():
    seen = []
    res = run_study(small(), progress=lambda k, n: seen.append((k, n)))
    assert res.distances.shape == (3, 2)
    assert np.all((res.distances >= 0) & (res.distances <= 1))
    assert seen[-1] == (6, 6) and len(seen) == 6
    assert len(res.boxes) == 2 and res.rate_fit is not None
    meta = res.metadata
    assert meta["master_seed"] == 7
    assert set(meta["point_counts"]) == {"5", "10", "12"}
    assert all(v == 0.0 for v in meta["jitter"].values())
    np.testing.assert_array_equal(res.medians, np.median(res.distances, axis=0))


def test_study_determinism_across_workers():
    a = run_study(small())
    b = run_study(small(workers=3))
    c = run_study(small(), cache=FactorCache())
    assert np.array_equal(a.distances, b.distances)
    assert np.array_equal(a.distances, c.distances)
    assert not np.array_equal(a.distances, run_study(small(seed=8)).distances)


def test_weight_streams():
    a = run_study(small(weight="sphere_weight", share_fields=True))
    b = run_study(small(weight="constant_one", share_fields=True))
    c = run_study(small(weight="constant_one"))
    # shared fields with different weights give different but correlated statistics
    assert not np.array_equal(a.distances, b.distances)
    assert not np.array_equal(b.distances, c.distances)


def test_self_test_mode():
    res = run_study(StudyConfig(radii=(8.0,), reference_radius=8.0, replicates=50, repeats=2,
                                points_density=0.3, self_test=True))
    assert np.all(res.distances == 0.0)
    assert res.rate_fit is None


def test_resource_check_precedes_simulation():
    calls = []
    with pytest.raises(ResourceError):
        run_study(small(max_points=100), progress=lambda k, n: calls.append(k))
    assert calls == []


def test_cube_study():
    res = run_study(small(surface="cube", weight="cube_weight"))
    assert res.distances.shape == (3, 2)
    assert np.all(np.isfinite(res.distances))
