import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from lrfield.covariance import CovarianceModel, cov
from lrfield.errors import ConfigError, NumericError, ResourceError
from lrfield.simulation import (
    SeedPolicy,
    check_size,
    covariance_matrix,
    factorize,
    simulate,
    simulate_values,
    standard_normals,
)
from lrfield.surfaces import SurfaceCloud, SurfaceSpec, sphere_points

M = CovarianceModel(2 / 3, 3)


def raw_cloud(points, r=1.0):
    pts = np.asarray(points, dtype=np.float64)
    return SurfaceCloud(SurfaceSpec("sphere", r), pts, 4 * math.pi * r * r)


def test_covariance_matrix_diagonal_and_symmetry():
    c = covariance_matrix(M, sphere_points(3.0, 300))
    assert np.all(np.diag(c) == 1.0)
    assert np.array_equal(c, c.T)
    cf = covariance_matrix(M, sphere_points(3.0, 300), order="F")
    assert np.array_equal(c, cf)


def test_covariance_matrix_antipodal():
    c = covariance_matrix(M, raw_cloud([[0, 0, 1], [0, 0, -1]]))
    assert c[0, 1] == pytest.approx(5 ** (-1 / 3), rel=1e-15)


def test_covariance_matrix_entries(rng):
    cloud = sphere_points(5.0, 80)
    c = covariance_matrix(M, cloud)
    i, j = rng.integers(0, 80, size=(2, 50))
    dist = np.linalg.norm(cloud.points[i] - cloud.points[j], axis=1)
    np.testing.assert_allclose(c[i, j], cov(M, dist), rtol=1e-13)


def test_single_point_is_standard_normal():
    cloud = raw_cloud([[0, 0, 1]])
    v = simulate_values(factorize(M, cloud), SeedPolicy(7), 100_000)[:, 0]
    assert v.var() == pytest.approx(1.0, abs=0.02)
    assert abs(v.mean()) < 4 / math.sqrt(v.size)


def test_pair_correlation():
    cloud = raw_cloud([[0, 0, 0.0], [math.sqrt(3), 0, 0]])
    v = simulate_values(factorize(M, cloud), SeedPolicy(11), 100_000)
    assert np.corrcoef(v.T)[0, 1] == pytest.approx(4 ** (-1 / 3), abs=0.01)


def test_marginals_and_pair_covariance():
    cloud = sphere_points(10.0, 60)
    n_reps = 100_000
    v = simulate_values(factorize(M, cloud), SeedPolicy(3), n_reps)
    N = v.size
    assert abs(v.mean()) < 4 / math.sqrt(N) * 10  # correlated points inflate the SE
    pooled_var = v.var()
    assert pooled_var == pytest.approx(1.0, abs=3 * math.sqrt(2 / n_reps) * 3)
    b = cov(M, np.linalg.norm(cloud.points[0] - cloud.points[17]))
    emp = float(np.mean(v[:, 0] * v[:, 17]))
    se = math.sqrt((1 + b * b) / n_reps)
    assert abs(emp - b) < 3 * se


def test_determinism():
    cloud = sphere_points(2.0, 40)
    f = factorize(M, cloud)
    a = simulate_values(f, SeedPolicy(42), 3)
    b = simulate_values(factorize(M, cloud), SeedPolicy(42), 3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, simulate_values(f, SeedPolicy(43), 3))


def test_batching_independence():
    f = factorize(M, sphere_points(2.0, 40))
    s = SeedPolicy(5, (1, 2))
    whole = simulate_values(f, s, 10)
    parts = np.vstack([simulate_values(f, s, 4), simulate_values(f, s, 6, start=4)])
    assert np.array_equal(whole, parts)
    assert np.array_equal(whole[7], simulate_values(f, s, 1, start=7)[0])


def test_thread_independence():
    f = factorize(M, sphere_points(2.0, 40))
    s = SeedPolicy(9)
    serial = [simulate_values(f, s, 1, start=k)[0] for k in range(16)]
    with ThreadPoolExecutor(4) as pool:
        par = list(pool.map(lambda k: simulate_values(f, s, 1, start=k)[0], reversed(range(16))))
    assert all(np.array_equal(a, b) for a, b in zip(serial, reversed(par)))


def test_seed_paths_distinct():
    a = standard_normals(SeedPolicy(1, (1, 1)), 5, 2)
    b = standard_normals(SeedPolicy(1, (1, 2)), 5, 2)
    c = standard_normals(SeedPolicy(1).child(1, 1), 5, 2)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, c)
    assert not np.array_equal(a[:, 0], a[:, 1])


def test_seed_validation():
    for bad in (-1, 2**64, 1.5):
        with pytest.raises(ConfigError):
            SeedPolicy(bad)
    SeedPolicy(2**64 - 1)


def test_simulate_realizations():
    cloud = sphere_points(2.0, 30)
    reps = simulate(M, cloud, SeedPolicy(8), 3)
    assert len(reps) == 3
    assert all(r.values.shape == (30,) and np.all(np.isfinite(r.values)) for r in reps)
    assert reps[1].replicate == 1 and reps[1].cloud_id == cloud.cloud_id and reps[1].seed == 8
    with pytest.raises(ConfigError):
        simulate_values(factorize(M, cloud), SeedPolicy(8), 0)


def test_factor_reproduces_covariance():
    cloud = sphere_points(4.0, 100)
    f = factorize(M, cloud)
    assert f.jitter == 0.0
    np.testing.assert_allclose(f.lower @ f.lower.T, covariance_matrix(M, cloud), atol=1e-12)
    assert np.all(np.triu(f.lower, 1) == 0)


def test_jitter_rescues_duplicates():
    pts = np.array([[0, 0, 1.0], [0, 0, 1.0], [1.0, 0, 0]])
    f = factorize(M, raw_cloud(pts))
    assert f.jitter > 0


def test_factorization_failure_names_pivot():
    pts = np.array([[0, 0, 1.0], [0, 0, 1.0], [1.0, 0, 0]])
    with pytest.raises(NumericError, match="pivot 2"):
        factorize(M, raw_cloud(pts), jitter_ladder=(0.0,))


def test_size_guard():
    check_size(100, 100)
    with pytest.raises(ResourceError):
        check_size(101, 100)
    with pytest.raises(ResourceError):
        factorize(M, sphere_points(1.0, 50), max_points=10)
