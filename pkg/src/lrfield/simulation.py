"""Exact Gaussian field simulation on a SurfaceCloud.

The covariance matrix is factored once (lower Cholesky) and reused; each
replicate is ``L @ z`` for a standard normal vector ``z``.

Random streams are counter based: a :class:`SeedPolicy` hashes
``(master_seed, *path)`` into a 128-bit Philox key, and replicate ``k`` uses
the counter block whose top 64-bit word equals ``k``. Replicate ``k`` therefore
depends only on the master seed, the path and ``k`` -- never on how replicates
are batched or scheduled. Normals come from NumPy's ziggurat sampler, so bit
reproducibility holds for a fixed NumPy build.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import blas, lapack
from scipy.spatial.distance import cdist

from .covariance import CovarianceModel
from .errors import ConfigError, NumericError, ResourceError
from .surfaces import SurfaceCloud

log = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
# dense n x n float64 matrices; 16000 points is ~2 GB per matrix
DEFAULT_MAX_POINTS = 16000
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedPolicy:
    master_seed: int
    path: tuple = ()

    def __post_init__(self):
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed <= _MASK64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.master_seed!r}", key="seed")

    def child(self, *path: int) -> "SeedPolicy":
        return SeedPolicy(self.master_seed, self.path + tuple(int(p) for p in path))

    @property
    def key(self) -> np.ndarray:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=self.path)
        return ss.generate_state(2, dtype=np.uint64)

    def generator(self, replicate: int) -> np.random.Generator:
        counter = np.array([0, 0, 0, int(replicate)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=self.key))


@dataclass(frozen=True)
class FieldRealization:
    values: np.ndarray = field(repr=False)
    seed: int
    cloud_id: str
    replicate: int = 0
    stream: tuple = ()


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    lower: np.ndarray = field(repr=False)  # Fortran-ordered lower triangle
    jitter: float
    cloud_id: str

    @property
    def n(self) -> int:
        return self.lower.shape[0]


def check_size(n: int, max_points: int = DEFAULT_MAX_POINTS, what: str = "cloud") -> None:
    if n > max_points:
        gb = 2 * 8 * n * n / 1e9
        raise ResourceError(
            f"{what} has {n} points; dense simulation needs ~{gb:.1f} GB "
            f"(limit is {max_points} points)"
        )


def covariance_matrix(model: CovarianceModel, cloud: SurfaceCloud, order: str = "C") -> np.ndarray:
    """Dense matrix of ``cov(model, |p_i - p_j|)``; exactly symmetric with unit diagonal."""
    m = cdist(cloud.points, cloud.points, "sqeuclidean")
    if order == "F":
        m = np.asfortranarray(m)
    m += 1.0
    np.power(m, -model.alpha / 2.0, out=m)
    return m


def factorize(model: CovarianceModel, cloud: SurfaceCloud, max_points: int = DEFAULT_MAX_POINTS,
              jitter_ladder: Sequence[float] = JITTER_LADDER) -> CholeskyFactor:
    """Lower Cholesky factor, adding ``delta * I`` along the jitter ladder until it succeeds."""
    check_size(cloud.n, max_points, what=cloud.cloud_id)
    cmat = covariance_matrix(model, cloud, order="F")
    info = 0
    for delta in jitter_ladder:
        work = cmat.copy(order="F") if delta != jitter_ladder[-1] else cmat
        if delta:
            work[np.diag_indices_from(work)] += delta
        c, info = lapack.dpotrf(work, lower=1, clean=1, overwrite_a=1)
        if info == 0:
            if delta:
                log.warning("%s: covariance needed jitter %g", cloud.cloud_id, delta)
            return CholeskyFactor(c, float(delta), cloud.cloud_id)
        del work, c
    raise NumericError(
        f"Cholesky factorization of {cloud.cloud_id} failed even with jitter {jitter_ladder[-1]}: "
        f"pivot {info} (leading minor of order {info}) is not positive"
    )


def standard_normals(seeds: SeedPolicy, n: int, n_reps: int, start: int = 0) -> np.ndarray:
    """(n, n_reps) Fortran array; column j is replicate ``start + j``."""
    z = np.empty((n, n_reps), order="F")
    for j in range(n_reps):
        z[:, j] = seeds.generator(start + j).standard_normal(n)
    return z


def simulate_values(factor: CholeskyFactor, seeds: SeedPolicy, n_reps: int, start: int = 0) -> np.ndarray:
    """Field values as an array of shape (n_reps, n)."""
    if int(n_reps) != n_reps or n_reps < 1:
        raise ConfigError(f"n_reps must be a positive integer, got {n_reps!r}", key="replicates")
    z = standard_normals(seeds, factor.n, int(n_reps), start)
    y = blas.dtrmm(1.0, factor.lower, z, lower=1, overwrite_b=1)
    return y.T


def simulate(model: CovarianceModel, cloud: SurfaceCloud, seeds: SeedPolicy, n_reps: int,
             factor: CholeskyFactor | None = None) -> list[FieldRealization]:
    if factor is None:
        factor = factorize(model, cloud)
    values = simulate_values(factor, seeds, n_reps)
    return [
        FieldRealization(values[k].copy(), int(seeds.master_seed), cloud.cloud_id, k, seeds.path)
        for k in range(values.shape[0])
    ]
