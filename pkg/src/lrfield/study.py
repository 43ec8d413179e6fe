"""Kolmogorov-distance convergence study of X_{r,G} toward the large-radius proxy X_{R,G}.

Every (repeat, radius) cell is an independent task. A task simulates ``N``
fields on the radius-``r`` cloud and ``N`` fresh fields on the reference cloud,
maps both to functional values and records their two-sample KS distance.
Seed streams are addressed by ``(surface, weight, repeat, radius index,
role)``, so the result is a pure function of the configuration and the master
seed, whatever the worker count or completion order.
"""
from __future__ import annotations

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .covariance import CovarianceModel
from .errors import ConfigError, DomainError, NumericError
from .functionals import FunctionalConfig, WeightFunction, functional_values, weight_values
from .hermite import hermite_coeffs
from .simulation import DEFAULT_MAX_POINTS, CholeskyFactor, SeedPolicy, check_size, factorize, simulate_values
from .surfaces import DEFAULT_POINTS_DENSITY, SurfaceCloud, cloud_for_density, points_for_density

log = logging.getLogger(__name__)

_SURFACE_CODE = {"sphere": 1, "cube": 2}
_WEIGHT_CODE = {"constant_one": 1, "sphere_weight": 2, "cube_weight": 3, "custom_harmonic": 4}
ROLE_SAMPLE, ROLE_REFERENCE = 0, 1


class FitError(NumericError):
    """Too few usable points for the log-rate regression."""


def ks_statistic(sample1, sample2) -> float:
    """Two-sample Kolmogorov distance sup_z |F1(z) - F2(z)| of the empirical CDFs."""
    a = np.sort(np.asarray(sample1, dtype=np.float64))
    b = np.sort(np.asarray(sample2, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise DomainError("KS statistic needs two non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


@dataclass(frozen=True)
class BoxSummary:
    min: float
    q1: float
    median: float
    q3: float
    max: float


def boxplot_summary(values) -> BoxSummary:
    """Five-number summary; quartiles interpolate linearly between order statistics."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ConfigError("box summary of an empty sample")
    q = np.percentile(v, [0, 25, 50, 75, 100], method="linear")
    return BoxSummary(*(float(x) for x in q))


@dataclass(frozen=True)
class RateFit:
    intercept: float
    slope: float
    slope_se: float
    n_points: int
    excluded_zeros: int


def fit_log_rate(distances, grid: Sequence[float]) -> RateFit:
    """OLS of log(distance) on r, pooled over repeats.

    ``distances`` is a (repeats, len(grid)) array or a :class:`StudyResult`.
    Zero distances are dropped and counted.
    """
    if isinstance(distances, StudyResult):
        distances = distances.distances
    d = np.atleast_2d(np.asarray(distances, dtype=np.float64))
    r = np.broadcast_to(np.asarray(grid, dtype=np.float64), d.shape)
    keep = d > 0
    x, y = r[keep], np.log(d[keep])
    excluded = int((~keep).sum())
    if x.size < 3 or np.ptp(x) == 0:
        raise FitError(f"need at least 3 positive distances over 2+ radii, got {x.size}")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - intercept - slope * x
    sigma2 = float(np.sum(resid**2)) / (x.size - 2)
    return RateFit(intercept, slope, math.sqrt(sigma2 / sxx), int(x.size), excluded)


@dataclass(frozen=True)
class StudyConfig:
    surface: str = "sphere"
    weight: str = "constant_one"
    alpha: float = 2.0 / 3.0
    kappa: int = 2
    g: str = "H2"
    radii: tuple = (20.0, 40.0, 60.0, 80.0, 100.0, 120.0)
    reference_radius: float | None = None
    replicates: int = 500
    repeats: int = 20
    points_density: float = DEFAULT_POINTS_DENSITY
    seed: int = 0
    workers: int = 1
    d: int = 3
    max_points: int = DEFAULT_MAX_POINTS
    share_fields: bool = False
    self_test: bool = False

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if self.reference_radius is None:
            object.__setattr__(self, "reference_radius", 4.0 / 3.0 * max(self.radii) if self.radii else None)
        self.validate()

    def validate(self) -> None:
        if self.surface not in _SURFACE_CODE:
            raise ConfigError(f"unknown surface {self.surface!r}", key="surface")
        if self.weight not in _WEIGHT_CODE:
            raise ConfigError(f"unknown weight {self.weight!r}", key="weight")
        if not self.radii:
            raise ConfigError("radius grid is empty", key="radii")
        if any(r <= 0 for r in self.radii):
            raise ConfigError("radii must be positive", key="radii")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ConfigError("radii must be distinct and increasing", key="radii")
        R = self.reference_radius
        if self.self_test:
            if R < max(self.radii):
                raise ConfigError("reference_radius must be >= max(radii)", key="reference_radius")
        elif not R > max(self.radii):
            raise ConfigError(f"reference_radius {R} must exceed max(radii) = {max(self.radii)}",
                              key="reference_radius")
        if int(self.replicates) != self.replicates or self.replicates < 50:
            raise ConfigError(f"replicates must be an integer >= 50, got {self.replicates!r}", key="replicates")
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise ConfigError(f"repeats must be a positive integer, got {self.repeats!r}", key="repeats")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}", key="workers")
        if not self.points_density > 0:
            raise ConfigError("points_density must be positive", key="points_density")
        if not 0 < self.kappa * self.alpha < self.d - 1:
            raise ConfigError(
                f"alpha={self.alpha:.6g} with kappa={self.kappa} violates 0 < kappa*alpha < d-1 = {self.d - 1}",
                key="alpha",
            )
        SeedPolicy(self.seed)

    def functional_config(self) -> FunctionalConfig:
        spec = hermite_coeffs(self.g, jmax=max(10, self.kappa), rule_order=128)
        if spec.rank != self.kappa:
            raise ConfigError(f"kappa={self.kappa} but Hermite rank of {self.g!r} is {spec.rank}", key="kappa")
        return FunctionalConfig(CovarianceModel(self.alpha, self.d), spec, WeightFunction(self.weight))

    def point_counts(self) -> dict:
        radii = list(self.radii) + [self.reference_radius]
        return {r: points_for_density(self.surface, r, self.points_density) for r in radii}

    def seed_policy(self) -> SeedPolicy:
        weight_code = 0 if self.share_fields else _WEIGHT_CODE[self.weight]
        return SeedPolicy(self.seed, (_SURFACE_CODE[self.surface], weight_code))


@dataclass
class StudyResult:
    config: StudyConfig
    distances: np.ndarray  # (repeats, len(radii))
    boxes: list
    log_boxes: list
    rate_fit: RateFit | None
    metadata: dict = field(default_factory=dict)

    @property
    def radii(self) -> tuple:
        return self.config.radii

    @property
    def medians(self) -> np.ndarray:
        return np.median(self.distances, axis=0)


class FactorCache:
    """Thread-safe memo of Cholesky factors keyed by cloud geometry and alpha."""

    def __init__(self, max_points: int = DEFAULT_MAX_POINTS):
        self.max_points = max_points
        self._factors: dict = {}
        self._clouds: dict = {}
        self._locks: dict = {}
        self._guard = threading.Lock()

    def get(self, model: CovarianceModel, kind: str, r: float, density: float) -> tuple[SurfaceCloud, CholeskyFactor]:
        key = (kind, float(r), float(density), model.alpha, model.d)
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._factors:
                cloud = cloud_for_density(kind, r, density)
                self._factors[key] = factorize(model, cloud, max_points=self.max_points)
                self._clouds[key] = cloud
            return self._clouds[key], self._factors[key]

    def jitters(self) -> dict:
        return {f.cloud_id: f.jitter for f in self._factors.values()}


def _task(cfg: StudyConfig, fcfg: FunctionalConfig, cache: FactorCache, seeds: SeedPolicy,
          m: int, i: int) -> float:
    r = cfg.radii[i]
    R = cfg.reference_radius
    N = cfg.replicates
    cloud, factor = cache.get(fcfg.model, cfg.surface, r, cfg.points_density)
    x = functional_values(fcfg, cloud, simulate_values(factor, seeds.child(m, i, ROLE_SAMPLE), N))
    ref_role = ROLE_SAMPLE if (cfg.self_test and R == r) else ROLE_REFERENCE
    ref_cloud, ref_factor = cache.get(fcfg.model, cfg.surface, R, cfg.points_density)
    y = functional_values(fcfg, ref_cloud, simulate_values(ref_factor, seeds.child(m, i, ref_role), N))
    return ks_statistic(x, y)


def run_study(cfg: StudyConfig, progress: Callable[[int, int], None] | None = None,
              cache: FactorCache | None = None) -> StudyResult:
    t0 = time.time()
    fcfg = cfg.functional_config()
    counts = cfg.point_counts()
    for r, n in counts.items():
        check_size(n, cfg.max_points, what=f"{cfg.surface} cloud at r={r:g}")
    cache = cache if cache is not None else FactorCache(cfg.max_points)
    seeds = cfg.seed_policy()
    M, K = cfg.repeats, len(cfg.radii)
    distances = np.full((M, K), np.nan)
    tasks = [(m, i) for m in range(M) for i in range(K)]
    done = 0

    def run_one(mi):
        m, i = mi
        try:
            return mi, _task(cfg, fcfg, cache, seeds, m, i)
        except NumericError as exc:
            raise NumericError(f"{cfg.surface} r={cfg.radii[i]:g}: {exc}") from exc

    if cfg.workers == 1:
        for mi in tasks:
            (m, i), val = run_one(mi)
            distances[m, i] = val
            done += 1
            if progress:
                progress(done, len(tasks))
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(run_one, mi) for mi in tasks]
            for fut in as_completed(futures):
                (m, i), val = fut.result()
                distances[m, i] = val
                done += 1
                if progress:
                    progress(done, len(tasks))

    boxes = [boxplot_summary(distances[:, i]) for i in range(K)]
    log_boxes = []
    for i in range(K):
        col = distances[:, i]
        pos = col[col > 0]
        log_boxes.append(boxplot_summary(np.log(pos)) if pos.size else None)
    try:
        fit = fit_log_rate(distances, cfg.radii)
    except FitError as exc:
        log.warning("rate fit skipped: %s", exc)
        fit = None
    meta = {
        "master_seed": cfg.seed,
        "seed_path": list(seeds.path),
        "point_counts": {f"{r:g}": n for r, n in counts.items()},
        "jitter": cache.jitters(),
        "excluded_zeros": int((distances <= 0).sum()),
        "wall_time_s": time.time() - t0,
        "workers": cfg.workers,
        "config": asdict(cfg),
    }
    return StudyResult(cfg, distances, boxes, log_boxes, fit, meta)
