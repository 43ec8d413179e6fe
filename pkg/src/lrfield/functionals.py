"""Weighted functionals of G(eta) on a surface and the least squares estimator.

Angles follow one fixed convention everywhere: polar angle ``theta`` measured
from +z in [0, pi], azimuth ``phi = atan2(y, x)`` mapped to [0, 2 pi).

For a cloud with cell weight ``area / n`` the normalized functional is

    X = c_r(d, alpha) * (area / n) * sum_p G(eta(p)) h_sp(p / |p|)

and equals ``c_h * c_r * (a_hat - a)`` for observations ``a h + G(eta)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .covariance import CovarianceModel, c2_const, slowly_varying_L
from .errors import ConfigError, DomainError, ResourceError, ShapeError
from .hermite import HermiteSpec, hermite_coeffs, hermite_poly
from .simulation import FieldRealization, covariance_matrix
from .surfaces import SurfaceCloud, unit_spiral

WEIGHT_KINDS = ("constant_one", "sphere_weight", "cube_weight", "custom_harmonic")
MAX_EXACT_VARIANCE_POINTS = 5000


def _unit_radial(r):
    return 1.0


@dataclass(frozen=True)
class WeightFunction:
    """h(x) = radial(|x|) * h_sp(x / |x|).

    ``custom_harmonic`` takes ``params = (base, amplitude, m, k)`` and means
    ``base + amplitude * sin(m theta) * sin(k phi)``.
    """

    kind: str = "constant_one"
    params: tuple = ()
    radial: Callable[[float], float] = field(default=_unit_radial, compare=False)

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ConfigError(f"unknown weight {self.kind!r}; expected one of {WEIGHT_KINDS}", key="weight")
        if self.kind == "custom_harmonic" and len(self.params) != 4:
            raise ConfigError("custom_harmonic needs params (base, amplitude, m, k)", key="weight")

    def angular(self, theta, phi):
        theta = np.asarray(theta, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)
        if self.kind == "constant_one":
            return np.ones(np.broadcast(theta, phi).shape)
        if self.kind == "sphere_weight":
            return 1.2 + 0.2 * np.sin(5 * theta) * np.sin(5 * phi)
        if self.kind == "cube_weight":
            return 2.0 + np.cos(3 * theta) + 0.0 * phi
        base, amp, m, k = self.params
        return base + amp * np.sin(m * theta) * np.sin(k * phi)


def spherical_angles(points) -> tuple[np.ndarray, np.ndarray]:
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    norm = np.linalg.norm(p, axis=1)
    if np.any(norm == 0):
        raise DomainError("weight functions are undefined at the origin")
    theta = np.arccos(np.clip(p[:, 2] / norm, -1.0, 1.0))
    phi = np.mod(np.arctan2(p[:, 1], p[:, 0]), 2 * math.pi)
    return theta, phi


def weight_values(w: WeightFunction, points) -> np.ndarray:
    """h_sp at each point's direction, shape (n,)."""
    return w.angular(*spherical_angles(points))


def weight_eval(w: WeightFunction, p) -> float:
    return float(weight_values(w, np.asarray(p, dtype=np.float64).reshape(1, 3))[0])


@dataclass(frozen=True)
class FunctionalConfig:
    model: CovarianceModel
    hermite: HermiteSpec
    weight: WeightFunction = WeightFunction()

    def __post_init__(self):
        if self.c_kappa == 0:
            raise ConfigError("C_kappa is zero: Hermite rank mismatch", key="g")
        d, a, k = self.model.d, self.model.alpha, self.kappa
        if not 0 < k * a < d - 1:
            raise ConfigError(
                f"kappa * alpha = {k * a:.6g} must lie in (0, d - 1) = (0, {d - 1})", key="alpha"
            )

    @property
    def d(self) -> int:
        return self.model.d

    @property
    def alpha(self) -> float:
        return self.model.alpha

    @property
    def kappa(self) -> int:
        return self.hermite.rank

    @property
    def c_kappa(self) -> float:
        return self.hermite.c_rank

    @classmethod
    def build(cls, alpha: float = 2 / 3, d: int = 3, g="H2", weight="constant_one", jmax: int = 10,
              rule_order: int = 128, kappa: int | None = None) -> "FunctionalConfig":
        spec = hermite_coeffs(g, jmax=jmax, rule_order=rule_order)
        if kappa is not None and kappa != spec.rank:
            raise ConfigError(f"kappa={kappa} but Hermite rank of {spec.g_id!r} is {spec.rank}", key="kappa")
        w = weight if isinstance(weight, WeightFunction) else WeightFunction(weight)
        return cls(CovarianceModel(alpha, d), spec, w)


def c_r_norm(cfg: FunctionalConfig, r: float) -> float:
    """kappa! c2^(-kappa/2) / (C_kappa r^(d-1-kappa alpha/2) L(r)^(kappa/2))."""
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r!r}")
    d, a, k = cfg.d, cfg.alpha, cfg.kappa
    return (
        math.factorial(k) * c2_const(d, a) ** (-k / 2)
        / (cfg.c_kappa * r ** (d - 1 - k * a / 2) * slowly_varying_L(cfg.model, r) ** (k / 2))
    )


def c_h_norm(cfg: FunctionalConfig, cloud: SurfaceCloud) -> float:
    """Discrete h_rad(r)^-1 * integral of h^2 over the surface."""
    h = weight_values(cfg.weight, cloud.points)
    s = float(np.dot(h, h))
    if s == 0:
        raise ConfigError("weight function vanishes on the whole cloud", key="weight")
    return cfg.weight.radial(cloud.radius) * cloud.cell_weight * s


def _g_values(cfg: FunctionalConfig, eta: np.ndarray, mode: str) -> np.ndarray:
    if mode == "full":
        return np.asarray(cfg.hermite.g(eta), dtype=np.float64)
    if mode == "rank":
        k = cfg.kappa
        return cfg.c_kappa / math.factorial(k) * hermite_poly(k, eta)
    raise ConfigError(f"mode must be 'full' or 'rank', got {mode!r}", key="mode")


def functional_values(cfg: FunctionalConfig, cloud: SurfaceCloud, values, r: float | None = None,
                      mode: str = "full", h: np.ndarray | None = None) -> np.ndarray:
    """X for each row of ``values`` (shape (reps, n) or (n,))."""
    eta = np.asarray(values, dtype=np.float64)
    if eta.shape[-1] != cloud.n:
        raise ShapeError(f"field has {eta.shape[-1]} values but the cloud has {cloud.n} points")
    r = cloud.radius if r is None else r
    gv = _g_values(cfg, eta, mode)
    if h is None and cfg.weight.kind == "constant_one":
        # plain sum, so the unweighted functional is reproduced bit for bit
        return c_r_norm(cfg, r) * cloud.cell_weight * gv.sum(axis=-1)
    if h is None:
        h = weight_values(cfg.weight, cloud.points)
    return c_r_norm(cfg, r) * cloud.cell_weight * (gv @ h)


def functional_X(cfg: FunctionalConfig, cloud: SurfaceCloud, field: FieldRealization | np.ndarray,
                 r: float | None = None, mode: str = "full") -> float:
    values = field.values if isinstance(field, FieldRealization) else field
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ShapeError("functional_X takes a single realization; use functional_values for batches")
    return float(functional_values(cfg, cloud, values, r, mode))


def lse_estimate(observations, cfg: FunctionalConfig, cloud: SurfaceCloud) -> float:
    """Least squares coefficient sum(xi h) / sum(h^2); the cell weights cancel."""
    xi = np.asarray(observations, dtype=np.float64)
    if xi.shape != (cloud.n,):
        raise ShapeError(f"expected {cloud.n} observations, got shape {xi.shape}")
    h = cfg.weight.radial(cloud.radius) * weight_values(cfg.weight, cloud.points)
    denom = float(np.dot(h, h))
    if denom == 0:
        raise ConfigError("weight function vanishes on the whole cloud", key="weight")
    return float(np.dot(xi, h)) / denom


def hermite_sum_variance(cmat: np.ndarray, h: np.ndarray, kappa: int) -> float:
    """Var(sum_p H_kappa(eta_p) h_p) = kappa! * h^T (B o ... o B) h for unit-variance eta."""
    return math.factorial(kappa) * float(h @ (cmat**kappa) @ h)


def exact_variance(cfg: FunctionalConfig, cloud: SurfaceCloud, r: float | None = None) -> float:
    """Finite-sample variance of X in rank-only mode."""
    if cloud.n > MAX_EXACT_VARIANCE_POINTS:
        raise ResourceError(
            f"exact variance is O(n^2); {cloud.n} points exceeds the limit {MAX_EXACT_VARIANCE_POINTS}"
        )
    r = cloud.radius if r is None else r
    k = cfg.kappa
    h = weight_values(cfg.weight, cloud.points)
    pref = c_r_norm(cfg, r) * cloud.cell_weight * cfg.c_kappa / math.factorial(k)
    return pref**2 * hermite_sum_variance(covariance_matrix(cfg.model, cloud), h, k)


@dataclass(frozen=True)
class FourierValue:
    value: complex
    valid: bool
    note: str = ""


def fourier_K_many(xs, w: WeightFunction, quad_n: int = 20000, chunk: int = 64) -> np.ndarray:
    """K(x) = integral over S(1) of exp(i <x, u>) h_sp(u) du for each row of ``xs``."""
    if quad_n < 500:
        raise ConfigError(f"quad_n must be >= 500, got {quad_n}", key="quad_n")
    nodes = unit_spiral(int(quad_n))
    hw = weight_values(w, nodes) * (4 * math.pi / quad_n)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    out = np.empty(xs.shape[0], dtype=np.complex128)
    for s in range(0, xs.shape[0], chunk):
        phase = xs[s:s + chunk] @ nodes.T
        out[s:s + chunk] = np.cos(phase) @ hw + 1j * (np.sin(phase) @ hw)
    return out


def fourier_K(x, w: WeightFunction, quad_n: int = 20000) -> FourierValue:
    """Spiral-rule quadrature of K; trusted for |x| <= quad_n / 10."""
    x = np.asarray(x, dtype=np.float64).reshape(3)
    val = complex(fourier_K_many(x[None, :], w, quad_n)[0])
    norm = float(np.linalg.norm(x))
    if norm > quad_n / 10:
        note = f"|x| = {norm:.4g} exceeds quad_n/10 = {quad_n / 10:.4g}; result may be inaccurate"
        warnings.warn(note, RuntimeWarning, stacklevel=2)
        return FourierValue(val, False, note)
    return FourierValue(val, True)


def average_decay(w: WeightFunction, radii, n_directions: int = 500, quad_n: int = 20000,
                  seed: int = 0) -> np.ndarray:
    """Mean over random unit directions omega of |K(r omega)|^2 r^(d-1), d = 3, per radius."""
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((n_directions, 3))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    out = []
    for r in radii:
        k = fourier_K_many(r * omega, w, quad_n)
        out.append(float(np.mean(np.abs(k) ** 2)) * r * r)
    return np.asarray(out)
