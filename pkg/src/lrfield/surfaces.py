"""Deterministic observation windows on spheres and cube shells.

Sphere clouds use the equal-area golden-angle spiral: point ``i`` of ``n``
sits at height ``z_i = 1 - (2i + 1)/n`` (so every point owns a latitude band
of area ``4 pi / n``) and azimuth ``i * pi * (3 - sqrt 5)``.

Cube clouds place a ``k x k`` grid of cell centres on each of the six faces of
``[-r, r]^3``; no point sits on an edge, so faces never share points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ConfigError, DomainError
from .special import gamma_fn

SurfaceKind = Literal["sphere", "cube"]
SURFACE_KINDS = ("sphere", "cube")

# points per unit area; the sphere at r = 200 gets ~5000 points, the cube ~9600
DEFAULT_POINTS_DENSITY = 0.01

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class SurfaceSpec:
    kind: SurfaceKind
    radius: float
    dimension: int = 3

    def __post_init__(self):
        if self.kind not in SURFACE_KINDS:
            raise ConfigError(f"unknown surface kind {self.kind!r}", key="surface")
        if not self.radius > 0:
            raise ConfigError(f"radius must be positive, got {self.radius!r}", key="radius")
        if self.kind == "cube" and self.dimension != 3:
            raise ConfigError("cube surfaces are only defined for dimension 3", key="dimension")


@dataclass(frozen=True, eq=False)
class SurfaceCloud:
    """A finite point set on a surface with the uniform cell weight area/n."""

    spec: SurfaceSpec
    points: np.ndarray = field(repr=False)
    area: float

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.n

    @property
    def cell_weight(self) -> float:
        return self.area / self.n

    @property
    def radius(self) -> float:
        return self.spec.radius

    @property
    def cloud_id(self) -> str:
        return f"{self.spec.kind}:r={self.spec.radius!r}:n={self.n}"


def surface_area(spec: SurfaceSpec) -> float:
    r, d = spec.radius, spec.dimension
    if spec.kind == "cube":
        return 24.0 * r * r
    if d == 3:
        return 4.0 * math.pi * r * r
    return 2.0 * math.pi ** (d / 2) / gamma_fn(d / 2) * r ** (d - 1)


def unit_spiral(n: int) -> np.ndarray:
    """n equal-area spiral points on the unit sphere, shape (n, 3)."""
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.mod(i * GOLDEN_ANGLE, 2.0 * math.pi)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def sphere_points(r: float, n: int) -> SurfaceCloud:
    if int(n) != n or n < 4:
        raise ConfigError(f"sphere clouds need n >= 4 points, got {n!r}", key="n_points")
    spec = SurfaceSpec("sphere", float(r))
    return SurfaceCloud(spec, r * unit_spiral(int(n)), surface_area(spec))


def cube_points(r: float, n_target: int) -> SurfaceCloud:
    """Six k-by-k face grids with 6 k^2 as close to ``n_target`` as possible."""
    if int(n_target) != n_target or n_target < 24:
        raise ConfigError(f"cube clouds need n_target >= 24, got {n_target!r}", key="n_points")
    spec = SurfaceSpec("cube", float(r))
    k = max(2, round(math.sqrt(n_target / 6.0)))
    u = -1.0 + (2.0 * np.arange(k) + 1.0) / k
    a, b = (g.ravel() for g in np.meshgrid(u, u, indexing="ij"))
    one = np.ones_like(a)
    faces = []
    for axis in range(3):
        others = [ax for ax in range(3) if ax != axis]
        for sign in (1.0, -1.0):
            face = np.empty((k * k, 3))
            face[:, axis] = sign * one
            face[:, others[0]] = a
            face[:, others[1]] = b
            faces.append(face)
    return SurfaceCloud(spec, r * np.concatenate(faces), surface_area(spec))


def points_for_density(kind: str, r: float, density: float) -> int:
    """Point count for a cloud of the given kind at ``density`` points per unit area.

    Equal densities give the cube about 6/pi times as many points as the
    sphere of the same radius.
    """
    if not density > 0:
        raise ConfigError(f"points density must be positive, got {density!r}", key="points_density")
    n = round(density * surface_area(SurfaceSpec(kind, float(r))))
    return max(n, 4 if kind == "sphere" else 24)


def make_cloud(kind: str, r: float, n: int) -> SurfaceCloud:
    if kind == "sphere":
        return sphere_points(r, n)
    if kind == "cube":
        return cube_points(r, n)
    raise ConfigError(f"unknown surface kind {kind!r}", key="surface")


def cloud_for_density(kind: str, r: float, density: float) -> SurfaceCloud:
    return make_cloud(kind, r, points_for_density(kind, r, density))


def pair_distance_density(d: int, r: float, rho: float) -> float:
    """Density of ||U - V|| for U, V independent and uniform on the sphere S(r) in R^d."""
    if d < 2:
        raise DomainError(f"dimension must be >= 2, got {d!r}")
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r!r}")
    if rho <= 0 or rho >= 2 * r:
        return 0.0
    const = gamma_fn(d / 2) / (math.sqrt(math.pi) * gamma_fn((d - 1) / 2))
    return const * r ** (1 - d) * rho ** (d - 2) * (1.0 - rho * rho / (4 * r * r)) ** ((d - 3) / 2)


def pair_distance_cdf(d: int, r: float, rho: float) -> float:
    """CDF matching :func:`pair_distance_density`, by numerical integration."""
    from scipy import integrate

    if rho <= 0:
        return 0.0
    if rho >= 2 * r:
        return 1.0
    if d == 3:
        return rho * rho / (4 * r * r)
    val, _ = integrate.quad(lambda t: pair_distance_density(d, r, t), 0.0, rho, limit=200)
    return min(val, 1.0)
