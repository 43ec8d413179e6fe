"""Cauchy long-range dependent covariance family.

``B(x) = (1 + |x|^2)^(-alpha/2)`` with spectral density

    f(lam) = lam^((alpha-d)/2) K_nu(lam) / (pi^(d/2) 2^((alpha-d)/2) Gamma(alpha/2)),
    nu = (d - alpha)/2,

which factors as ``c2(d, alpha) * lam^(alpha-d) * L(1/lam)`` with the slowly
varying ``L(x) -> 2^(d-1)``.

Note that this ``f`` integrates over R^d to ``2^(d-1)``, not to ``B(0) = 1``;
:func:`cov_from_spectrum` divides by :func:`spectral_mass` so that the
spectral representation reproduces ``B`` itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import special as sc

from .errors import ConfigError, DomainError, NumericError
from .special import bessel_j, bessel_k, gamma_fn

FAMILIES = ("cauchy",)


@dataclass(frozen=True)
class CovarianceModel:
    alpha: float = 2.0 / 3.0
    d: int = 3
    family: str = "cauchy"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown covariance family {self.family!r}", key="family")
        if int(self.d) != self.d or self.d < 2:
            raise ConfigError(f"dimension must be an integer >= 2, got {self.d!r}", key="d")
        if not 0 < self.alpha < self.d:
            raise ConfigError(f"alpha must lie in (0, d) = (0, {self.d}), got {self.alpha!r}", key="alpha")

    @property
    def nu(self) -> float:
        """Order of the Bessel function in the spectral density."""
        return (self.d - self.alpha) / 2.0


def cov(model: CovarianceModel, dist):
    """Covariance at distance ``dist``; accepts scalars or arrays."""
    a = np.asarray(dist, dtype=np.float64)
    if np.any(a < 0):
        raise DomainError("distance must be non-negative")
    out = (1.0 + a * a) ** (-model.alpha / 2.0)
    return float(out) if out.ndim == 0 else out


def c2_const(d: int, alpha: float) -> float:
    if not 0 < alpha < d:
        raise DomainError(f"alpha must lie in (0, {d}), got {alpha!r}")
    return gamma_fn((d - alpha) / 2) / (2**alpha * math.pi ** (d / 2) * gamma_fn(alpha / 2))


def spectral_density(model: CovarianceModel, lam: float) -> float:
    if not lam > 0:
        raise DomainError(f"spectral density needs lam > 0, got {lam!r}")
    d, a = model.d, model.alpha
    return (
        lam ** ((a - d) / 2)
        * bessel_k(model.nu, lam)
        / (math.pi ** (d / 2) * 2 ** ((a - d) / 2) * gamma_fn(a / 2))
    )


def spectral_mass(model: CovarianceModel) -> float:
    """Integral of :func:`spectral_density` over R^d."""
    return 2.0 ** (model.d - 1)


def slowly_varying_L(model: CovarianceModel, x: float) -> float:
    if not x > 0:
        raise DomainError(f"slowly varying factor needs x > 0, got {x!r}")
    nu = model.nu
    return 2 ** ((model.d + model.alpha) / 2) / gamma_fn(nu) * x ** (-nu) * bessel_k(nu, 1.0 / x)


def isotropic_kernel_Y(d: int, z: float) -> float:
    """Y_d(z) = 2^((d-2)/2) Gamma(d/2) J_((d-2)/2)(z) z^((2-d)/2), with Y_d(0) = 1."""
    if d < 2:
        raise DomainError(f"dimension must be >= 2, got {d!r}")
    if z < 0:
        raise DomainError(f"kernel argument must be >= 0, got {z!r}")
    nu = (d - 2) / 2
    if z < 1e-6:
        # two-term series; next term is O(z^4)
        return 1.0 - z * z / (2.0 * d)
    if d == 2:
        return bessel_j(0.0, z)
    return 2**nu * gamma_fn(d / 2) * bessel_j(nu, z) * z ** (-nu)


def _kernel_vec(d: int, z: np.ndarray) -> np.ndarray:
    nu = (d - 2) / 2
    z = np.asarray(z, dtype=np.float64)
    small = z < 1e-6
    zs = np.where(small, 1.0, z)
    val = 2**nu * sc.gamma(d / 2) * sc.jv(nu, zs) * zs ** (-nu)
    return np.where(small, 1.0 - z * z / (2.0 * d), val)


def cov_from_spectrum(model: CovarianceModel, r: float, max_error: float = 1e-7) -> float:
    """B(r) from the isotropic spectral representation, by adaptive quadrature.

    The integrand behaves like ``z^(alpha-1)`` at the origin (handled with an
    algebraic weight on ``[0, a]``) and oscillates with period ``2 pi / r``
    while decaying like ``exp(-z)``; the tail is integrated period by period.
    """
    if r < 0:
        raise DomainError(f"r must be >= 0, got {r!r}")
    d, alpha, nu = model.d, model.alpha, model.nu
    const = (
        2 * math.pi ** (d / 2) / gamma_fn(d / 2)
        * 2 ** ((d - alpha) / 2) / (math.pi ** (d / 2) * gamma_fn(alpha / 2))
        / spectral_mass(model)
    )

    # z^(d-1) f(z) = const' * z^((d+alpha)/2 - 1) K_nu(z); factor out z^(alpha-1)
    def regular(z):
        # z^((d - alpha)/2) K_nu(z), finite at 0
        z = np.asarray(z, dtype=np.float64)
        zs = np.where(z > 0, z, 1.0)
        val = zs**nu * sc.kv(nu, zs)
        return np.where(z > 0, val, 2 ** (nu - 1) * sc.gamma(nu))

    def tail(z):
        return const * z ** (alpha - 1) * regular(z) * _kernel_vec(d, r * z)

    a = 1.0 if r == 0 else min(1.0, 1.0 / r)
    head, err_head = integrate.quad(
        lambda z: const * regular(z) * _kernel_vec(d, r * z),
        0.0, a, weight="alg", wvar=(alpha - 1.0, 0.0), limit=200,
    )
    total, err = head, err_head
    z_max = 60.0  # K_nu(60) ~ 1e-27
    step = 2 * math.pi / r if r > 0 else z_max
    lo = a
    while lo < z_max:
        hi = min(lo + step, z_max)
        val, e = integrate.quad(tail, lo, hi, limit=200)
        total += val
        err += e
        lo = hi
    if not math.isfinite(total) or err > max_error:
        raise NumericError(
            f"spectral quadrature did not converge at r={r}: value={total}, error estimate={err}"
        )
    return total
