"""Scalar special functions and Gauss-Hermite rules for the standard normal weight.

Gamma and the Bessel functions delegate to :mod:`scipy.special`; this module
adds domain checking and the probabilists' normalization of the quadrature
rule (weights sum to one, so ``rule.expect(f)`` is ``E f(W)`` for
``W ~ N(0, 1)``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sc

from .errors import ConfigError, DomainError

MAX_RULE_ORDER = 512
MAX_BESSEL_ORDER = 10.0


def gamma_fn(x: float) -> float:
    if not x > 0:
        raise DomainError(f"gamma_fn requires x > 0, got {x!r}")
    return float(sc.gamma(x))


def bessel_k(nu: float, z: float) -> float:
    """Modified Bessel function of the second kind K_nu(z) for real z > 0."""
    if abs(nu) > MAX_BESSEL_ORDER:
        raise DomainError(f"|nu| must be <= {MAX_BESSEL_ORDER}, got {nu!r}")
    if not z > 0:
        raise DomainError(f"bessel_k requires z > 0, got {z!r}")
    return float(sc.kv(nu, z))


def bessel_j(nu: float, z: float) -> float:
    """Bessel function of the first kind J_nu(z), nu >= 0, z >= 0."""
    if nu < 0:
        raise DomainError(f"bessel_j requires nu >= 0, got {nu!r}")
    if z < 0:
        raise DomainError(f"bessel_j requires z >= 0, got {z!r}")
    return float(sc.jv(nu, z))


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss rule for the weight phi(w) = exp(-w^2/2)/sqrt(2 pi).

    Weights of the outermost nodes underflow to 0.0 for orders above ~370.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def expect(self, values) -> float:
        """Weighted sum ``sum_i w_i * values_i``; ``values`` may be an array or a callable."""
        if callable(values):
            values = values(self.nodes)
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def gauss_hermite_rule(n: int) -> QuadratureRule:
    """n-point rule exact for polynomials of degree <= 2n - 1 under phi."""
    if isinstance(n, bool) or int(n) != n or not 1 <= n <= MAX_RULE_ORDER:
        raise ConfigError(f"rule order must be an integer in [1, {MAX_RULE_ORDER}], got {n!r}")
    n = int(n)
    nodes, weights = sc.roots_hermitenorm(n)
    weights = weights / weights.sum()
    # enforce exact symmetry about zero
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights, order=n)
