"""Probabilists' Hermite polynomials, Hermite coefficients and rank.

Built-in nonlinearities are addressed by string id so the CLI never evaluates
user code:

    ``H0`` .. ``H6``     Hermite polynomial of that degree
    ``square``           w^2
    ``abs``              |w|
    ``indicator[:c]``    1{w > c}, c defaults to 0
    ``power:k``          w^k, k <= 8

Library users may pass any vectorized callable to :func:`hermite_coeffs`.

The rank is the smallest ``j >= 1`` with a non-zero coefficient; ``C_0`` is the
mean ``E G(W)`` and plays no role in the rank.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError
from .special import gauss_hermite_rule

MAX_DEGREE = 30
MAX_JMAX = 20
DEFAULT_RULE_ORDER = 128


def hermite_poly(k: int, x):
    """H_k(x) via H_{k+1} = x H_k - k H_{k-1}; ``x`` may be an array."""
    if int(k) != k or k < 0:
        raise DomainError(f"Hermite degree must be a non-negative integer, got {k!r}")
    if k > MAX_DEGREE:
        raise ConfigError(f"Hermite degree {k} exceeds the supported maximum {MAX_DEGREE}", key="kappa")
    x = np.asarray(x, dtype=np.float64)
    prev, cur = np.ones_like(x), x.copy()
    if k == 0:
        out = prev
    else:
        for j in range(1, int(k)):
            prev, cur = cur, x * cur - j * prev
        out = cur
    return float(out) if out.ndim == 0 else out


def hermite_table(kmax: int, x: np.ndarray) -> np.ndarray:
    """Rows H_0(x) .. H_kmax(x), shape (kmax + 1, len(x))."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = x
    for j in range(1, kmax):
        out[j + 1] = x * out[j] - j * out[j - 1]
    return out


def _with_kinks(func, *kinks):
    func.kinks = tuple(float(k) for k in kinks)
    return func


def _indicator(c: float):
    return _with_kinks(lambda w: (np.asarray(w) > c).astype(np.float64), c)


def resolve_g(g_id: str) -> Callable[[np.ndarray], np.ndarray]:
    """Map a built-in function id to a vectorized callable."""
    name, _, arg = str(g_id).strip().partition(":")
    low = name.lower()
    if len(name) >= 2 and low[0] == "h" and name[1:].isdigit():
        k = int(name[1:])
        if k > 6:
            raise ConfigError(f"built-in Hermite nonlinearities go up to H6, got {g_id!r}", key="g")
        return lambda w, k=k: hermite_poly(k, w)
    if low == "square":
        return lambda w: np.asarray(w, dtype=np.float64) ** 2
    if low == "abs":
        return _with_kinks(lambda w: np.abs(np.asarray(w, dtype=np.float64)), 0.0)
    if low == "indicator":
        try:
            c = float(arg) if arg else 0.0
        except ValueError:
            raise ConfigError(f"bad indicator threshold in {g_id!r}", key="g") from None
        return _indicator(c)
    if low == "power":
        if not arg.isdigit() or not 1 <= int(arg) <= 8:
            raise ConfigError(f"power needs an integer exponent in [1, 8], got {g_id!r}", key="g")
        return lambda w, k=int(arg): np.asarray(w, dtype=np.float64) ** k
    raise ConfigError(f"unknown nonlinearity {g_id!r}", key="g")


GLike = Union[str, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class HermiteSpec:
    g_id: str
    coeffs: np.ndarray = field(repr=False)
    rank: int
    jmax: int
    rule_order: int
    g: Callable = field(repr=False, compare=False)

    @property
    def c_rank(self) -> float:
        return float(self.coeffs[self.rank])

    def __call__(self, w):
        return self.g(w)


def _gauss_expect(f, kinks) -> float:
    """E f(W) by adaptive quadrature split at the kinks of f.

    Kink sets symmetric about 0 are folded onto [0, inf) so that odd
    integrands cancel exactly, as with the folded Gauss-Hermite rule.
    """
    ks = sorted(set(kinks))
    if ks == sorted(-k for k in ks):
        g = lambda w: float(f(w)) + float(f(-w))  # noqa: E731
        edges = [0.0, *(k for k in ks if k > 0), np.inf]
    else:
        g = lambda w: float(f(w))  # noqa: E731
        edges = [-np.inf, *ks, np.inf]
    total = 0.0
    for lo, hi in zip(edges, edges[1:]):
        with warnings.catch_warnings():
            # exact zeros (odd orders) trip the roundoff detector; epsabs governs
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(lambda w: g(w) * math.exp(-w * w / 2), lo, hi, limit=200,
                                    epsabs=1e-12, epsrel=1e-10)
        total += val
    return total / math.sqrt(2 * math.pi)


def _kinked_coeffs(func, kinks, jmax: int) -> np.ndarray:
    return np.array([
        _gauss_expect(lambda w, j=j: func(np.array([w]))[0] * hermite_poly(j, w), kinks)
        for j in range(jmax + 1)
    ])


def _folded_coeffs(func, rule, jmax: int) -> np.ndarray:
    # the rule is symmetric, so pair x with -x; H_j(-x) = (-1)^j H_j(x) makes
    # C_j vanish exactly for odd j when G is even (and vice versa)
    n = rule.nodes.size
    half = n // 2
    x, w = rule.nodes[n - half:], rule.weights[n - half:]
    g_pos = np.asarray(func(x), dtype=np.float64)
    g_neg = np.asarray(func(-x), dtype=np.float64)
    sign = np.where(np.arange(jmax + 1) % 2 == 0, 1.0, -1.0)
    table = hermite_table(jmax, x)
    coeffs = table @ (w * g_pos) + sign * (table @ (w * g_neg))
    if n % 2:
        g0 = float(np.asarray(func(np.zeros(1)), dtype=np.float64)[0])
        coeffs += rule.weights[half] * g0 * hermite_table(jmax, np.zeros(1))[:, 0]
    return coeffs


def hermite_coeffs(g: GLike, jmax: int = 10, rule_order: int = DEFAULT_RULE_ORDER) -> HermiteSpec:
    """C_j = E[G(W) H_j(W)] for j <= jmax by Gauss-Hermite quadrature.

    Exact for polynomial G of degree < 2 * rule_order - jmax. Gauss-Hermite
    converges only algebraically for kinked G, so built-ins that declare
    ``kinks`` (abs, indicator) use adaptive quadrature split at the kinks.
    """
    if int(jmax) != jmax or not 1 <= jmax <= MAX_JMAX:
        raise ConfigError(f"jmax must be an integer in [1, {MAX_JMAX}], got {jmax!r}", key="jmax")
    if rule_order < jmax + 2:
        raise ConfigError(
            f"rule order {rule_order} too small for jmax={jmax} (need >= {jmax + 2})", key="rule_order"
        )
    func = resolve_g(g) if isinstance(g, str) else g
    g_id = g if isinstance(g, str) else getattr(g, "__name__", "custom")
    rule = gauss_hermite_rule(int(rule_order))
    kinks = getattr(func, "kinks", None)
    if kinks is not None:
        coeffs = _kinked_coeffs(func, kinks, int(jmax))
    else:
        coeffs = _folded_coeffs(func, rule, int(jmax))
    rank = None
    for j in range(1, int(jmax) + 1):
        if abs(coeffs[j]) > 1e-9 * math.sqrt(math.factorial(j)):
            rank = j
            break
    if rank is None:
        raise ConfigError(f"no non-zero Hermite coefficient up to j={jmax} for {g_id!r}", key="g")
    coeffs.setflags(write=False)
    return HermiteSpec(g_id, coeffs, rank, int(jmax), int(rule_order), func)


def parseval_gap(spec: HermiteSpec) -> float:
    """E G(W)^2 minus the truncated Parseval sum; non-negative up to rounding."""
    kinks = getattr(spec.g, "kinks", None)
    if kinks is not None:
        second_moment = _gauss_expect(lambda w: spec.g(np.array([w]))[0] ** 2, kinks)
    else:
        rule = gauss_hermite_rule(spec.rule_order)
        second_moment = rule.expect(np.asarray(spec.g(rule.nodes), dtype=np.float64) ** 2)
    partial = sum(c * c / math.factorial(j) for j, c in enumerate(spec.coeffs))
    return second_moment - partial
