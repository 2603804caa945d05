"""Large-deviation tail exponents and worst-case mean-square cost bounds.

Both quantities are scalar optimizations of the (convex) rate function: the
tail exponent is its Legendre transform at a given level, and the worst-case
bound minimizes (rate + epsilon) / theta.  Rate evaluations cost a full
quadrature each, so they are memoized per search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TailBound:
    """exponent = sup over theta of (alpha * theta - rate(theta))."""

    alpha: float
    exponent: float
    argmax_theta: float
    at_boundary: bool = False


@dataclass(frozen=True)
class WorstCaseBound:
    """bound = 2 * inf over theta of (rate(theta) + epsilon) / theta."""

    epsilon: float
    bound: float
    argmin_theta: float
    at_zero_limit: bool = False
    at_boundary: bool = False


_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _memoized(fn):
    cache: dict[float, float] = {}

    def wrapped(x: float) -> float:
        if x not in cache:
            cache[x] = fn(x)
        return cache[x]

    return wrapped


def _golden_max(fn, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section maximum of a concave function on [lo, hi]."""
    a, b = lo, hi
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLDEN * (b - a)
            fd = fn(d)
    x = c if fc >= fd else d
    return x, fn(x)


def _rate_value(rate_fn, theta: float) -> float:
    value = rate_fn(theta)
    return float(getattr(value, "value", value))


def tail_exponent(rate_fn, alpha: float, theta_max: float,
                  tol: float = 1e-10) -> TailBound:
    """Legendre transform sup_theta (alpha theta - rate(theta)) on [0, theta_max].

    The objective is concave (the rate is convex with rate(0) = 0), so a
    golden-section search suffices; a supremum attained at theta_max is
    flagged, since it means the admissibility boundary caps the exponent.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if theta_max <= 0:
        raise ValueError("theta_max must be positive")
    rate = _memoized(lambda th: _rate_value(rate_fn, th))

    def objective(theta: float) -> float:
        if theta == 0.0:
            return 0.0
        return alpha * theta - rate(theta)

    theta_best, value_best = _golden_max(objective, 0.0, theta_max, tol)
    for boundary in (0.0, theta_max):
        candidate = objective(boundary)
        if candidate > value_best:
            theta_best, value_best = boundary, candidate
    noise_floor = 8.0 * np.finfo(float).eps * max(1.0, alpha * theta_max)
    if value_best <= noise_floor:
        # derivative alpha - rate'(0) <= 0 at the origin: flat optimum there
        return TailBound(alpha=float(alpha), exponent=0.0, argmax_theta=0.0)
    at_boundary = theta_best >= theta_max * (1.0 - 1e-9)
    return TailBound(alpha=float(alpha), exponent=float(value_best),
                     argmax_theta=float(theta_best), at_boundary=at_boundary)


def _derivative_at_zero_limit(rate, theta_max: float) -> float:
    """Richardson limit of rate(theta)/theta as theta -> 0+."""
    h = min(1e-3, 0.25 * theta_max)
    r1 = rate(h) / h
    r2 = rate(h / 2.0) / (h / 2.0)
    r3 = rate(h / 4.0) / (h / 4.0)
    # two Richardson levels on the O(h) + O(h^2) expansion of rate/theta
    first = 2.0 * r2 - r1
    second = 2.0 * r3 - r2
    return (4.0 * second - first) / 3.0


def worst_case_bound(rate_fn, epsilon: float, theta_max: float,
                     tol: float = 1e-10,
                     derivative_at_zero: float | None = None) -> WorstCaseBound:
    """2 inf_theta (rate(theta) + epsilon)/theta over (0, theta_max].

    The objective is convex in theta.  For epsilon = 0 the infimum is the
    theta -> 0+ limit, equal to the rate derivative at zero (rate/theta is
    nondecreasing by convexity); pass that derivative when an exact value is
    available, otherwise it is extrapolated.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if theta_max <= 0:
        raise ValueError("theta_max must be positive")
    rate = _memoized(lambda th: _rate_value(rate_fn, th))

    if epsilon == 0.0:
        slope = (derivative_at_zero if derivative_at_zero is not None
                 else _derivative_at_zero_limit(rate, theta_max))
        return WorstCaseBound(epsilon=0.0, bound=2.0 * float(slope),
                              argmin_theta=0.0, at_zero_limit=True)

    def objective(theta: float) -> float:
        return -(rate(theta) + epsilon) / theta

    lo = min(1e-6 * theta_max, theta_max * 0.5)
    theta_best, neg_best = _golden_max(objective, lo, theta_max, tol)
    for boundary in (lo, theta_max):
        candidate = objective(boundary)
        if candidate > neg_best:
            theta_best, neg_best = boundary, candidate
    return WorstCaseBound(
        epsilon=float(epsilon), bound=-2.0 * float(neg_best),
        argmin_theta=float(theta_best),
        at_boundary=theta_best >= theta_max * (1.0 - 1e-9))


def tail_exponent_grid_scan(rate_fn, alpha: float, theta_max: float,
                            n: int = 4001) -> tuple[float, float]:
    """Dense-grid oracle for the tail exponent (slow; used for cross-checks)."""
    thetas = np.linspace(0.0, theta_max, n)
    values = np.array([alpha * th - (_rate_value(rate_fn, th) if th > 0 else 0.0)
                       for th in thetas])
    idx = int(np.argmax(values))
    return float(max(values[idx], 0.0)), float(thetas[idx])


def worst_case_grid_scan(rate_fn, epsilon: float, theta_max: float,
                         n: int = 4001) -> tuple[float, float]:
    """Dense-grid oracle for the worst-case bound (slow; used for cross-checks)."""
    thetas = np.linspace(theta_max / n, theta_max, n)
    values = np.array([2.0 * (_rate_value(rate_fn, th) + epsilon) / th
                       for th in thetas])
    idx = int(np.argmin(values))
    return float(values[idx]), float(thetas[idx])
