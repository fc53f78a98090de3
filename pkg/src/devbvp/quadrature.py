"""Composite Simpson quadrature and the maximum-principle integral conditions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EvaluationError, PreconditionError
from .trajectory import Deviation, sample

THRESHOLD = 1.0


@dataclass(frozen=True)
class ConditionReport:
    """Left-hand side of a maximum-principle condition, compared with 1."""

    value: float
    threshold: float
    satisfied: bool
    mesh_size: int
    estimated_error: float
    marginal: bool = False
    kind: str = "delay"

    def summary(self) -> str:
        verdict = "satisfied" if self.satisfied else "NOT satisfied"
        flag = " (marginal)" if self.marginal else ""
        return (
            f"{self.kind} condition: integral = {self.value:.10g} "
            f"(<= {self.threshold:g}) {verdict}{flag}, "
            f"n = {self.mesh_size}, est. error = {self.estimated_error:.3g}"
        )


def _check_n(n: int):
    if n < 2 or n % 2:
        raise ValueError(f"Simpson needs an even number of subintervals >= 2, got {n}")


def simpson_weights(n: int) -> np.ndarray:
    """Unscaled composite Simpson weights (1, 4, 2, ..., 4, 1) / 3."""
    _check_n(n)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _finite(values: np.ndarray, points: np.ndarray, what: str) -> np.ndarray:
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = np.flatnonzero(bad.ravel())[0]
        raise EvaluationError(
            f"{what} is not finite at t={points.ravel()[i]!r}", location=float(points.ravel()[i])
        )
    return values


def integrate(f: Callable, a: float, b: float, n: int) -> float:
    """Composite Simpson rule with ``n`` (even) subintervals; exact for cubics."""
    _check_n(n)
    if a > b:
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    t = np.linspace(a, b, n + 1)
    y = _finite(sample(f, t), t, "integrand")
    h = (b - a) / n
    # fixed summation order keeps results reproducible
    return float(h * np.dot(simpson_weights(n), y))


def _inner_integrals(K: Callable, lo: np.ndarray, hi: np.ndarray, m: int) -> np.ndarray:
    """Simpson integrals of K over [lo_i, hi_i] for every i at once."""
    w = simpson_weights(m)
    s = np.linspace(0.0, 1.0, m + 1)
    nodes = lo[:, None] + (hi - lo)[:, None] * s[None, :]
    kv = _finite(sample(K, nodes), nodes, "K")
    return (hi - lo) / m * (kv @ w)


def _condition_value(K, L, tau: Deviation, a, b, n, advance: bool) -> float:
    t = np.linspace(a, b, n + 1)
    lv = _finite(sample(L, t), t, "L")
    neg = np.flatnonzero(lv < 0)
    if neg.size:
        raise PreconditionError(f"L must be nonnegative, but L({t[neg[0]]}) = {lv[neg[0]]}")
    tv = np.clip(tau(t), a, b)
    m = max(16, n // 16)
    m += m % 2
    inner = _inner_integrals(K, t, tv, m) if advance else _inner_integrals(K, tv, t, m)
    with np.errstate(over="ignore"):
        y = lv * np.exp(inner)
    _finite(y, t, "condition integrand")
    return float((b - a) / n * np.dot(simpson_weights(n), y))


def _condition(K, L, tau, a, b, n, advance) -> ConditionReport:
    _check_n(n)
    if n % 4:
        raise ValueError("n must be divisible by 4 so that the n/2 comparison run is valid")
    value = _condition_value(K, L, tau, a, b, n, advance)
    coarse = _condition_value(K, L, tau, a, b, n // 2, advance)
    err = abs(value - coarse) / 15.0
    return ConditionReport(
        value=value,
        threshold=THRESHOLD,
        satisfied=value <= THRESHOLD,
        mesh_size=n,
        estimated_error=err,
        marginal=abs(value - THRESHOLD) <= err,
        kind="advance" if advance else "delay",
    )


def delay_condition(K: Callable, L: Callable, tau: Deviation, a: float, b: float,
                    n: int = 1024) -> ConditionReport:
    """int_a^b L(t) exp(int_{tau(t)}^t K) dt <= 1, for tau(t) <= t."""
    if tau.kind != "delay":
        raise PreconditionError("delay_condition needs a delay deviation")
    return _condition(K, L, tau, a, b, n, advance=False)


def advance_condition(K: Callable, L: Callable, tau: Deviation, a: float, b: float,
                      n: int = 1024) -> ConditionReport:
    """int_a^b L(t) exp(int_t^{tau(t)} K) dt <= 1, for tau(t) >= t."""
    if tau.kind != "advance":
        raise PreconditionError("advance_condition needs an advance deviation")
    return _condition(K, L, tau, a, b, n, advance=True)


def condition_for(K, L, tau: Deviation, a, b, n: int = 1024) -> ConditionReport:
    if tau.kind == "delay":
        return delay_condition(K, L, tau, a, b, n)
    return advance_condition(K, L, tau, a, b, n)


def contraction_constant(L1: Callable, L2: Callable, a: float, b: float, n: int = 1024) -> float:
    """q = 1 - exp(-||L1 + L2||_1), the Picard contraction factor.

    In double precision q rounds to 1.0 once the norm exceeds about 36.
    """
    _check_n(n)
    t = np.linspace(a, b, n + 1)
    v1 = _finite(sample(L1, t), t, "L1")
    v2 = _finite(sample(L2, t), t, "L2")
    for name, v in (("L1", v1), ("L2", v2)):
        neg = np.flatnonzero(v < 0)
        if neg.size:
            raise PreconditionError(f"{name} must be nonnegative, but {name}({t[neg[0]]}) = {v[neg[0]]}")
    norm = (b - a) / n * float(np.dot(simpson_weights(n), v1 + v2))
    return float(-np.expm1(-norm))
