"""Picard iteration for initial/final value problems with a deviated argument.

The operator

    (A x)(t) = x_a + int_a^t g(s, x(s), x(tau(s))) ds

is iterated on the trajectory mesh with the trapezoid rule, and progress
is measured in the weighted norm max e^{-lambda(t)} |x(t)| where
lambda(t) = int_a^t (L1 + L2).  In that norm A contracts with factor
q = 1 - exp(-||L1 + L2||_1).

Final value problems with an advanced argument are handled by the
substitution y(s) = x(-s), which turns them into initial value problems
with a delay.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import DeviationError, EvaluationError, NonConvergenceError, PreconditionError
from .quadrature import contraction_constant
from .trajectory import (
    Deviation,
    Mesh,
    Trajectory,
    lambda_accumulate,
    reverse_time,
    sample,
    weighted_norm,
)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


def _zero(t):
    return 0.0


@dataclass(frozen=True)
class IvpSpec:
    g: Callable
    tau: Deviation
    anchor_value: float
    anchor: Literal["start", "end"] = "start"
    L1: Callable = field(default=_zero, repr=False)
    L2: Callable = field(default=_zero, repr=False)

    def __post_init__(self):
        if self.anchor not in ("start", "end"):
            raise ValueError(f"anchor must be 'start' or 'end', got {self.anchor!r}")
        if self.anchor == "start" and self.tau.kind != "delay":
            raise DeviationError("an initial value problem needs a delayed argument")
        if self.anchor == "end" and self.tau.kind != "advance":
            raise DeviationError("a final value problem needs an advanced argument")
        if not np.isfinite(self.anchor_value):
            raise ValueError("anchor value must be finite")

    def reversed(self) -> "IvpSpec":
        """The mirrored problem on [-b, -a]: h(s, y, z) = -g(-s, y, z)."""
        g, L1, L2 = self.g, self.L1, self.L2
        return IvpSpec(
            g=lambda s, x, y: -sample(g, -np.asarray(s), x, y),
            tau=self.tau.reversed(),
            anchor_value=self.anchor_value,
            anchor="start" if self.anchor == "end" else "end",
            L1=lambda s: sample(L1, -np.asarray(s)),
            L2=lambda s: sample(L2, -np.asarray(s)),
        )


@dataclass
class IterationTrace:
    iterations: int = 0
    weighted_deltas: list = field(default_factory=list)
    q_used: float = 0.0
    converged: bool = False
    error_bound: float = float("inf")

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "weighted_deltas": [float(d) for d in self.weighted_deltas],
            "q_used": self.q_used,
            "converged": self.converged,
            "error_bound": self.error_bound,
        }


class _Setup:
    """Per-mesh quantities of a delayed IVP that do not change between iterates."""

    def __init__(self, spec: IvpSpec, mesh: Mesh):
        self.spec = spec
        self.mesh = mesh
        self.t = mesh.points
        self.h = np.diff(self.t)
        self.tau_t = spec.tau.validate(mesh)
        l1 = sample(spec.L1, self.t)
        l2 = sample(spec.L2, self.t)
        for name, v in (("L1", l1), ("L2", l2)):
            if np.any(~np.isfinite(v)) or np.any(v < 0):
                i = int(np.flatnonzero(~(v >= 0))[0])
                raise PreconditionError(f"{name}({self.t[i]}) = {v[i]} must be finite and >= 0")
        self.lam = lambda_accumulate(Trajectory(mesh, l1), Trajectory(mesh, l2))
        n = mesh.n_intervals + mesh.n_intervals % 2
        self.q = contraction_constant(spec.L1, spec.L2, mesh.a, mesh.b, max(n, 2))

    def rhs(self, x: np.ndarray) -> np.ndarray:
        y = np.interp(self.tau_t, self.t, x)
        gv = sample(self.spec.g, self.t, x, y)
        bad = ~np.isfinite(gv)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise EvaluationError(
                f"g is not finite at t={self.t[i]} (x={x[i]}, y={y[i]})", location=float(self.t[i])
            )
        return gv

    def apply(self, x: np.ndarray) -> np.ndarray:
        gv = self.rhs(x)
        out = np.empty_like(x)
        out[0] = self.spec.anchor_value
        out[1:] = self.spec.anchor_value + np.cumsum(0.5 * self.h * (gv[:-1] + gv[1:]))
        return out

    def wnorm(self, d: np.ndarray) -> float:
        return weighted_norm(Trajectory(self.mesh, d), self.lam)


def _solve_delay(spec: IvpSpec, mesh: Mesh, tol: float, max_iter: int, x0) -> tuple:
    st = _Setup(spec, mesh)
    q = st.q
    trace = IterationTrace(q_used=q)
    if x0 is None:
        x = np.full(mesh.points.shape, float(spec.anchor_value))
    else:
        x = np.array(x0.values if isinstance(x0, Trajectory) else x0, dtype=float)
    use_bound = q < 1.0 - 1e-12
    for k in range(1, max_iter + 1):
        x_new = st.apply(x)
        delta = st.wnorm(x_new - x)
        trace.weighted_deltas.append(delta)
        trace.iterations = k
        x = x_new
        bound = q / (1.0 - q) * delta if use_bound else float("inf")
        trace.error_bound = bound
        if delta <= tol and (not use_bound or bound <= tol):
            trace.converged = True
            break
    if not trace.converged:
        raise NonConvergenceError(
            f"Picard iteration did not converge in {max_iter} iterations "
            f"(last weighted increment {trace.weighted_deltas[-1]:.3g}, q = {q:.4f})",
            trace=trace,
        )
    log.debug("picard converged in %d iterations (q=%.4f)", trace.iterations, q)
    return Trajectory(mesh, x), trace


def solve_ivp(spec: IvpSpec, mesh: Mesh, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER, x0=None) -> tuple[Trajectory, IterationTrace]:
    """Solve x' = g(t, x, x(tau(t))) with x fixed at the anchor.

    ``anchor='start'`` fixes x(a) (delay); ``anchor='end'`` fixes x(b)
    (advance) and is solved on the mirrored interval.  Returns the
    solution and the iteration trace.  ``x0`` overrides the constant
    initial iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if spec.anchor == "start":
        return _solve_delay(spec, mesh, tol, max_iter, x0)
    rx0 = None if x0 is None else reverse_time(x0 if isinstance(x0, Trajectory) else Trajectory(mesh, x0))
    y, trace = _solve_delay(spec.reversed(), mesh.reversed(), tol, max_iter, rx0)
    return reverse_time(y), trace


def picard_step(spec: IvpSpec, x: Trajectory) -> Trajectory:
    """One application of the integral operator (anchor 'start' only)."""
    if spec.anchor != "start":
        return reverse_time(picard_step(spec.reversed(), reverse_time(x)))
    return Trajectory(x.mesh, _Setup(spec, x.mesh).apply(x.values))


def measure_contraction(spec: IvpSpec, mesh: Mesh, u0: Trajectory, v0: Trajectory) -> float:
    """||A u0 - A v0||_* / ||u0 - v0||_* in the weighted norm of the spec."""
    if spec.anchor == "end":
        return measure_contraction(spec.reversed(), mesh.reversed(), reverse_time(u0), reverse_time(v0))
    st = _Setup(spec, mesh)
    denom = st.wnorm(u0.values - v0.values)
    if denom == 0.0:
        raise ValueError("u0 and v0 coincide at every node")
    return st.wnorm(st.apply(u0.values) - st.apply(v0.values)) / denom


def residual(x: Trajectory, spec: IvpSpec) -> tuple[float, np.ndarray]:
    """Defect |dx/dt - g(mid, x(mid), x(tau(mid)))| on every mesh interval.

    Returns the maximum and the per-interval samples.
    """
    mid = x.mesh.midpoints
    tau_mid = np.clip(spec.tau(mid), x.mesh.a, x.mesh.b)
    gv = sample(spec.g, mid, x.interp(mid), x.interp(tau_mid))
    samples = np.abs(x.slopes() - gv)
    return float(np.max(samples)), samples
