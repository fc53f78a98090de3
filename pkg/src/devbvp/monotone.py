"""Generalized monotone method for x' = f(t, x, x(tau(t)), x), B(x(c), x) = 0.

Given a lower solution alpha <= an upper solution beta, the operator G
maps xi in [alpha, beta] to the solution of the linear problem

    x' = f(t, xi, xi(tau), xi) - K (x - xi) - L (x(tau) - xi(tau))     (delay)
    x' = f(t, xi, xi(tau), xi) + K (x - xi) + L (x(tau) - xi(tau))     (advance)

anchored at c (c = a for a delay, c = b for an advance) with the greatest
zero of v -> B(v, xi) in [alpha(c), beta(c)].  G is nondecreasing and maps
[alpha, beta] into itself, so iterating it from alpha climbs to the least
solution and iterating from beta descends to the greatest one.

The advanced problem runs through the same Picard code path as the delayed
one: the inner solve is a final value problem, which the IVP module treats
by reversing time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BracketError, HypothesisViolation, PreconditionError
from .ivp import IterationTrace, IvpSpec, solve_ivp
from .quadrature import ConditionReport, condition_for
from .rootfind import DEFAULT_SCAN, greatest_zero
from .trajectory import Deviation, Mesh, Trajectory, default_order_tol, leq, sample

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_OUTER = 500
EPS = np.finfo(float).eps


class ConditionViolation(HypothesisViolation):
    """The maximum-principle integral condition fails for K, L."""

    def __init__(self, report: ConditionReport):
        super().__init__(report.summary())
        self.report = report


@dataclass(frozen=True, eq=False)
class DeviatedProblem:
    """Problem data: interval, deviation, right-hand side, boundary functional, weights.

    ``f(t, x, y, gamma)`` must accept arrays for t, x, y (gamma is a
    Trajectory); ``B(v, gamma)`` is called with scalar or array v.
    The integral condition for K, L is evaluated on construction and a
    failure raises ConditionViolation unless ``force`` is set.
    """

    interval: tuple
    tau: Deviation
    f: Callable
    B: Callable
    K: Callable
    L: Callable
    force: bool = False
    quad_n: int = 1024
    name: str = ""
    condition: Optional[ConditionReport] = field(default=None, init=False)

    def __post_init__(self):
        a, b = map(float, self.interval)
        if not a < b:
            raise ValueError(f"need a < b, got {self.interval}")
        object.__setattr__(self, "interval", (a, b))
        t = np.linspace(a, b, self.quad_n + 1)
        lv = sample(self.L, t)
        neg = np.flatnonzero(~(lv >= 0))
        if neg.size:
            raise PreconditionError(f"L must be nonnegative, but L({t[neg[0]]}) = {lv[neg[0]]}")
        self.tau.validate(Mesh(t))
        report = condition_for(self.K, self.L, self.tau, a, b, self.quad_n)
        object.__setattr__(self, "condition", report)
        if not report.satisfied and not self.force:
            raise ConditionViolation(report)

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    @property
    def kind(self) -> str:
        return self.tau.kind

    @property
    def c(self) -> float:
        return self.a if self.kind == "delay" else self.b

    def anchor_index(self, mesh: Mesh) -> int:
        return 0 if self.kind == "delay" else mesh.points.size - 1

    def mesh(self, n: int) -> Mesh:
        return Mesh.uniform(self.a, self.b, n)

    def rhs_on(self, x: Trajectory, points: np.ndarray) -> np.ndarray:
        """f(s, x(s), x(tau(s)), x) at the given points."""
        tau_s = np.clip(self.tau(points), x.mesh.a, x.mesh.b)
        return sample(lambda t, u, w: self.f(t, u, w, x), points, x.interp(points), x.interp(tau_s))

    def boundary(self, x: Trajectory) -> float:
        return float(self.B(float(x.values[self.anchor_index(x.mesh)]), x))


@dataclass
class CheckReport:
    name: str
    passed: bool
    values: dict = field(default_factory=dict)
    certifying: bool = True
    note: str = ""

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k} = {_fmt(v)}" for k, v in self.values.items())
        extra = "" if self.certifying else " [sampling check, not a proof]"
        note = f" ({self.note})" if self.note else ""
        return f"{status} {self.name}: {vals}{extra}{note}"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "certifying": self.certifying,
            "values": {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in self.values.items()},
            "note": self.note,
        }


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, (float, np.floating)) else str(v)


def _defect(x: Trajectory, prob: DeviatedProblem) -> tuple:
    mid = x.mesh.midpoints
    return mid, x.slopes() - prob.rhs_on(x, mid)


def differential_residual(x: Trajectory, prob: DeviatedProblem) -> float:
    """max over mesh intervals of |dx/dt - f(mid, x(mid), x(tau(mid)), x)|."""
    return float(np.max(np.abs(_defect(x, prob)[1])))


def integral_residual(x: Trajectory, prob: DeviatedProblem) -> float:
    """max_t |x(t) - x(c) - int_c^t f(s, x, x(tau), x) ds| with midpoint-rule quadrature.

    The Caratheodory form of the equation; unlike the pointwise defect it
    stays small when f jumps inside a mesh interval.
    """
    mid, d = _defect(x, prob)
    acc = np.concatenate(([0.0], np.cumsum(d * np.diff(x.mesh.points))))
    acc -= acc[prob.anchor_index(x.mesh)]
    return float(np.max(np.abs(acc)))


def _verify(x: Trajectory, prob: DeviatedProblem, tol: float, lower: bool) -> CheckReport:
    mid, d = _defect(x, prob)
    if not lower:
        d = -d
    i = int(np.argmax(d))
    bval = prob.boundary(x)
    bmargin = bval if lower else -bval
    name = "lower solution" if lower else "upper solution"
    ok = bool(d[i] <= tol and bmargin <= tol)
    return CheckReport(
        name,
        ok,
        {
            "max differential violation": float(d[i]) + 0.0,
            "at t": float(mid[i]),
            "B(x(c), x)": bval,
        },
    )


def verify_lower(alpha: Trajectory, prob: DeviatedProblem, tol: float = 1e-9) -> CheckReport:
    """alpha' <= f(t, alpha, alpha(tau), alpha) at interval midpoints and B(alpha(c), alpha) <= 0."""
    return _verify(alpha, prob, tol, lower=True)


def verify_upper(beta: Trajectory, prob: DeviatedProblem, tol: float = 1e-9) -> CheckReport:
    """The reversed inequalities of verify_lower."""
    return _verify(beta, prob, tol, lower=False)


def _random_between(rng, alpha: Trajectory, beta: Trajectory, lo=None, knots: int = 8):
    """Random continuous piecewise-linear trajectory inside [lo or alpha, beta]."""
    lo = alpha if lo is None else lo
    mesh = alpha.mesh
    kt = np.linspace(mesh.a, mesh.b, knots)
    theta = np.interp(mesh.points, kt, rng.uniform(0.0, 1.0, knots))
    return Trajectory(mesh, lo.values + theta * (beta.values - lo.values))


def check_one_sided_lipschitz(prob: DeviatedProblem, alpha: Trajectory, beta: Trajectory,
                              samples: int = 2000, tol: float = 1e-9, seed: int = 0) -> CheckReport:
    """Sample the one-sided Lipschitz hypothesis on ordered tuples inside [alpha, beta].

    Delay form:   f(x, y, g) - f(xb, yb, gb) <= K (xb - x) + L (yb - y)
    Advance form: f(x, y, g) - f(xb, yb, gb) >= -K (xb - x) - L (yb - y)
    for x <= xb, y <= yb, g <= gb.  Reports the worst violation.
    """
    if not leq(alpha, beta, default_order_tol(alpha, beta)):
        raise HypothesisViolation("check_one_sided_lipschitz needs alpha <= beta")
    rng = np.random.default_rng(seed)
    n_gamma = max(1, min(32, samples))
    per = max(1, samples // n_gamma)
    worst, where = -np.inf, None
    for j in range(n_gamma):
        g_lo = _random_between(rng, alpha, beta)
        g_hi = g_lo if j % 4 == 0 else _random_between(rng, alpha, beta, lo=g_lo)
        t = rng.uniform(prob.a, prob.b, per)
        tt = np.clip(prob.tau(t), prob.a, prob.b)
        xa, xb = alpha.interp(t), beta.interp(t)
        ya, yb = alpha.interp(tt), beta.interp(tt)
        x1 = xa + rng.uniform(0, 1, per) * (xb - xa)
        x2 = x1 + rng.uniform(0, 1, per) * (xb - x1)
        y1 = ya + rng.uniform(0, 1, per) * (yb - ya)
        y2 = y1 + rng.uniform(0, 1, per) * (yb - y1)
        f1 = sample(lambda s, u, w: prob.f(s, u, w, g_lo), t, x1, y1)
        f2 = sample(lambda s, u, w: prob.f(s, u, w, g_hi), t, x2, y2)
        K = sample(prob.K, t)
        L = sample(prob.L, t)
        if prob.kind == "delay":
            viol = (f1 - f2) - K * (x2 - x1) - L * (y2 - y1)
        else:
            viol = -K * (x2 - x1) - L * (y2 - y1) - (f1 - f2)
        i = int(np.argmax(viol))
        if viol[i] > worst:
            worst, where = float(viol[i]), float(t[i])
    return CheckReport(
        f"one-sided Lipschitz ({prob.kind} form)",
        bool(worst <= tol),
        {"max violation": worst, "at t": where, "samples": n_gamma * per},
        certifying=False,
    )


class _Engine:
    """Operator G on a fixed mesh with the problem's bounds."""

    def __init__(self, prob: DeviatedProblem, alpha: Trajectory, beta: Trajectory,
                 inner_tol: float, scan_n: int):
        alpha._check(beta)
        self.prob = prob
        self.alpha, self.beta = alpha, beta
        self.mesh = alpha.mesh
        self.t = self.mesh.points
        self.tau_t = prob.tau.validate(self.mesh)
        self.K = sample(prob.K, self.t)
        self.L = sample(prob.L, self.t)
        self.absK = np.abs(self.K)
        self.inner_tol = inner_tol
        self.scan_n = scan_n
        self.ic = prob.anchor_index(self.mesh)

    def anchor_value(self, xi: Trajectory) -> float:
        lo = float(self.alpha.values[self.ic])
        hi = float(self.beta.values[self.ic])
        B = self.prob.B

        def h(v):
            return B(v, xi)

        try:
            return greatest_zero(h, lo, hi, scan_n=self.scan_n)
        except BracketError as exc:
            raise HypothesisViolation(
                f"B(alpha(c), xi) <= 0 <= B(beta(c), xi) fails: B(alpha(c), xi) = {exc.h_lo}, "
                f"B(beta(c), xi) = {exc.h_hi}"
            ) from exc

    def apply(self, xi: Trajectory) -> tuple[Trajectory, IterationTrace]:
        t = self.t
        xi_t = xi.values
        xi_tau = np.interp(self.tau_t, t, xi_t)
        F = sample(lambda s, u, w: self.prob.f(s, u, w, xi), t, xi_t, xi_tau)
        sign = -1.0 if self.prob.kind == "delay" else 1.0
        K, L = self.K, self.L

        def g(s, x, y):
            s = np.asarray(s)
            if s.shape == t.shape and np.array_equal(s, t):
                return F + sign * (K * (x - xi_t) + L * (y - xi_tau))
            Fs = np.interp(s, t, F)
            return Fs + sign * (np.interp(s, t, K) * (x - xi.interp(s))
                                + np.interp(s, t, L) * (y - np.interp(s, t, xi_tau)))

        spec = IvpSpec(
            g=g,
            tau=self.prob.tau,
            anchor_value=self.anchor_value(xi),
            anchor="start" if self.prob.kind == "delay" else "end",
            L1=lambda s: np.interp(s, t, self.absK),
            L2=lambda s: np.interp(s, t, L),
        )
        return solve_ivp(spec, self.mesh, tol=self.inner_tol, max_iter=1000)


def _inner_tol(tol: float, alpha: Trajectory, beta: Trajectory) -> float:
    scale = 1.0 + alpha.sup_norm() + beta.sup_norm()
    return max(1e-3 * tol, 1e-13 * scale)


def operator_g(xi: Trajectory, prob: DeviatedProblem, alpha: Trajectory, beta: Trajectory,
               tol: float = DEFAULT_TOL, scan_n: int = DEFAULT_SCAN) -> Trajectory:
    """G(xi) on the mesh of ``xi``; alpha, beta bracket the anchor value search."""
    return _Engine(prob, alpha, beta, _inner_tol(tol, alpha, beta), scan_n).apply(xi)[0]


@dataclass
class SolutionPair:
    least: Trajectory
    greatest: Trajectory
    traces: dict
    boundary_residuals: tuple
    differential_residuals: tuple = ()
    integral_residuals: tuple = ()
    chains: Optional[dict] = None

    def as_dict(self) -> dict:
        return {
            "traces": {k: v.as_dict() for k, v in self.traces.items()},
            "boundary_residuals": list(self.boundary_residuals),
            "differential_residuals": list(self.differential_residuals),
            "integral_residuals": list(self.integral_residuals),
        }


def _chain(engine: _Engine, start: Trajectory, up: bool, tol: float, max_outer: int,
           clip: float, keep: bool) -> tuple:
    x = start
    history = [x] if keep else None
    trace = IterationTrace()
    alpha, beta = engine.alpha.values, engine.beta.values
    for k in range(1, max_outer + 1):
        nxt, inner = engine.apply(x)
        trace.q_used = inner.q_used
        v = nxt.values
        back = (x.values - v) if up else (v - x.values)
        i = int(np.argmax(back))
        if back[i] > clip:
            raise HypothesisViolation(
                f"{'ascending' if up else 'descending'} chain lost monotonicity at t={engine.t[i]} "
                f"by {back[i]:.3g} in step {k}",
                node=float(engine.t[i]),
                amount=float(back[i]),
            )
        out = np.maximum(alpha - v, v - beta)
        j = int(np.argmax(out))
        if out[j] > clip:
            raise HypothesisViolation(
                f"G left [alpha, beta] at t={engine.t[j]} by {out[j]:.3g} in step {k}",
                node=float(engine.t[j]),
                amount=float(out[j]),
            )
        v = np.maximum(v, x.values) if up else np.minimum(v, x.values)
        v = np.clip(v, alpha, beta)
        delta = float(np.max(np.abs(v - x.values)))
        x = Trajectory(x.mesh, v)
        if keep:
            history.append(x)
        trace.weighted_deltas.append(delta)
        trace.iterations = k
        if delta <= tol:
            trace.converged = True
            break
    return x, trace, history


def extremal_solutions(prob: DeviatedProblem, alpha: Trajectory, beta: Trajectory,
                       tol: float = DEFAULT_TOL, max_outer: int = DEFAULT_MAX_OUTER,
                       scan_n: int = DEFAULT_SCAN, check: bool = True,
                       keep_chains: bool = False) -> SolutionPair:
    """Least and greatest solutions in [alpha, beta] by monotone iteration of G.

    With ``check`` the lower/upper solution inequalities are verified
    first (HypothesisViolation on failure).  Raises NonConvergenceError
    via the traces if either chain exceeds ``max_outer`` steps.
    """
    from .errors import NonConvergenceError

    order_tol = default_order_tol(alpha, beta)
    if not leq(alpha, beta, order_tol):
        i = int(np.argmax(alpha.values - beta.values))
        raise HypothesisViolation(f"alpha > beta at t={alpha.t[i]}", node=float(alpha.t[i]))
    if check:
        for rep in (verify_lower(alpha, prob), verify_upper(beta, prob)):
            if not rep.passed:
                raise HypothesisViolation(rep.summary())
    inner_tol = _inner_tol(tol, alpha, beta)
    scale = 1.0 + alpha.sup_norm() + beta.sup_norm()
    clip = 100 * EPS * scale + 10 * inner_tol
    engine = _Engine(prob, alpha, beta, inner_tol, scan_n)
    least, tr_lo, h_lo = _chain(engine, alpha, True, tol, max_outer, clip, keep_chains)
    greatest, tr_hi, h_hi = _chain(engine, beta, False, tol, max_outer, clip, keep_chains)
    traces = {"least": tr_lo, "greatest": tr_hi}
    for side, tr in traces.items():
        if not tr.converged:
            raise NonConvergenceError(
                f"{side} chain did not converge in {max_outer} steps "
                f"(last increment {tr.weighted_deltas[-1]:.3g})",
                trace=tr,
            )
    if not leq(least, greatest, 10 * tol):
        i = int(np.argmax(least.values - greatest.values))
        raise HypothesisViolation(f"least > greatest at t={least.t[i]}", node=float(least.t[i]))
    log.info("monotone chains converged: %d / %d steps", tr_lo.iterations, tr_hi.iterations)
    return SolutionPair(
        least=least,
        greatest=greatest,
        traces=traces,
        boundary_residuals=(abs(prob.boundary(least)), abs(prob.boundary(greatest))),
        differential_residuals=(differential_residual(least, prob), differential_residual(greatest, prob)),
        integral_residuals=(integral_residual(least, prob), integral_residual(greatest, prob)),
        chains={"least": h_lo, "greatest": h_hi} if keep_chains else None,
    )
