"""Constructive lower and upper solutions for boundary functionals B(x(c), x) = x(c) - phi(x).

With |f(t, x, y, gamma)| <= p(t) h(|x|, |y|) and w the solution of

    w' = p(t) h(w, w),   w(a) = m,

the pair alpha = -w + n_alpha, beta = w - n_beta is a lower/upper pair as
soon as  w(c) - phi(w) >= n_i (1 - phi(1))  for i = alpha, beta  and
0 <= n_i <= m.  For a delay c = a and w(c) = m.  For an advance the
boundary sits at c = b, so the inequality is checked with w(b); w itself
is still anchored at a, which is what keeps w >= m >= n_i and therefore
alpha <= beta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .errors import InfeasibleBoundsError, PreconditionError
from .ivp import DEFAULT_TOL, IvpSpec, solve_ivp
from .monotone import CheckReport
from .quadrature import integrate
from .trajectory import Deviation, Mesh, Trajectory, leq, sample


@dataclass(frozen=True)
class BoundsSpec:
    p: Callable
    h: Callable
    phi: Callable
    m: float
    n_alpha: float
    n_beta: float
    side: Literal["delay", "advance"] = "delay"

    def __post_init__(self):
        if self.side not in ("delay", "advance"):
            raise ValueError(f"side must be 'delay' or 'advance', got {self.side!r}")
        for name in ("m", "n_alpha", "n_beta"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a nonnegative number, got {v}")


def _h_lipschitz(spec: BoundsSpec, mesh: Mesh, w_max: float) -> Callable:
    """Crude local Lipschitz weight of p(t) h(w, w) for the contraction estimate."""
    u = np.linspace(0.0, max(w_max, spec.m + 1.0), 257)
    hv = sample(spec.h, u, u)
    slope = float(np.max(np.abs(np.diff(hv) / np.diff(u))))

    def L(t):
        return slope * np.abs(sample(spec.p, t))

    return L


def comparison_solution(spec: BoundsSpec, mesh: Mesh, tol: float = DEFAULT_TOL) -> Trajectory:
    """w' = p(t) h(w, w), w(a) = m, solved by Picard iteration without deviation."""
    pv = sample(spec.p, mesh.points)
    if np.any(pv < 0):
        i = int(np.flatnonzero(pv < 0)[0])
        raise PreconditionError(f"p must be nonnegative, but p({mesh.points[i]}) = {pv[i]}")
    p, h = spec.p, spec.h

    def g(t, x, y):
        return sample(p, t) * sample(h, x, x)

    ivp = IvpSpec(
        g=g,
        tau=Deviation("delay", lambda t: t),
        anchor_value=float(spec.m),
        anchor="start",
        L1=_h_lipschitz(spec, mesh, 10.0 * (spec.m + 1.0)),
    )
    w, _ = solve_ivp(ivp, mesh, tol=tol, max_iter=1000)
    return w


def check_feasibility(spec: BoundsSpec, w: Trajectory) -> CheckReport:
    """Slack w(c) - phi(w) - n_i (1 - phi(1)) for i = alpha, beta.

    Feasible iff both slacks are >= 0 and n_alpha, n_beta <= m.
    """
    phi_w = float(spec.phi(w))
    phi_1 = float(spec.phi(Trajectory.constant(1.0, w.mesh)))
    w_c = float(w.values[0] if spec.side == "delay" else w.values[-1])
    slack_a = w_c - phi_w - spec.n_alpha * (1.0 - phi_1)
    slack_b = w_c - phi_w - spec.n_beta * (1.0 - phi_1)
    return CheckReport(
        "feasibility",
        bool(slack_a >= 0.0 and slack_b >= 0.0 and max(spec.n_alpha, spec.n_beta) <= spec.m),
        {
            "phi(w)": phi_w,
            "phi(1)": phi_1,
            "slack_alpha": slack_a,
            "slack_beta": slack_b,
            "m": spec.m,
            "n_alpha": spec.n_alpha,
            "n_beta": spec.n_beta,
        },
    )


def construct(spec: BoundsSpec, mesh: Mesh, tol: float = DEFAULT_TOL) -> tuple:
    """alpha = -w + n_alpha, beta = w - n_beta; raises InfeasibleBoundsError if the slack is negative.

    Returns (alpha, beta, w, report).
    """
    w = comparison_solution(spec, mesh, tol)
    report = check_feasibility(spec, w)
    if not report.passed:
        raise InfeasibleBoundsError(f"construction infeasible: {report.summary()}", report=report)
    alpha = Trajectory(mesh, -w.values + spec.n_alpha)
    beta = Trajectory(mesh, w.values - spec.n_beta)
    if not leq(alpha, beta, tol):
        raise InfeasibleBoundsError("constructed alpha exceeds beta; w fell below m", report=report)
    return alpha, beta, w, report


def check_functional(phi: Callable, mesh: Mesh, samples: int = 20, seed: int = 0,
                     tol: float = 1e-9) -> CheckReport:
    """Sample linearity and monotonicity of phi on random trajectories."""
    rng = np.random.default_rng(seed)
    worst_lin = 0.0
    worst_mono = -np.inf
    kt = np.linspace(mesh.a, mesh.b, 9)
    for _ in range(samples):
        x = Trajectory(mesh, np.interp(mesh.points, kt, rng.normal(size=kt.size)))
        y = Trajectory(mesh, np.interp(mesh.points, kt, rng.normal(size=kt.size)))
        c = rng.normal()
        lin = abs(phi(x + y * c) - phi(x) - c * phi(y))
        worst_lin = max(worst_lin, lin / (1.0 + abs(phi(x)) + abs(c * phi(y))))
        bump = Trajectory(mesh, np.interp(mesh.points, kt, rng.uniform(0, 1, kt.size)))
        worst_mono = max(worst_mono, phi(x) - phi(x + bump))
    ok = worst_lin <= tol and worst_mono <= tol
    return CheckReport(
        "phi linear and nondecreasing",
        bool(ok),
        {"max linearity defect": worst_lin, "max monotonicity violation": worst_mono},
        certifying=False,
    )


def nagumo_probe(h: Callable, U: float, n: int = 4096) -> float:
    """int_0^U du / h(u, u) by Simpson.

    A heuristic witness for the divergence of the improper integral:
    growth with U suggests divergence, a plateau suggests the growth
    condition fails.  It certifies nothing.
    """
    u = np.linspace(0.0, U, n + 1)
    hv = sample(h, u, u)
    if np.any(hv <= 0):
        i = int(np.flatnonzero(hv <= 0)[0])
        raise PreconditionError(f"h(u, u) must be positive, but h({u[i]}, {u[i]}) = {hv[i]}")
    return integrate(lambda s: 1.0 / sample(h, s, s), 0.0, U, n)
