"""Piecewise-linear trajectories on a mesh.

Absolutely continuous functions on I = [a, b] are represented by their
nodal values on a strictly increasing mesh and linear interpolation in
between.  Everything here is immutable once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal

import numpy as np

from .errors import DeviationError, DomainError, MeshMismatchError

DEFAULT_INTERVALS = 1024


def sample(fn: Callable, *args) -> np.ndarray:
    """Evaluate ``fn`` on array arguments, tolerating scalar-only callables.

    Vectorised callables are called once; a scalar return value is
    broadcast.  Callables that reject arrays fall back to elementwise
    evaluation.
    """
    arrays = [np.asarray(a, dtype=float) for a in args]
    shape = np.broadcast_shapes(*(a.shape for a in arrays))
    try:
        out = np.asarray(fn(*arrays), dtype=float)
    except (TypeError, ValueError):
        flat = [np.broadcast_to(a, shape).ravel() for a in arrays]
        out = np.array([fn(*vals) for vals in zip(*flat)], dtype=float)
        return out.reshape(shape)
    if out.shape != shape:
        out = np.broadcast_to(out, shape).copy()
    return out


@dataclass(frozen=True, eq=False)
class Mesh:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a mesh needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("mesh points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("mesh points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, a: float, b: float, n: int = DEFAULT_INTERVALS) -> "Mesh":
        """Uniform mesh with ``n`` intervals (``n + 1`` points) on [a, b]."""
        if not a < b:
            raise ValueError(f"need a < b, got a={a}, b={b}")
        if n < 1:
            raise ValueError("need at least one interval")
        pts = np.linspace(a, b, n + 1)
        pts[0], pts[-1] = a, b
        return cls(pts)

    @property
    def a(self) -> float:
        return float(self.points[0])

    @property
    def b(self) -> float:
        return float(self.points[-1])

    @property
    def n_intervals(self) -> int:
        return self.points.size - 1

    @cached_property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.points[:-1] + self.points[1:])

    @cached_property
    def is_uniform(self) -> bool:
        h = np.diff(self.points)
        return bool(np.allclose(h, h[0], rtol=1e-12, atol=0.0))

    def same_as(self, other: "Mesh") -> bool:
        return self is other or (
            self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
        )

    def reversed(self) -> "Mesh":
        return Mesh(-self.points[::-1])

    def __len__(self) -> int:
        return self.points.size

    def __repr__(self) -> str:
        return f"Mesh([{self.a}, {self.b}], n_intervals={self.n_intervals})"


@dataclass(frozen=True, eq=False)
class Trajectory:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.mesh.points.shape:
            raise ValueError(
                f"{vals.size} values for a mesh of {self.mesh.points.size} points"
            )
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ValueError(f"non-finite value at t={self.mesh.points[bad]}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, fn: Callable, mesh: Mesh) -> "Trajectory":
        return cls(mesh, sample(fn, mesh.points))

    @classmethod
    def constant(cls, c: float, mesh: Mesh) -> "Trajectory":
        return cls(mesh, np.full(mesh.points.shape, float(c)))

    @property
    def t(self) -> np.ndarray:
        return self.mesh.points

    def __call__(self, t):
        """Value at ``t``; nodal values are returned exactly.

        Raises DomainError outside [a, b].
        """
        ts = np.asarray(t, dtype=float)
        if np.any(ts < self.mesh.a) or np.any(ts > self.mesh.b) or np.any(np.isnan(ts)):
            raise DomainError(
                f"t={t!r} outside [{self.mesh.a}, {self.mesh.b}]"
            )
        out = np.interp(ts, self.mesh.points, self.values)
        return float(out) if out.ndim == 0 else out

    def interp(self, t) -> np.ndarray:
        """Interpolate with clamping to [a, b] (internal use: deviated points)."""
        return np.interp(t, self.mesh.points, self.values)

    def slopes(self) -> np.ndarray:
        """Difference quotients on each mesh interval."""
        return np.diff(self.values) / np.diff(self.mesh.points)

    @cached_property
    def integral(self) -> float:
        """Integral over [a, b] from the nodal values.

        Composite Simpson on uniform meshes with an even interval count
        (nonnegative weights, so the functional stays linear and
        nondecreasing); trapezoid otherwise.
        """
        n = self.mesh.n_intervals
        v = self.values
        if self.mesh.is_uniform and n % 2 == 0:
            h = (self.mesh.b - self.mesh.a) / n
            return float(h / 3.0 * (v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-1:2].sum()))
        return float(np.sum(0.5 * np.diff(self.mesh.points) * (v[:-1] + v[1:])))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _check(self, other: "Trajectory"):
        if not self.mesh.same_as(other.mesh):
            raise MeshMismatchError("trajectories live on different meshes")

    def __add__(self, other):
        if isinstance(other, Trajectory):
            self._check(other)
            return Trajectory(self.mesh, self.values + other.values)
        return Trajectory(self.mesh, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Trajectory):
            self._check(other)
            return Trajectory(self.mesh, self.values - other.values)
        return Trajectory(self.mesh, self.values - float(other))

    def __neg__(self):
        return Trajectory(self.mesh, -self.values)

    def __mul__(self, c):
        return Trajectory(self.mesh, self.values * float(c))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Trajectory({self.mesh!r}, min={self.values.min():.6g}, max={self.values.max():.6g})"


@dataclass(frozen=True)
class Deviation:
    """Deviated argument t -> tau(t), either a delay or an advance."""

    kind: Literal["delay", "advance"]
    map: Callable = field(repr=False)

    def __post_init__(self):
        if self.kind not in ("delay", "advance"):
            raise ValueError(f"kind must be 'delay' or 'advance', got {self.kind!r}")

    def __call__(self, t) -> np.ndarray:
        return sample(self.map, t)

    def validate(self, mesh: Mesh) -> np.ndarray:
        """Check range and direction at every mesh point; return tau(t_i)."""
        t = mesh.points
        tau = self(t)
        slack = 4 * np.finfo(float).eps * (1.0 + abs(mesh.a) + abs(mesh.b))
        if not np.all(np.isfinite(tau)):
            i = int(np.flatnonzero(~np.isfinite(tau))[0])
            raise DeviationError(f"tau({t[i]}) is not finite")
        out = np.flatnonzero((tau < mesh.a - slack) | (tau > mesh.b + slack))
        if out.size:
            i = int(out[0])
            raise DeviationError(
                f"tau({t[i]}) = {tau[i]} leaves the interval [{mesh.a}, {mesh.b}]"
            )
        if self.kind == "delay":
            bad = np.flatnonzero(tau > t + slack)
        else:
            bad = np.flatnonzero(tau < t - slack)
        if bad.size:
            i = int(bad[0])
            raise DeviationError(
                f"{self.kind} requires tau(t) {'<=' if self.kind == 'delay' else '>='} t, "
                f"but tau({t[i]}) = {tau[i]}"
            )
        return np.clip(tau, mesh.a, mesh.b)

    def reversed(self) -> "Deviation":
        """tau_hat(s) = -tau(-s), with the kind swapped."""
        fn = self.map
        kind = "advance" if self.kind == "delay" else "delay"
        return Deviation(kind, lambda s: -sample(fn, -np.asarray(s, dtype=float)))


def lambda_accumulate(L1: Trajectory, L2: Trajectory) -> Trajectory:
    """Cumulative trapezoid integral of L1 + L2 from a, the weight of the Bielecki norm."""
    L1._check(L2)
    if np.any(L1.values < 0) or np.any(L2.values < 0):
        raise ValueError("Lipschitz weights must be nonnegative")
    s = L1.values + L2.values
    h = np.diff(L1.mesh.points)
    acc = np.concatenate(([0.0], np.cumsum(0.5 * h * (s[:-1] + s[1:]))))
    return Trajectory(L1.mesh, acc)


def weighted_norm(x: Trajectory, lam: Trajectory) -> float:
    """max_i exp(-lambda(t_i)) |x(t_i)|."""
    x._check(lam)
    return float(np.max(np.exp(-lam.values) * np.abs(x.values)))


def leq(x: Trajectory, y: Trajectory, tol: float = 0.0) -> bool:
    """Nodewise order x <= y + tol."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    x._check(y)
    return bool(np.all(x.values <= y.values + tol))


def reverse_time(x: Trajectory) -> Trajectory:
    """y(s) = x(-s) on the mirrored mesh."""
    return Trajectory(x.mesh.reversed(), x.values[::-1])


def default_order_tol(alpha: Trajectory, beta: Trajectory) -> float:
    return 1e-9 * (1.0 + alpha.sup_norm() + beta.sup_norm())
