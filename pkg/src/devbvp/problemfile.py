"""Problem files: ``[section]`` headers with ``key = expression`` lines.

Example::

    [meta]
    name = trivial

    [interval]
    a = 0
    b = 1

    [deviation]
    kind = delay
    tau = t

    [rhs]
    f = 0

    [boundary]
    B = v - 1

    [weights]
    K = 0
    L = 0

    [bounds]
    alpha = 0
    beta = 2

Expressions are parsed by :mod:`devbvp.dsl` in the context of their key.
A ``[construct]`` section (p, h, phi, m, n_alpha, n_beta) may replace
``[bounds]``; an ``[ivp]`` section (g, value, L1, L2) feeds ``devbvp ivp``.
``#`` and ``;`` start comment lines.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import dsl
from .bounds import BoundsSpec
from .errors import ProblemFileError
from .ivp import IvpSpec
from .monotone import DeviatedProblem
from .trajectory import Deviation, Mesh, Trajectory

# Every tunable with its default.  Reports echo the values actually used.
DEFAULTS = {
    "mesh_n": 1024,  # mesh intervals, i.e. mesh_n + 1 points
    "tol": 1e-8,  # outer monotone iteration, sup-norm increment
    "max_iter": 500,  # outer monotone iteration cap
    "scan_n": 4096,  # root-finder scan cells
    "quad_n": 1024,  # Simpson subintervals for the integral condition
    "ivp_tol": 1e-10,  # Picard increment for `devbvp ivp`
    "ivp_max_iter": 200,
    "lipschitz_samples": 2000,
    "seed": 0,
}
_INT_KEYS = {"mesh_n", "max_iter", "scan_n", "quad_n", "ivp_max_iter", "lipschitz_samples", "seed"}

# section -> key -> dsl context
_EXPR_KEYS = {
    "deviation": {"tau": "deviation"},
    "rhs": {"f": "rhs"},
    "boundary": {"B": "boundary"},
    "weights": {"K": "scalar-of-t", "L": "scalar-of-t"},
    "bounds": {"alpha": "bound-fn", "beta": "bound-fn"},
    "construct": {"p": "scalar-of-t", "h": "comparison", "phi": "functional"},
    "ivp": {"g": "ivp", "L1": "scalar-of-t", "L2": "scalar-of-t"},
}
_NUM_KEYS = {
    "interval": ("a", "b"),
    "construct": ("m", "n_alpha", "n_beta"),
    "ivp": ("value",),
}
_TEXT_KEYS = {
    "meta": ("name",),
    "deviation": ("kind",),
    "boundary": ("anchor",),
    "ivp": ("anchor",),
}


@dataclass
class ProblemFile:
    name: str
    a: float
    b: float
    kind: str
    exprs: dict
    numbers: dict
    numerics: dict
    path: Optional[Path] = None
    extras: dict = field(default_factory=dict)

    # ------------------------------------------------------------ builders

    def has(self, section: str, key: str) -> bool:
        return (section, key) in self.exprs

    def expr(self, section: str, key: str) -> dsl.Expr:
        try:
            return self.exprs[(section, key)]
        except KeyError:
            raise ProblemFileError(f"missing [{section}] {key}") from None

    def deviation(self) -> Deviation:
        return Deviation(self.kind, dsl.compile_of_t(self.expr("deviation", "tau")))

    def mesh(self, n: Optional[int] = None) -> Mesh:
        return Mesh.uniform(self.a, self.b, int(n or self.numerics["mesh_n"]))

    def problem(self, force: bool = False) -> DeviatedProblem:
        tau = self.deviation()
        return DeviatedProblem(
            interval=(self.a, self.b),
            tau=tau,
            f=dsl.compile_rhs(self.expr("rhs", "f"), tau),
            B=dsl.compile_boundary(self.expr("boundary", "B")),
            K=dsl.compile_of_t(self.expr("weights", "K")) if self.has("weights", "K") else (lambda t: 0.0),
            L=dsl.compile_of_t(self.expr("weights", "L")) if self.has("weights", "L") else (lambda t: 0.0),
            force=force,
            quad_n=self.numerics["quad_n"],
            name=self.name,
        )

    @property
    def constructive(self) -> bool:
        return self.has("construct", "p")

    def bounds_spec(self) -> BoundsSpec:
        if not self.constructive:
            raise ProblemFileError("no [construct] section")
        return BoundsSpec(
            p=dsl.compile_of_t(self.expr("construct", "p")),
            h=dsl.compile_comparison(self.expr("construct", "h")),
            phi=dsl.compile_functional(self.expr("construct", "phi")),
            m=self.numbers["construct.m"],
            n_alpha=self.numbers["construct.n_alpha"],
            n_beta=self.numbers["construct.n_beta"],
            side=self.kind,
        )

    def explicit_bounds(self, mesh: Mesh) -> tuple:
        return (
            Trajectory.from_function(dsl.compile_of_t(self.expr("bounds", "alpha")), mesh),
            Trajectory.from_function(dsl.compile_of_t(self.expr("bounds", "beta")), mesh),
        )

    def ivp_spec(self) -> IvpSpec:
        tau = self.deviation()
        anchor = self.extras.get("ivp.anchor", "start" if self.kind == "delay" else "end")
        if "ivp.value" not in self.numbers:
            raise ProblemFileError("missing [ivp] value")

        def weight(key):
            return dsl.compile_of_t(self.expr("ivp", key)) if self.has("ivp", key) else (lambda t: 0.0)

        return IvpSpec(
            g=dsl.compile_ivp(self.expr("ivp", "g"), tau),
            tau=tau,
            anchor_value=self.numbers["ivp.value"],
            anchor=anchor,
            L1=weight("L1"),
            L2=weight("L2"),
        )


def _number(raw: str, where: str) -> float:
    try:
        return float(dsl.evaluate(dsl.parse(raw, "functional")))
    except dsl.ParseError as exc:
        raise ProblemFileError(f"{where}: not a number: {raw!r} ({exc})") from None


def loads(text: str, path: Optional[Path] = None) -> ProblemFile:
    cp = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), interpolation=None, strict=True
    )
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path or "<string>"))
    except configparser.Error as exc:
        raise ProblemFileError(str(exc)) from None

    known = set(_EXPR_KEYS) | set(_NUM_KEYS) | set(_TEXT_KEYS) | {"numerics"}
    for sec in cp.sections():
        if sec not in known:
            raise ProblemFileError(f"unknown section [{sec}]")
        allowed = set(_EXPR_KEYS.get(sec, {})) | set(_NUM_KEYS.get(sec, ())) | set(_TEXT_KEYS.get(sec, ()))
        if sec == "numerics":
            allowed = set(DEFAULTS)
        for key in cp[sec]:
            if key not in allowed:
                raise ProblemFileError(f"unknown key {key!r} in [{sec}]")

    if not cp.has_section("interval"):
        raise ProblemFileError("missing [interval] section")
    numbers = {}
    for sec, keys in _NUM_KEYS.items():
        if cp.has_section(sec):
            for key in keys:
                if key in cp[sec]:
                    numbers[f"{sec}.{key}"] = _number(cp[sec][key], f"[{sec}] {key}")
    for key in ("a", "b"):
        if f"interval.{key}" not in numbers:
            raise ProblemFileError(f"missing [interval] {key}")
    a, b = numbers["interval.a"], numbers["interval.b"]
    if not a < b:
        raise ProblemFileError(f"[interval] needs a < b, got a={a}, b={b}")

    exprs = {}
    for sec, keys in _EXPR_KEYS.items():
        if not cp.has_section(sec):
            continue
        for key, ctx in keys.items():
            if key in cp[sec]:
                src = cp[sec][key].strip()
                try:
                    exprs[(sec, key)] = dsl.parse(src, ctx)
                except dsl.ParseError as exc:
                    raise ProblemFileError(f"[{sec}] {key}: {exc}") from exc

    kind = cp.get("deviation", "kind", fallback="").strip()
    if kind not in ("delay", "advance"):
        raise ProblemFileError(f"[deviation] kind must be 'delay' or 'advance', got {kind!r}")
    if ("deviation", "tau") not in exprs:
        raise ProblemFileError("missing [deviation] tau")

    extras = {}
    anchor = cp.get("boundary", "anchor", fallback=None)
    if anchor is not None:
        anchor = anchor.strip()
        expected = "a" if kind == "delay" else "b"
        if anchor not in ("a", "b", "start", "end"):
            raise ProblemFileError(f"[boundary] anchor must be a or b, got {anchor!r}")
        if anchor not in (expected, {"a": "start", "b": "end"}[expected]):
            raise ProblemFileError(f"a {kind} problem is anchored at {expected}, not {anchor}")
    ivp_anchor = cp.get("ivp", "anchor", fallback=None)
    if ivp_anchor is not None:
        ivp_anchor = ivp_anchor.strip()
        if ivp_anchor not in ("start", "end"):
            raise ProblemFileError(f"[ivp] anchor must be start or end, got {ivp_anchor!r}")
        extras["ivp.anchor"] = ivp_anchor

    if cp.has_section("construct"):
        missing = [k for k in ("p", "h", "phi") if ("construct", k) not in exprs]
        missing += [k for k in ("m", "n_alpha", "n_beta") if f"construct.{k}" not in numbers]
        if missing:
            raise ProblemFileError(f"[construct] is missing {', '.join(missing)}")

    numerics = dict(DEFAULTS)
    if cp.has_section("numerics"):
        for key, raw in cp["numerics"].items():
            val = _number(raw, f"[numerics] {key}")
            if key in _INT_KEYS:
                if val != int(val):
                    raise ProblemFileError(f"[numerics] {key} must be an integer")
                val = int(val)
            numerics[key] = val
    validate_numerics(numerics)

    return ProblemFile(
        name=cp.get("meta", "name", fallback=path.stem if path else "problem").strip(),
        a=a,
        b=b,
        kind=kind,
        exprs=exprs,
        numbers=numbers,
        numerics=numerics,
        path=path,
        extras=extras,
    )


def validate_numerics(numerics: dict):
    for key, val in numerics.items():
        if key == "seed":
            continue
        if not val > 0:
            raise ProblemFileError(f"{key} must be positive, got {val}")
    if numerics["mesh_n"] < 2:
        raise ProblemFileError("mesh_n must be >= 2")
    if numerics["quad_n"] % 4:
        raise ProblemFileError("quad_n must be divisible by 4")


def load(path) -> ProblemFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, path)
