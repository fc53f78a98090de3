"""Expression language for problem files.

Grammar (LL(1), loosest binding first)::

    comparison := additive [("<" | "<=" | ">" | ">=" | "==" | "!=") additive]
    additive   := term (("+" | "-") term)*
    term       := unary (("*" | "/") unary)*
    unary      := "-" unary | power
    power      := primary ["^" unary]            # right associative
    primary    := NUMBER | NAME | NAME "(" [args] ")" | "(" comparison ")"
    args       := comparison ("," comparison)*

``if(c, a, b)`` is the lowest-precedence construct but is written as a
call, so it needs no grammar rule of its own.  Comparisons yield 1.0 or
0.0; ``if`` takes the first branch when its condition is nonzero and only
evaluates the branch it takes.

Names available depend on the context the expression is parsed in (see
``CONTEXTS``).  ``traj(e)`` evaluates the functional argument gamma at
time ``e`` (clamped to [a, b]), ``integral()`` is the integral of gamma
over [a, b] and ``dev()`` is tau(t).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import DevbvpError, EvaluationError
from .trajectory import sample

# ---------------------------------------------------------------- contexts

CONTEXTS = {
    "rhs": ({"t", "x", "y"}, True, True),
    "deviation": ({"t"}, False, False),
    "boundary": ({"v"}, True, False),
    "scalar-of-t": ({"t"}, False, False),
    "bound-fn": ({"t"}, False, False),
    "functional": (set(), True, False),
    "comparison": ({"x", "y"}, False, False),
    "ivp": ({"t", "x", "y"}, False, True),
}
# context -> (variables, functionals traj()/integral() allowed, dev() allowed)

CONSTANTS = {"pi": math.pi, "e": math.e}

UNARY = {
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "tan": (math.tan, np.tan),
    "tanh": (math.tanh, np.tanh),
    "exp": (math.exp, np.exp),
    "log": (math.log, np.log),
    "sqrt": (math.sqrt, np.sqrt),
    "abs": (abs, np.abs),
    "floor": (lambda z: float(math.floor(z)), np.floor),
    "trunc": (lambda z: float(math.trunc(z)), np.trunc),
}
ARITY = {name: 1 for name in UNARY}
ARITY.update({"if": 3, "min": 2, "max": 2, "traj": 1, "integral": 0, "dev": 0})

COMPARISONS = ("<=", ">=", "==", "!=", "<", ">")


class ParseError(DevbvpError, ValueError):
    def __init__(self, position: int, expected: str, found: str, source: str = ""):
        self.position = position
        self.expected = expected
        self.found = found
        self.source = source
        super().__init__(f"at offset {position}: expected {expected}, found {found!r}")


class UnboundIdentifierError(ParseError):
    def __init__(self, position: int, name: str, context: str, source: str = ""):
        self.name = name
        self.context = context
        super().__init__(position, f"a name bound in context '{context}'", name, source)
        self.args = (f"unbound identifier {name!r} at offset {position} in context '{context}'",)

    def __str__(self):
        return self.args[0]


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    pos: int = field(default=0, compare=False)


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expr:
    """A parsed expression together with the context it was checked against."""

    root: Node
    context: str
    source: str = field(default="", compare=False)

    def __str__(self):
        return to_source(self)


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|!=|[-+*/^(),<>])"
    r")"
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def tokenize(source: str) -> list:
    toks = []
    pos = 0
    n = len(source)
    while True:
        while pos < n and source[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            raise ParseError(pos, "a number, name or operator", source[pos], source)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("eof", "", n))
    return toks


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, source: str, context: str):
        if context not in CONTEXTS:
            raise ValueError(f"unknown context {context!r}; choose from {sorted(CONTEXTS)}")
        self.source = source
        self.context = context
        self.variables, self.functionals, self.dev = CONTEXTS[context]
        self.toks = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "eof":
            raise ParseError(self.tok.pos, repr(text), self.tok.text or "end of input", self.source)
        return self.advance()

    def parse(self) -> Node:
        if self.tok.kind == "eof":
            raise ParseError(0, "an expression", "end of input", self.source)
        node = self.comparison()
        if self.tok.kind != "eof":
            raise ParseError(self.tok.pos, "end of input", self.tok.text, self.source)
        return node

    def comparison(self) -> Node:
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in COMPARISONS:
            op = self.advance()
            right = self.additive()
            left = BinOp(op.text, left, right, op.pos)
        return left

    def additive(self) -> Node:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance()
            left = BinOp(op.text, left, self.term(), op.pos)
        return left

    def term(self) -> Node:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance()
            left = BinOp(op.text, left, self.unary(), op.pos)
        return left

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            op = self.advance()
            return Neg(self.unary(), op.pos)
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            op = self.advance()
            return BinOp("^", base, self.unary(), op.pos)
        return base

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), tok.pos)
        if tok.kind == "name":
            self.advance()
            if self.tok.text == "(" and self.tok.kind == "op":
                return self.call(tok)
            if tok.text in self.variables:
                return Var(tok.text, tok.pos)
            if tok.text in CONSTANTS:
                return Var(tok.text, tok.pos)
            raise UnboundIdentifierError(tok.pos, tok.text, self.context, self.source)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.comparison()
            self.expect(")")
            return node
        raise ParseError(tok.pos, "a number, name or '('", tok.text or "end of input", self.source)

    def call(self, name: _Tok) -> Node:
        fname = name.text
        if fname not in ARITY:
            raise UnboundIdentifierError(name.pos, fname, self.context, self.source)
        if fname in ("traj", "integral") and not self.functionals:
            raise UnboundIdentifierError(name.pos, fname, self.context, self.source)
        if fname == "dev" and not self.dev:
            raise UnboundIdentifierError(name.pos, fname, self.context, self.source)
        self.expect("(")
        args = []
        if not (self.tok.kind == "op" and self.tok.text == ")"):
            args.append(self.comparison())
            while self.tok.kind == "op" and self.tok.text == ",":
                self.advance()
                args.append(self.comparison())
        close = self.expect(")")
        if len(args) != ARITY[fname]:
            raise ParseError(
                close.pos, f"{ARITY[fname]} argument(s) to {fname}()", f"{len(args)} argument(s)", self.source
            )
        return Call(fname, tuple(args), name.pos)


def parse(source: str, context: str) -> Expr:
    """Parse ``source`` and check every name against ``context``."""
    return Expr(_Parser(source, context).parse(), context, source)


# ---------------------------------------------------------------- printer


def _fmt(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_fmt(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_fmt(node.left)} {node.op} {_fmt(node.right)})"
    return f"{node.name}({', '.join(_fmt(a) for a in node.args)})"


def to_source(e: Union[Expr, Node]) -> str:
    """Fully parenthesised source text that parses back to the same tree."""
    return _fmt(e.root if isinstance(e, Expr) else e)


# ---------------------------------------------------------------- evaluation


@dataclass
class Env:
    t: Optional[object] = None
    x: Optional[object] = None
    y: Optional[object] = None
    v: Optional[object] = None
    gamma: Optional[object] = None
    tau: Optional[Callable] = None
    clamped: int = 0


def _need(env: Env, name: str, node: Node):
    val = getattr(env, name)
    if val is None:
        raise EvaluationError(f"no binding for {name!r} needed by {_fmt(node)}")
    return val


def _bad(node: Node, why: str) -> EvaluationError:
    return EvaluationError(f"{why} in {_fmt(node)}", location=node.pos)


def _clamp_scalar(env: Env, s: float) -> float:
    g = env.gamma
    a, b = g.mesh.a, g.mesh.b
    if s < a or s > b:
        env.clamped += 1
        return min(max(s, a), b)
    return s


def _eval_scalar(node: Node, env: Env) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in CONSTANTS:
            return CONSTANTS[node.name]
        return float(_need(env, node.name, node))
    if isinstance(node, Neg):
        return -_eval_scalar(node.operand, env)
    if isinstance(node, BinOp):
        lhs = _eval_scalar(node.left, env)
        rhs = _eval_scalar(node.right, env)
        op = node.op
        if op == "+":
            out = lhs + rhs
        elif op == "-":
            out = lhs - rhs
        elif op == "*":
            out = lhs * rhs
        elif op == "/":
            if rhs == 0.0:
                raise _bad(node, "division by zero")
            out = lhs / rhs
        elif op == "^":
            try:
                out = math.pow(lhs, rhs)
            except (ValueError, OverflowError, ZeroDivisionError) as exc:
                raise _bad(node, f"power undefined ({exc})") from None
        elif op == "<":
            out = float(lhs < rhs)
        elif op == "<=":
            out = float(lhs <= rhs)
        elif op == ">":
            out = float(lhs > rhs)
        elif op == ">=":
            out = float(lhs >= rhs)
        elif op == "==":
            out = float(lhs == rhs)
        else:
            out = float(lhs != rhs)
        if not math.isfinite(out):
            raise _bad(node, "non-finite result")
        return out
    name = node.name
    if name == "if":
        cond = _eval_scalar(node.args[0], env)
        return _eval_scalar(node.args[1] if cond != 0.0 else node.args[2], env)
    if name in ("min", "max"):
        p = _eval_scalar(node.args[0], env)
        q = _eval_scalar(node.args[1], env)
        return min(p, q) if name == "min" else max(p, q)
    if name == "traj":
        g = _need(env, "gamma", node)
        s = _clamp_scalar(env, _eval_scalar(node.args[0], env))
        return float(np.interp(s, g.mesh.points, g.values))
    if name == "integral":
        return _need(env, "gamma", node).integral
    if name == "dev":
        tau = _need(env, "tau", node)
        return float(tau(float(_need(env, "t", node))))
    arg = _eval_scalar(node.args[0], env)
    if name == "log" and arg <= 0.0:
        raise _bad(node, f"log of nonpositive value {arg!r}")
    if name == "sqrt" and arg < 0.0:
        raise _bad(node, f"sqrt of negative value {arg!r}")
    try:
        out = UNARY[name][0](arg)
    except (ValueError, OverflowError) as exc:
        raise _bad(node, str(exc)) from None
    if not math.isfinite(out):
        raise _bad(node, "non-finite result")
    return out


def _first(mask, *arrays):
    i = int(np.flatnonzero(mask)[0])
    return tuple(float(np.asarray(a).ravel()[i]) for a in arrays)


class _ArrayEval:
    """Vectorised evaluator; ``if`` evaluates each branch only where it is taken."""

    def __init__(self, env: Env, size: int):
        self.env = env
        self.size = size

    def var(self, name: str, node: Node, idx):
        val = np.asarray(_need(self.env, name, node), dtype=float)
        val = np.broadcast_to(val, (self.size,)) if val.ndim == 0 else val.ravel()
        return val if idx is None else val[idx]

    def run(self, node: Node, idx) -> np.ndarray:
        n = self.size if idx is None else idx.size
        if isinstance(node, Num):
            return np.full(n, node.value)
        if isinstance(node, Var):
            if node.name in CONSTANTS:
                return np.full(n, CONSTANTS[node.name])
            return self.var(node.name, node, idx)
        if isinstance(node, Neg):
            return -self.run(node.operand, idx)
        if isinstance(node, BinOp):
            return self.binop(node, idx)
        return self.call(node, idx)

    def binop(self, node: BinOp, idx) -> np.ndarray:
        lhs = self.run(node.left, idx)
        rhs = self.run(node.right, idx)
        op = node.op
        with np.errstate(all="ignore"):
            if op == "+":
                out = lhs + rhs
            elif op == "-":
                out = lhs - rhs
            elif op == "*":
                out = lhs * rhs
            elif op == "/":
                zero = rhs == 0.0
                if np.any(zero):
                    raise _bad(node, f"division by zero (numerator {_first(zero, lhs)[0]!r})")
                out = lhs / rhs
            elif op == "^":
                out = np.power(lhs, rhs)
                undefined = ~np.isfinite(out)
                if np.any(undefined):
                    p, q = _first(undefined, lhs, rhs)
                    raise _bad(node, f"power undefined for {p!r} ^ {q!r}")
            else:
                out = {
                    "<": np.less, "<=": np.less_equal, ">": np.greater,
                    ">=": np.greater_equal, "==": np.equal, "!=": np.not_equal,
                }[op](lhs, rhs).astype(float)
        if not np.all(np.isfinite(out)):
            raise _bad(node, "non-finite result")
        return out

    def call(self, node: Call, idx) -> np.ndarray:
        name = node.name
        n = self.size if idx is None else idx.size
        if name == "if":
            cond = self.run(node.args[0], idx) != 0.0
            out = np.empty(n)
            base = np.arange(self.size) if idx is None else idx
            if np.any(cond):
                out[cond] = self.run(node.args[1], base[cond])
            if not np.all(cond):
                out[~cond] = self.run(node.args[2], base[~cond])
            return out
        if name in ("min", "max"):
            fn = np.minimum if name == "min" else np.maximum
            return fn(self.run(node.args[0], idx), self.run(node.args[1], idx))
        if name == "traj":
            g = _need(self.env, "gamma", node)
            s = self.run(node.args[0], idx)
            outside = (s < g.mesh.a) | (s > g.mesh.b)
            self.env.clamped += int(np.count_nonzero(outside))
            return np.interp(np.clip(s, g.mesh.a, g.mesh.b), g.mesh.points, g.values)
        if name == "integral":
            return np.full(n, _need(self.env, "gamma", node).integral)
        if name == "dev":
            tau = _need(self.env, "tau", node)
            return sample(tau, self.var("t", node, idx))
        arg = self.run(node.args[0], idx)
        if name == "log" and np.any(arg <= 0.0):
            raise _bad(node, f"log of nonpositive value {_first(arg <= 0.0, arg)[0]!r}")
        if name == "sqrt" and np.any(arg < 0.0):
            raise _bad(node, f"sqrt of negative value {_first(arg < 0.0, arg)[0]!r}")
        with np.errstate(all="ignore"):
            out = UNARY[name][1](arg)
        if not np.all(np.isfinite(out)):
            raise _bad(node, "non-finite result")
        return out


def evaluate(e: Union[Expr, Node], env: Union[Env, dict, None] = None, **bindings) -> float:
    """Evaluate at scalar bindings; IEEE partial functions raise EvaluationError."""
    env = _as_env(env, bindings)
    return _eval_scalar(e.root if isinstance(e, Expr) else e, env)


def evaluate_array(e: Union[Expr, Node], env: Union[Env, dict, None] = None, **bindings) -> np.ndarray:
    """Vectorised evaluation; array bindings broadcast against each other."""
    env = _as_env(env, bindings)
    arrays = [np.asarray(getattr(env, k), dtype=float) for k in ("t", "x", "y", "v") if getattr(env, k) is not None]
    shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
    size = int(np.prod(shape)) if shape else 1
    for k in ("t", "x", "y", "v"):
        val = getattr(env, k)
        if val is not None:
            setattr(env, k, np.broadcast_to(np.asarray(val, dtype=float), shape).ravel())
    out = _ArrayEval(env, size).run(e.root if isinstance(e, Expr) else e, None)
    return out.reshape(shape) if shape else out.reshape(())


def _as_env(env, bindings) -> Env:
    if env is None:
        return Env(**bindings)
    if isinstance(env, dict):
        return Env(**{**env, **bindings})
    return env


# ---------------------------------------------------------------- adapters


def compile_rhs(e: Expr, tau: Optional[Callable] = None) -> Callable:
    """f(t, x, y, gamma) as a vectorised callable."""

    def f(t, x, y, gamma=None):
        return evaluate_array(e, Env(t=t, x=x, y=y, gamma=gamma, tau=tau))

    f.expr = e
    return f


def compile_ivp(e: Expr, tau: Optional[Callable] = None) -> Callable:
    def g(t, x, y):
        return evaluate_array(e, Env(t=t, x=x, y=y, tau=tau))

    g.expr = e
    return g


def compile_of_t(e: Expr) -> Callable:
    def fn(t):
        return evaluate_array(e, Env(t=t))

    fn.expr = e
    return fn


def compile_boundary(e: Expr) -> Callable:
    """B(v, gamma); vectorised over v."""

    def B(v, gamma):
        out = evaluate_array(e, Env(v=v, gamma=gamma))
        return float(out) if out.ndim == 0 else out

    B.expr = e
    return B


def compile_functional(e: Expr) -> Callable:
    def phi(gamma):
        return float(evaluate_array(e, Env(gamma=gamma)))

    phi.expr = e
    return phi


def compile_comparison(e: Expr) -> Callable:
    def h(x, y):
        return evaluate_array(e, Env(x=x, y=y))

    h.expr = e
    return h
