"""Tiny arithmetic language for scenario coefficients F(x,t), sigma(x,t), E(t).

Grammar (whitespace is insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' factor)?
    base   := number | var | func '(' expr ')' | '(' expr ')' | '-' factor

``^`` is right-associative and binds tighter than unary minus, so ``-x^2``
is ``-(x^2)``. Expressions are parsed once and compiled to closures that
work on floats and numpy arrays alike.
"""

import functools
import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ParseError

VARIABLES = frozenset({"x", "t"})
FUNCTIONS = ("sin", "cos", "exp", "log", "abs", "sqrt", "tanh")


class SmoothnessWarning(UserWarning):
    """Coefficient uses a non-differentiable primitive (abs)."""


class LipschitzWarning(UserWarning):
    """Sampled x-slope of a coefficient exceeds the configured bound."""


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


def unparse(node):
    """Fully parenthesized source text that reparses to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{unparse(node.operand)})"
    if isinstance(node, BinOp):
        return f"({unparse(node.left)} {node.op} {unparse(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def free_variables(node):
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, BinOp):
        return free_variables(node.left) | free_variables(node.right)
    return free_variables(node.arg)


def _uses(node, func):
    if isinstance(node, Call):
        return node.func == func or _uses(node.arg, func)
    if isinstance(node, Neg):
        return _uses(node.operand, func)
    if isinstance(node, BinOp):
        return _uses(node.left, func) or _uses(node.right, func)
    return False


# --- parser ----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    _BASE_START = {"number", "variable", "function", "'('", "'-'"}

    def __init__(self, source, allowed):
        self.tokens = _tokenize(source)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"unexpected {text or 'end of input'!r}", pos, {f"'{op}'"})
        self.take()

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos,
                             {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            node = BinOp("^", node, self.factor())
        return node

    def base(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            if text in VARIABLES:
                if text not in self.allowed:
                    raise ParseError(f"undeclared variable {text!r}", pos,
                                     {repr(v) for v in self.allowed})
                return Var(text)
            raise ParseError(f"unknown name {text!r}", pos, self._BASE_START)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "op" and text == "-":
            # unary minus sits below '^': -x^2 == -(x^2)
            return Neg(self.factor())
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos, self._BASE_START)


# --- compilation -----------------------------------------------------------

def _check(bad, message, node):
    if np.any(bad):
        raise EvaluationError(message, unparse(node))


def _safe_log(v, node):
    _check(np.asarray(v) <= 0, "log of non-positive value", node)
    return np.log(v)


def _safe_sqrt(v, node):
    _check(np.asarray(v) < 0, "sqrt of negative value", node)
    return np.sqrt(v)


def _safe_div(a, b, node):
    _check(np.asarray(b) == 0, "division by zero", node)
    return a / b


def _safe_pow(a, b, node):
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check((a_arr < 0) & (b_arr != np.round(b_arr)), "fractional power of negative value", node)
    _check((a_arr == 0) & (b_arr < 0), "negative power of zero", node)
    return np.power(a_arr, b_arr) if a_arr.ndim or b_arr.ndim else float(a_arr ** b_arr)


_PLAIN = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs, "tanh": np.tanh}


@functools.lru_cache(maxsize=256)
def compile_ast(node):
    """Closure f(x, t) evaluating ``node`` with numpy broadcasting."""
    if isinstance(node, Num):
        value = float(node.value)
        return lambda x, t: value
    if isinstance(node, Var):
        return (lambda x, t: x) if node.name == "x" else (lambda x, t: t)
    if isinstance(node, Neg):
        inner = compile_ast(node.operand)
        return lambda x, t: -inner(x, t)
    if isinstance(node, Call):
        inner = compile_ast(node.arg)
        if node.func == "log":
            return lambda x, t: _safe_log(inner(x, t), node)
        if node.func == "sqrt":
            return lambda x, t: _safe_sqrt(inner(x, t), node)
        fn = _PLAIN[node.func]
        return lambda x, t: fn(inner(x, t))
    left, right = compile_ast(node.left), compile_ast(node.right)
    if node.op == "+":
        return lambda x, t: left(x, t) + right(x, t)
    if node.op == "-":
        return lambda x, t: left(x, t) - right(x, t)
    if node.op == "*":
        return lambda x, t: left(x, t) * right(x, t)
    if node.op == "/":
        return lambda x, t: _safe_div(left(x, t), right(x, t), node)
    return lambda x, t: _safe_pow(left(x, t), right(x, t), node)


@dataclass(frozen=True)
class CoeffExpr:
    source: str
    ast: object
    allowed: frozenset

    @property
    def variables(self):
        return free_variables(self.ast)

    def depends_on(self, name):
        return name in self.variables

    @property
    def is_zero(self):
        return isinstance(self.ast, Num) and self.ast.value == 0.0

    def __call__(self, x, t):
        with np.errstate(over="ignore", invalid="ignore"):
            out = compile_ast(self.ast)(x, t)
        if np.ndim(x) or np.ndim(t):
            return np.broadcast_to(out, np.broadcast(np.asarray(x), np.asarray(t)).shape)
        return float(out)

    def __str__(self):
        return self.source


def parse(source, allowed_vars=VARIABLES):
    """Parse ``source`` into a :class:`CoeffExpr` over ``allowed_vars``."""
    allowed = frozenset(allowed_vars)
    if not allowed <= VARIABLES:
        raise ValueError(f"variables must be drawn from {sorted(VARIABLES)}")
    if not source or not source.strip():
        raise ParseError("empty expression", 0, {"expression"})
    ast = _Parser(source, allowed).parse()
    if _uses(ast, "abs"):
        warnings.warn(f"{source!r} uses abs(), which is not C^2 at its kink; "
                      "smoothness is the caller's responsibility", SmoothnessWarning, stacklevel=2)
    return CoeffExpr(source, ast, allowed)


def evaluate(expr, x, t):
    """eval(expr, x, t) as a float."""
    return float(expr(float(x), float(t)))


def lipschitz_estimate(expr, x_box, t_box, n=41):
    """Largest sampled |d/dx expr| on the box, by central differences."""
    if not expr.depends_on("x"):
        return 0.0
    xs = np.linspace(x_box[0], x_box[1], n)
    ts = np.linspace(t_box[0], t_box[1], n)
    xx, tt = np.meshgrid(xs, ts)
    step = 1e-6 * max(1.0, abs(x_box[0]), abs(x_box[1]))
    try:
        slope = (expr(xx + step, tt) - expr(xx - step, tt)) / (2.0 * step)
    except EvaluationError:
        return math.inf
    slope = np.abs(slope[np.isfinite(slope)])
    return float(slope.max()) if slope.size else math.inf


def lipschitz_guard(expr, x_box, t_box, bound, label):
    """Warn (never raise) when the sampled x-slope exceeds ``bound``."""
    est = lipschitz_estimate(expr, x_box, t_box)
    if est > bound:
        warnings.warn(f"{label} = {expr.source!r}: sampled |d/dx| = {est:.3g} exceeds "
                      f"{bound:g} on x in {tuple(x_box)}; the Lipschitz hypothesis may fail",
                      LipschitzWarning, stacklevel=2)
    return est
