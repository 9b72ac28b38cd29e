"""Small arithmetic-expression language with symbolic differentiation.

Grammar: numbers, variables, ``+ - * / ^`` (``**`` also accepted), unary
minus, parentheses and the functions ``exp log sqrt sin cos``. The constants
``pi`` and ``e`` are predefined and ``I`` (or a ``j`` literal such as ``2j``)
is the imaginary unit, which lets the same machinery evaluate analytic
functions of a complex variable.

Text is tokenised and parsed by the standard :mod:`ast` module; only a
whitelisted subset of Python expression nodes is accepted and converted into
the node classes below, which know how to evaluate themselves on numpy arrays
and how to differentiate themselves.

>>> e = parse("u1^2 * sin(u2)", ["u1", "u2"])
>>> str(e.diff(0))
'2 * u1 * sin(u2)'
"""

from __future__ import annotations

import ast
import math

import numpy as np

from .errors import ExpressionError

FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
}
CONSTANTS = {"pi": math.pi, "e": math.e, "I": 1j}


class Expr:
    """Base node. Subclasses implement ``evaluate``, ``diff`` and ``__str__``."""

    def evaluate(self, env):
        raise NotImplementedError

    def diff(self, var: int) -> "Expr":
        raise NotImplementedError

    def __call__(self, *args):
        return self.evaluate(args)


class Const(Expr):
    def __init__(self, value):
        self.value = value

    def evaluate(self, env):
        return self.value

    def diff(self, var):
        return ZERO

    def __str__(self):
        v = self.value
        if isinstance(v, complex):
            if v.real == 0:
                return f"{v.imag:g}j" if v.imag != 1 else "I"
            return f"({v.real:g}+{v.imag:g}j)"
        if float(v).is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(float(v))


ZERO = Const(0)
ONE = Const(1)


class Var(Expr):
    def __init__(self, index: int, name: str):
        self.index = index
        self.name = name

    def evaluate(self, env):
        return env[self.index]

    def diff(self, var):
        return ONE if var == self.index else ZERO

    def __str__(self):
        return self.name


def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a, b):
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a, b):
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return Sub(a, b)


def mul(a, b):
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(b):
        a, b = b, a
    return Mul(a, b)


def div(a, b):
    if _is_const(a, 0):
        return ZERO
    if _is_const(b, 1):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0:
        return Const(a.value / b.value)
    return Div(a, b)


def neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a, b):
    if _is_const(b, 0):
        return ONE
    if _is_const(b, 1):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value ** b.value)
    return Pow(a, b)


class Add(Expr):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def evaluate(self, env):
        return self.a.evaluate(env) + self.b.evaluate(env)

    def diff(self, var):
        return add(self.a.diff(var), self.b.diff(var))

    def __str__(self):
        return f"{self.a} + {self.b}"


class Sub(Expr):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def evaluate(self, env):
        return self.a.evaluate(env) - self.b.evaluate(env)

    def diff(self, var):
        return sub(self.a.diff(var), self.b.diff(var))

    def __str__(self):
        return f"{self.a} - {_paren(self.b, (Add, Sub))}"


class Mul(Expr):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def evaluate(self, env):
        return self.a.evaluate(env) * self.b.evaluate(env)

    def diff(self, var):
        return add(mul(self.a.diff(var), self.b), mul(self.a, self.b.diff(var)))

    def __str__(self):
        return f"{_paren(self.a, (Add, Sub))} * {_paren(self.b, (Add, Sub, Div))}"


class Div(Expr):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def evaluate(self, env):
        return self.a.evaluate(env) / self.b.evaluate(env)

    def diff(self, var):
        da, db = self.a.diff(var), self.b.diff(var)
        if _is_const(db, 0):
            return div(da, self.b)
        return div(sub(mul(da, self.b), mul(self.a, db)), power(self.b, Const(2)))

    def __str__(self):
        return f"{_paren(self.a, (Add, Sub))} / {_paren(self.b, (Add, Sub, Mul, Div))}"


class Pow(Expr):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def evaluate(self, env):
        base = self.a.evaluate(env)
        expo = self.b.evaluate(env)
        if isinstance(self.b, Const) and float(np.real(expo)).is_integer() and np.imag(expo) == 0:
            # integer powers stay real for negative bases
            return base ** int(np.real(expo))
        return np.power(base, expo)

    def diff(self, var):
        da, db = self.a.diff(var), self.b.diff(var)
        if _is_const(db, 0):
            return mul(mul(self.b, power(self.a, sub(self.b, ONE))), da)
        # d(a^b) = a^b (b' log a + b a'/a)
        return mul(self, add(mul(db, Func("log", self.a)), div(mul(self.b, da), self.a)))

    def __str__(self):
        return f"{_paren(self.a, (Add, Sub, Mul, Div, Neg, Pow))}^{_paren(self.b, (Add, Sub, Mul, Div, Neg, Pow))}"


class Neg(Expr):
    def __init__(self, arg):
        self.arg = arg

    def evaluate(self, env):
        return -self.arg.evaluate(env)

    def diff(self, var):
        return neg(self.arg.diff(var))

    def __str__(self):
        return f"-{_paren(self.arg, (Add, Sub))}"


class Func(Expr):
    def __init__(self, name, arg):
        if name not in FUNCTIONS:
            raise ExpressionError(f"unknown function {name!r}")
        self.name, self.arg = name, arg

    def evaluate(self, env):
        return FUNCTIONS[self.name](self.arg.evaluate(env))

    def diff(self, var):
        da = self.arg.diff(var)
        if _is_const(da, 0):
            return ZERO
        a = self.arg
        if self.name == "exp":
            outer = self
        elif self.name == "log":
            outer = div(ONE, a)
        elif self.name == "sqrt":
            outer = div(Const(0.5), self)
        elif self.name == "sin":
            outer = Func("cos", a)
        else:
            outer = neg(Func("sin", a))
        return mul(outer, da)

    def __str__(self):
        return f"{self.name}({self.arg})"


def _paren(e, kinds):
    return f"({e})" if isinstance(e, kinds) else str(e)


_BINOPS = {ast.Add: add, ast.Sub: sub, ast.Mult: mul, ast.Div: div, ast.Pow: power}


def _convert(node, names):
    if isinstance(node, ast.Expression):
        return _convert(node.body, names)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
        return Const(node.value)
    if isinstance(node, ast.Name):
        if node.id in names:
            return Var(names[node.id], node.id)
        if node.id in CONSTANTS:
            return Const(CONSTANTS[node.id])
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_convert(node.left, names), _convert(node.right, names))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        arg = _convert(node.operand, names)
        return neg(arg) if isinstance(node.op, ast.USub) else arg
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.keywords or len(node.args) != 1:
            raise ExpressionError("only one-argument calls of exp, log, sqrt, sin, cos are allowed")
        return Func(node.func.id, _convert(node.args[0], names))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)}")


def parse(text: str, variables) -> Expr:
    """Parse ``text`` into an expression tree over the given variable names.

    Variables are referenced by position in ``variables`` when the tree is
    evaluated: ``expr.evaluate([u1_array, u2_array])``.
    """
    names = {name: i for i, name in enumerate(variables)}
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    return _convert(tree, names)


def gradient(e: Expr, nvars: int) -> list:
    return [e.diff(k) for k in range(nvars)]
