"""Small arithmetic expressions in ``n`` for the (p, q) pair and β rules.

Expressions are parsed with :mod:`ast` and only numbers, the variable ``n``,
``+ - * / **``, unary minus and the functions ``exp``, ``log``, ``sqrt`` are
accepted.  A few named templates are also understood:

``poly:c,d``      c·n^d
``exp:c,a``       exp(c·n^a)
``explog:c``      exp(c·√n·log n)
``nlogn``         n^{log n}
"""

import ast
import math

import numpy as np

from .errors import InputError

_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt}
_CONSTS = {"e": math.e, "pi": math.pi}
_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}


def _template(text):
    name, _, args = text.partition(":")
    vals = [float(a) for a in args.split(",")] if args else []
    if name == "poly" and len(vals) == 2:
        return f"{vals[0]!r}*n**{vals[1]!r}"
    if name == "exp" and len(vals) == 2:
        return f"exp({vals[0]!r}*n**{vals[1]!r})"
    if name == "explog" and len(vals) == 1:
        return f"exp({vals[0]!r}*sqrt(n)*log(n))"
    if name == "nlogn" and not vals:
        return "exp(log(n)*log(n))"
    raise InputError(f"unknown template {text!r}")


class Expr:
    """A parsed expression; call it with a scalar or array ``n``."""

    def __init__(self, text):
        self.text = str(text).strip()
        source = self.text
        if ":" in source or source == "nlogn":
            source = _template(source)
        self.source = source
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise InputError(f"cannot parse expression {self.text!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise InputError(f"bad constant in {self.text!r}")
        elif isinstance(node, ast.Name):
            if node.id != "n" and node.id not in _CONSTS:
                raise InputError(f"unknown name {node.id!r} in {self.text!r}; only n is a variable")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise InputError(f"operator not allowed in {self.text!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise InputError(f"operator not allowed in {self.text!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise InputError(f"function not allowed in {self.text!r}")
            if len(node.args) != 1 or node.keywords:
                raise InputError(f"functions take one argument in {self.text!r}")
            self._check(node.args[0])
        else:
            raise InputError(f"unsupported syntax in {self.text!r}")

    def _eval(self, node, n):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return n if node.id == "n" else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, n), self._eval(node.right, n))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, n)
            return -v if isinstance(node.op, ast.USub) else v
        return _FUNCS[node.func.id](self._eval(node.args[0], n))

    def __call__(self, n):
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, np.asarray(n, dtype=float))
        return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)

    def __repr__(self):
        return f"Expr({self.text!r})"


def parse(text):
    return text if isinstance(text, Expr) else Expr(text)
