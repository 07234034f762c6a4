"""
Profile expressions of the experiment config.

Bottoms, surfaces, potentials and wall data are written as small formulas in
X (and Y for wall data), for example "-1 + 0.2*exp(-50*(X - 0.5)^2)". They
are parsed with sympy against a whitelist and lambdified to numpy.
"""
from __future__ import annotations

import logging
from tokenize import TokenError
from typing import Optional

import numpy as np
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from bathy.exceptions import ConfigError
from bathy.geometry import Grid1D, ScalarField

logger = logging.getLogger(__name__)

X, Y, EPS = sympy.symbols("X Y EPS", real=True)

ALLOWED_NAMES = {
    "X": X,
    "Y": Y,
    "EPS": EPS,
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tan": sympy.tan,
    "exp": sympy.exp,
    "log": sympy.log,
    "sqrt": sympy.sqrt,
    "sinh": sympy.sinh,
    "cosh": sympy.cosh,
    "tanh": sympy.tanh,
    "Abs": sympy.Abs,
    "Max": sympy.Max,
    "Min": sympy.Min,
    "pi": sympy.pi,
    "E": sympy.E,
}
ALLOWED_FUNCTIONS = {"sin", "cos", "tan", "exp", "log", "sinh", "cosh", "tanh", "Abs", "Max", "Min", "Pow"}
TRANSFORMATIONS = standard_transformations + (convert_xor,)
# only the constructors the parser transformations emit; no builtins
PARSER_GLOBALS = {
    "Integer": sympy.Integer,
    "Float": sympy.Float,
    "Rational": sympy.Rational,
    "Symbol": sympy.Symbol,
    "Function": sympy.Function,
    "__builtins__": {},
}


def parse_profile(text: str) -> sympy.Expr:
    """
    Parse one profile formula.

    Raises:
        ConfigError: On syntax errors, unknown names or unknown functions.
    """
    try:
        expr = parse_expr(str(text), local_dict=dict(ALLOWED_NAMES), global_dict=dict(PARSER_GLOBALS),
                          transformations=TRANSFORMATIONS)
    except (SyntaxError, TokenError, TypeError, ValueError, AttributeError, NameError, sympy.SympifyError) as exc:
        raise ConfigError(f"cannot parse expression '{text}': {exc}") from exc
    if not isinstance(expr, sympy.Expr):
        raise ConfigError(f"expression '{text}' is not arithmetic")
    unknown = {str(s) for s in expr.free_symbols} - {"X", "Y", "EPS"}
    if unknown:
        raise ConfigError(f"expression '{text}' uses unknown names: {', '.join(sorted(unknown))}")
    for call in expr.atoms(sympy.Function):
        name = type(call).__name__
        if name not in ALLOWED_FUNCTIONS:
            raise ConfigError(f"expression '{text}' calls unknown function '{name}'")
    return expr


def evaluate(text: str, x: np.ndarray, y: Optional[np.ndarray] = None, eps: float = 0.0) -> np.ndarray:
    """Evaluate a formula at points (x, y); the result must be finite everywhere."""
    expr = parse_profile(text)
    func = sympy.lambdify((X, Y, EPS), expr, "numpy")
    x = np.asarray(x, dtype=float)
    y = np.zeros_like(x) if y is None else np.asarray(y, dtype=float)
    with np.errstate(all="ignore"):
        values = np.broadcast_to(np.asarray(func(x, y, eps), dtype=float), np.broadcast(x, y).shape).copy()
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"expression '{text}' is not finite on the grid")
    return values


def profile_field(text: str, grid: Grid1D, eps: float = 0.0) -> ScalarField:
    return ScalarField(grid, evaluate(text, grid.nodes, eps=eps))
