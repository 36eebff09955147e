"""Closed-form radial profiles as expression trees, with tail analysis.

Profiles (warp factors, conformal factors, control functions) are given in a
small grammar over a single radial variable ``r``: arithmetic, powers, ``exp``,
``log``, ``sqrt``, hyperbolic functions, and a smooth compactly supported
``bump(r, a, b)`` primitive. Expressions carry their sympy tree, so
differentiation is exact and tail boundedness can often be decided
symbolically; when it cannot, callers fall back to monotonicity detection on
samples and must surface an explicit "inconclusive" verdict.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Union

import numpy as np
import sympy as sp

R = sp.Symbol("r", real=True)

Scalar = Union[int, float]


def bump_expr(var: sp.Expr, a: Scalar, b: Scalar) -> sp.Expr:
    """Smooth bump supported on (a, b), normalized to peak value 1."""
    if not b > a:
        raise ValueError(f"bump needs a < b, got ({a}, {b})")
    t = (2 * var - (a + b)) / (b - a)
    core = sp.exp(1 - 1 / (1 - t**2))
    return sp.Piecewise((core, t**2 < 1), (0, True))


_PARSE_NS = {
    "r": R,
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "tanh": sp.tanh,
    "sin": sp.sin,
    "cos": sp.cos,
    "abs": sp.Abs,
    "Abs": sp.Abs,
    "min": sp.Min,
    "max": sp.Max,
    "pi": sp.pi,
    "E": sp.E,
    "bump": lambda a, b: bump_expr(R, a, b),
}


class ExpressionError(ValueError):
    """Raised for unparseable or out-of-grammar profile expressions."""


class Expression:
    """A closed-form function of the radial variable ``r``.

    Wraps a sympy expression; numeric evaluation goes through a cached
    ``lambdify`` with numpy semantics and accepts scalars or arrays.
    """

    def __init__(self, expr: Union[sp.Expr, Scalar, str, "Expression"]):
        if isinstance(expr, Expression):
            self.sym = expr.sym
        elif isinstance(expr, str):
            self.sym = parse_expression(expr).sym
        else:
            self.sym = sp.sympify(expr)
        free = self.sym.free_symbols - {R}
        if free:
            raise ExpressionError(f"unknown symbols in expression: {free}")
        self._fn: Optional[Callable] = None

    def _lambdified(self) -> Callable:
        if self._fn is None:
            self._fn = sp.lambdify(R, self.sym, modules="numpy")
        return self._fn

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        with np.errstate(all="ignore"):
            out = self._lambdified()(arr)
        out = np.asarray(out, dtype=float)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape).copy()
        return out if arr.ndim else float(out)

    def diff(self, order: int = 1) -> "Expression":
        return Expression(sp.diff(self.sym, R, order))

    def subs_shift(self, offset: float) -> "Expression":
        return Expression(self.sym.subs(R, R + offset))

    def __add__(self, other):
        return Expression(self.sym + Expression(other).sym)

    def __mul__(self, other):
        return Expression(self.sym * Expression(other).sym)

    def __neg__(self):
        return Expression(-self.sym)

    def __repr__(self):
        return f"Expression({self.sym})"

    def limit_at_infinity(self) -> Optional[sp.Expr]:
        """Limit of the expression as r -> oo, or None if sympy cannot tell."""
        try:
            lim = sp.limit(self.sym, R, sp.oo)
        except (ValueError, NotImplementedError, RecursionError, TypeError):
            return None
        if lim.free_symbols:
            return None
        return lim

    def is_constant(self) -> bool:
        return R not in self.sym.free_symbols


def parse_expression(text: str) -> Expression:
    """Parse a profile string in the documented grammar."""
    try:
        sym = sp.sympify(text, locals=_PARSE_NS, convert_xor=True)
    except (sp.SympifyError, TypeError, AttributeError, SyntaxError) as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc}") from None
    if not isinstance(sym, sp.Expr):
        raise ExpressionError(f"{text!r} is not a scalar expression")
    undef = sym.atoms(sp.core.function.AppliedUndef)
    if undef:
        names = sorted(f.func.__name__ for f in undef)
        raise ExpressionError(
            f"unknown function(s) {names} in {text!r}; the grammar offers "
            "arithmetic, powers, exp, log, sqrt, sinh/cosh/tanh, sin/cos, "
            "abs, min/max, and bump(a, b)")
    return Expression(sym)


def as_expression(value) -> Expression:
    if isinstance(value, Expression):
        return value
    return Expression(value)


@dataclass
class TailVerdict:
    """Boundedness verdict for a profile on [r0, oo).

    status is one of "bounded", "unbounded", "inconclusive"; sup is the
    witnessing supremum estimate when bounded. method records whether the
    tail was decided symbolically or by sampled monotonicity.
    """

    status: str
    sup: Optional[float]
    method: str
    detail: str = ""

    @property
    def bounded(self) -> bool:
        return self.status == "bounded"


def _sample_sup(fn: Callable, lo: float, hi: float, n: int = 2001) -> float:
    grid = np.linspace(lo, hi, n)
    vals = np.abs(np.asarray(fn(grid), dtype=float))
    vals = vals[np.isfinite(vals)]
    return float(vals.max()) if vals.size else np.inf


def tail_boundedness(
    expr: Expression, r0: float = 1.0, window: float = 40.0
) -> TailVerdict:
    """Decide whether |expr| is bounded on [r0, oo).

    Symbolic route: a finite limit at infinity plus a finite sampled sup on
    the head interval. Fallback: monotone-decrease detection of |expr| on
    [r0 + window, 4*(r0 + window)]; increasing tails without a symbolic
    limit are reported inconclusive, never guessed.
    """
    head_sup = _sample_sup(expr, r0, r0 + window)
    lim = expr.limit_at_infinity()
    if lim is not None:
        if isinstance(lim, sp.AccumBounds):
            lo, hi = lim.min, lim.max
            if lo.is_infinite or hi.is_infinite:
                return TailVerdict("unbounded", None, "symbolic",
                                   "oscillation with infinite amplitude")
            lim_abs = max(abs(float(lo)), abs(float(hi)))
            wide_sup = _sample_sup(expr, r0, 4 * (r0 + window))
            return TailVerdict("bounded", max(head_sup, wide_sup, lim_abs),
                               "symbolic", f"oscillates within [{lo}, {hi}]")
        if lim.is_infinite:
            return TailVerdict("unbounded", None, "symbolic",
                               "limit at infinity is infinite")
        try:
            lim_abs = abs(float(lim))
        except (TypeError, ValueError):
            lim_abs = None
        if lim_abs is not None:
            # Finite limit: the sup over the tail is attained either on the
            # sampled head or near the limit; widen the head to reduce the
            # chance of a hump beyond it.
            wide_sup = _sample_sup(expr, r0, 4 * (r0 + window))
            return TailVerdict("bounded", max(head_sup, wide_sup, lim_abs),
                               "symbolic", f"limit {lim_abs:g} at infinity")
    tail_lo = r0 + window
    grid = np.linspace(tail_lo, 4 * tail_lo, 801)
    with np.errstate(all="ignore"):
        vals = np.abs(np.asarray(expr(grid), dtype=float))
    if not np.all(np.isfinite(vals)):
        return TailVerdict("inconclusive", None, "sampled",
                           "non-finite samples on the tail window")
    diffs = np.diff(vals)
    if np.all(diffs <= 1e-12 * max(1.0, vals.max())):
        return TailVerdict("bounded", max(head_sup, float(vals[0])), "sampled",
                           "monotone nonincreasing on the tail window")
    return TailVerdict("inconclusive", None, "sampled",
                       "tail not monotone nonincreasing; no symbolic limit")


def sampled_agrees(expr: Expression, samples_r: Iterable[float],
                   samples_v: Iterable[float], tol: float = 1e-12) -> bool:
    """Check closed-form vs sampled values at sample points."""
    rr = np.asarray(list(samples_r), dtype=float)
    vv = np.asarray(list(samples_v), dtype=float)
    ref = np.asarray(expr(rr), dtype=float)
    scale = max(1.0, float(np.abs(ref).max()) if ref.size else 1.0)
    return bool(np.all(np.abs(ref - vv) <= tol * scale))
