"""
Symbolic fields for cutfem

Exact solutions, loads and boundary data are sympy expressions in (x, y, t).
They are evaluated on numpy arrays together with any partial derivative.
"""

import logging
from typing import Callable, Dict, Tuple, Union

import numpy as np
import sympy

logger = logging.getLogger(__name__)

X, Y, T = sympy.symbols('x y t', real=True)

MultiIndex = Tuple[int, int]


class FieldError(ValueError):
    """Raised when a field cannot be built or evaluated."""
    pass


class Field:
    """A scalar field u(x, y[, t]) with exact partial derivatives."""

    def __init__(self, expr):
        try:
            self.expr = sympy.sympify(expr)
        except (sympy.SympifyError, TypeError) as e:
            raise FieldError(f"Cannot build a field from {expr!r}: {e}")
        extra = self.expr.free_symbols - {X, Y, T}
        if extra:
            names = ', '.join(sorted(str(s) for s in extra))
            raise FieldError(f"Field depends on unknown symbols: {names}")
        self._compiled: Dict[MultiIndex, Callable] = {}

    @classmethod
    def constant(cls, value: float) -> 'Field':
        return cls(sympy.sympify(value))

    @classmethod
    def polynomial(cls, coefficients, center=(0.0, 0.0), scale: float = 1.0) -> 'Field':
        """Build sum c[i, j] ((x - xc)/s)**i ((y - yc)/s)**j."""
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.ndim != 2:
            raise FieldError("Polynomial coefficients must form a 2D array")
        sx = (X - center[0]) / scale
        sy = (Y - center[1]) / scale
        expr = sympy.Integer(0)
        for (i, j), c in np.ndenumerate(coefficients):
            if c != 0.0:
                expr += sympy.Float(float(c)) * sx**i * sy**j
        return cls(expr)

    @property
    def time_dependent(self) -> bool:
        return T in self.expr.free_symbols

    def diff(self, rx: int = 0, ry: int = 0, rt: int = 0) -> 'Field':
        """Return the partial derivative d^(rx+ry+rt) / dx^rx dy^ry dt^rt."""
        expr = self.expr
        if rx:
            expr = sympy.diff(expr, X, rx)
        if ry:
            expr = sympy.diff(expr, Y, ry)
        if rt:
            expr = sympy.diff(expr, T, rt)
        return Field(expr)

    def laplacian(self) -> 'Field':
        return Field(sympy.diff(self.expr, X, 2) + sympy.diff(self.expr, Y, 2))

    def at(self, time: float) -> 'Field':
        """Freeze the time variable."""
        return Field(self.expr.subs(T, time))

    def _function(self, alpha: MultiIndex) -> Callable:
        fn = self._compiled.get(alpha)
        if fn is None:
            rx, ry = alpha
            if rx < 0 or ry < 0:
                raise FieldError(f"Negative derivative order {alpha}")
            expr = self.expr
            if rx:
                expr = sympy.diff(expr, X, rx)
            if ry:
                expr = sympy.diff(expr, Y, ry)
            fn = sympy.lambdify((X, Y, T), expr, 'numpy')
            self._compiled[alpha] = fn
        return fn

    def __call__(self, x, y, alpha: MultiIndex = (0, 0), time: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        alpha = (int(alpha[0]), int(alpha[1]))
        fn = self._function(alpha)
        with np.errstate(all='ignore'):
            values = fn(x, y, time)
        shape = np.broadcast(x, y).shape
        values = np.array(np.broadcast_to(np.asarray(values, dtype=float), shape))
        if not np.all(np.isfinite(values)):
            raise FieldError(f"Non-finite value of D^{alpha} of {self.expr}")
        return values

    def _coerce(self, other) -> 'Field':
        if isinstance(other, Field):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Field.constant(float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Field(self.expr + other.expr)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Field(self.expr - other.expr)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Field(other.expr - self.expr)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Field(self.expr * other.expr)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(-self.expr)

    def __repr__(self):
        return f"Field({self.expr})"


FieldLike = Union[Field, float, int, None]


def as_field(value: FieldLike) -> Field:
    """Accept a Field, a number or None (zero)."""
    if value is None:
        return Field.constant(0)
    if isinstance(value, Field):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Field.constant(float(value))
    raise FieldError(f"Expected a Field or a number, got {type(value).__name__}")
