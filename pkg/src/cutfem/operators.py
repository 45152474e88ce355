"""
Differential operators for cutfem

Named linear combinations of partial derivatives. Trace operators act on the
boundary and may carry normal components; volume operators have one or more
components whose dot product gives the principal bilinear form.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Set, Tuple

import numpy as np

MultiIndex = Tuple[int, int]
Terms = Dict[MultiIndex, float]


class OperatorError(ValueError):
    """Raised for unknown operator names."""
    pass


def _collect(*parts: Terms) -> Set[MultiIndex]:
    out = set()
    for part in parts:
        out.update(part)
    return out


def _combine(terms: Terms, tables: Dict[MultiIndex, np.ndarray]) -> np.ndarray:
    result = None
    for alpha, coeff in terms.items():
        value = coeff * tables[alpha]
        result = value if result is None else result + value
    return result


@dataclass(frozen=True)
class TraceOperator:
    """plain + n_x * x_part + n_y * y_part."""
    name: str
    plain: Terms = field(default_factory=dict)
    x_part: Terms = field(default_factory=dict)
    y_part: Terms = field(default_factory=dict)

    @property
    def derivatives(self) -> Set[MultiIndex]:
        return _collect(self.plain, self.x_part, self.y_part)

    @property
    def order(self) -> int:
        return max(sum(alpha) for alpha in self.derivatives)

    def apply(self, tables: Dict[MultiIndex, np.ndarray], normals: np.ndarray) -> np.ndarray:
        """Combine tabulated derivatives (n_points, n_basis) at boundary points."""
        result = 0.0
        if self.plain:
            result = result + _combine(self.plain, tables)
        if self.x_part:
            result = result + normals[:, 0:1] * _combine(self.x_part, tables)
        if self.y_part:
            result = result + normals[:, 1:2] * _combine(self.y_part, tables)
        return result

    def apply_field(self, u, points: np.ndarray, normals: np.ndarray) -> np.ndarray:
        """Same combination for a field evaluated at the points."""
        tables = {alpha: u(points[:, 0], points[:, 1], alpha)[:, None] for alpha in self.derivatives}
        return self.apply(tables, normals)[:, 0]


@dataclass(frozen=True)
class VolumeOperator:
    """Vector of derivative combinations; a(v, w) = sum_c (L_c v, L_c w)."""
    name: str
    components: Tuple[Terms, ...]

    @property
    def derivatives(self) -> Set[MultiIndex]:
        return _collect(*self.components)

    @property
    def order(self) -> int:
        return max(sum(alpha) for alpha in self.derivatives)

    def apply(self, tables: Dict[MultiIndex, np.ndarray]) -> np.ndarray:
        """Array (n_components, n_points, n_basis)."""
        return np.stack([_combine(terms, tables) for terms in self.components])

    def apply_field(self, u, points: np.ndarray) -> np.ndarray:
        tables = {alpha: u(points[:, 0], points[:, 1], alpha)[:, None] for alpha in self.derivatives}
        return self.apply(tables)[:, :, 0]


TRACE_OPERATORS: Dict[str, TraceOperator] = {
    'value': TraceOperator('value', plain={(0, 0): 1.0}),
    'dx': TraceOperator('dx', plain={(1, 0): 1.0}),
    'dy': TraceOperator('dy', plain={(0, 1): 1.0}),
    'dn': TraceOperator('dn', x_part={(1, 0): 1.0}, y_part={(0, 1): 1.0}),
    'lap': TraceOperator('lap', plain={(2, 0): 1.0, (0, 2): 1.0}),
    'dn_lap': TraceOperator('dn_lap', x_part={(3, 0): 1.0, (1, 2): 1.0},
                            y_part={(2, 1): 1.0, (0, 3): 1.0}),
    'bilap': TraceOperator('bilap', plain={(4, 0): 1.0, (2, 2): 2.0, (0, 4): 1.0}),
    'dn_bilap': TraceOperator('dn_bilap', x_part={(5, 0): 1.0, (3, 2): 2.0, (1, 4): 1.0},
                              y_part={(4, 1): 1.0, (2, 3): 2.0, (0, 5): 1.0}),
}

VOLUME_OPERATORS: Dict[str, VolumeOperator] = {
    'value': VolumeOperator('value', ({(0, 0): 1.0},)),
    'grad': VolumeOperator('grad', ({(1, 0): 1.0}, {(0, 1): 1.0})),
    'lap': VolumeOperator('lap', ({(2, 0): 1.0, (0, 2): 1.0},)),
    'hessian': VolumeOperator('hessian', ({(2, 0): 1.0}, {(1, 1): math.sqrt(2.0)}, {(0, 2): 1.0})),
    'grad_lap': VolumeOperator('grad_lap', ({(3, 0): 1.0, (1, 2): 1.0}, {(2, 1): 1.0, (0, 3): 1.0})),
}


def trace_operator(name: str) -> TraceOperator:
    try:
        return TRACE_OPERATORS[name]
    except KeyError:
        raise OperatorError(f"Unknown trace operator '{name}'")


def volume_operator(name: str) -> VolumeOperator:
    try:
        return VOLUME_OPERATORS[name]
    except KeyError:
        raise OperatorError(f"Unknown volume operator '{name}'")


def derivatives_of(names: Iterable[str], volume: bool = False) -> Set[MultiIndex]:
    """All partial derivatives needed by a list of operator names."""
    lookup = volume_operator if volume else trace_operator
    out: Set[MultiIndex] = set()
    for name in names:
        out |= lookup(name).derivatives
    return out
