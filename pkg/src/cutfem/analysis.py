"""
Error analysis for cutfem

Error norms on the physical domain, seminorms on unions of whole cells for
the extension stability study, and estimated orders of convergence.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .extension import ExtensionOperator, apply_expand
from .femspace import FESpace
from .fields import Field
from .forms import CutIntegration
from .geometry import LevelSetDomain
from .operators import volume_operator

logger = logging.getLogger(__name__)


class AnalysisError(ValueError):
    """Raised for malformed error-norm or EOC requests."""
    pass


def derivative_components(order: int) -> List[Dict[tuple, float]]:
    """All j-th partials weighted so their squares sum to |D^j v|^2."""
    return [{(order - i, i): math.sqrt(math.comb(order, i))} for i in range(order + 1)]


def _terms_for(name_or_order) -> List[Dict[tuple, float]]:
    if isinstance(name_or_order, int):
        return derivative_components(name_or_order)
    return list(volume_operator(name_or_order).components)


def _combine(terms: Dict[tuple, float], values: Dict[tuple, np.ndarray]) -> np.ndarray:
    return sum(c * values[alpha] for alpha, c in terms.items())


@dataclass
class ErrorNorms:
    """Errors measured on the physical domain; None where not applicable."""
    l2: float
    h1_semi: float
    h2_semi: Optional[float] = None
    energy: Optional[float] = None

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {'l2': self.l2, 'h1': self.h1_semi, 'h2': self.h2_semi, 'energy': self.energy}

    @property
    def energy_squared(self) -> Optional[float]:
        """a(e, e) itself, recorded next to its square root."""
        return None if self.energy is None else self.energy ** 2


class _SquaredIntegrals:
    """Accumulates integrals of squared derivative combinations of e = u_h - u."""

    def __init__(self, groups: Dict[str, List[Dict[tuple, float]]], coefficient: Optional[np.ndarray] = None):
        self.groups = groups
        self.coefficient = coefficient
        self.totals = {name: 0.0 for name in groups}
        self.derivatives = set()
        for components in groups.values():
            for terms in components:
                self.derivatives |= set(terms)

    def add(self, name: str, components, values, weights):
        comps = [_combine(terms, values) for terms in components]
        if name == 'energy' and self.coefficient is not None:
            total = 0.0
            for a in range(len(comps)):
                for b in range(len(comps)):
                    total += self.coefficient[a, b] * np.sum(comps[a] * comps[b] * weights)
            self.totals[name] += float(total)
        else:
            self.totals[name] += float(sum(np.sum(c * c * weights) for c in comps))

    def add_all(self, values, weights):
        for name, components in self.groups.items():
            self.add(name, components, values, weights)


def _integrate_error(u_full: np.ndarray, exact: Optional[Field], space: FESpace,
                     integration: CutIntegration, accumulator: _SquaredIntegrals,
                     positions: Optional[np.ndarray] = None, whole_cells: bool = False):
    """Integrate over T & domain (or whole cells) for the given active positions."""
    if positions is None:
        positions = np.arange(space.active.n_active)
    derivs = accumulator.derivatives
    cell_to_dofs = space.dofmap.cell_to_dofs
    if whole_cells:
        uncut, cut = positions, np.zeros(0, dtype=np.int64)
    else:
        flags = space.active.cut[positions]
        uncut, cut = positions[~flags], positions[flags]

    if len(uncut):
        tables = space.tabulate_reference(integration.ref_points, derivs)
        coefs = u_full[cell_to_dofs[uncut]]
        pts = integration.uncut_points(uncut)
        values = {}
        for alpha in derivs:
            values[alpha] = coefs @ tables[alpha].T
            if exact is not None:
                values[alpha] = values[alpha] - exact(pts[..., 0], pts[..., 1], alpha)
        accumulator.add_all(values, integration.ref_weights[None, :])

    for position in cut:
        rule = integration.volume_rule(position)
        if rule.size == 0:
            continue
        tables = space.tabulate(position, rule.points, derivs)
        coefs = u_full[cell_to_dofs[position]]
        values = {}
        for alpha in derivs:
            values[alpha] = tables[alpha] @ coefs
            if exact is not None:
                values[alpha] = values[alpha] - exact(rule.points[:, 0], rule.points[:, 1], alpha)
        accumulator.add_all(values, rule.weights)


def error_norms(u_full: np.ndarray, exact: Field, space: FESpace, domain: LevelSetDomain,
                energy: Optional[str] = None, coefficient: Optional[np.ndarray] = None,
                integration: Optional[CutIntegration] = None) -> ErrorNorms:
    """L2, H1 and H2 seminorm errors on the domain, plus sqrt(a(e, e)).

    energy names the volume operator of the problem's principal form;
    coefficient weights its components (diffusion matrix of a phase).
    The H2 seminorm is reported for C1 spaces only.
    """
    if not isinstance(exact, Field):
        raise AnalysisError("The exact solution must be a Field providing derivatives")
    u_full = np.asarray(u_full, dtype=float)
    if u_full.shape != (space.n_dofs,):
        raise AnalysisError(f"Expected {space.n_dofs} coefficients, got shape {u_full.shape}")
    if integration is None:
        integration = CutIntegration(space, domain)
    groups = {'l2': _terms_for(0), 'h1': _terms_for(1)}
    if space.family.continuity >= 1:
        groups['h2'] = _terms_for(2)
    if energy is not None:
        groups['energy'] = _terms_for(energy)
    acc = _SquaredIntegrals(groups, coefficient)
    _integrate_error(u_full, exact, space, integration, acc)
    t = acc.totals
    return ErrorNorms(
        l2=math.sqrt(max(t['l2'], 0.0)),
        h1_semi=math.sqrt(max(t['h1'], 0.0)),
        h2_semi=math.sqrt(max(t['h2'], 0.0)) if 'h2' in t else None,
        energy=math.sqrt(max(t['energy'], 0.0)) if 'energy' in t else None,
    )


def mesh_seminorms(v_full: np.ndarray, space: FESpace, positions: np.ndarray, max_order: int,
                   integration: Optional[CutIntegration] = None) -> np.ndarray:
    """|v|_{H^j} over the union of whole cells, j = 0..max_order."""
    if integration is None:
        integration = CutIntegration(space, space.active.domain)
    groups = {j: derivative_components(j) for j in range(max_order + 1)}
    acc = _SquaredIntegrals(groups)
    _integrate_error(np.asarray(v_full, dtype=float), None, space, integration, acc,
                     positions=np.asarray(positions, dtype=np.int64), whole_cells=True)
    return np.sqrt(np.maximum([acc.totals[j] for j in range(max_order + 1)], 0.0))


def stability_ratios(space: FESpace, E: ExtensionOperator, samples: int = 50, seed: int = 0,
                     max_order: Optional[int] = None) -> np.ndarray:
    """Ratios |E v|_{H^j(all active cells)} / |v|_{H^j(interior cells)} for random v.

    Returns an array (samples, max_order + 1); max_order defaults to the
    order of the H^m space the elements conform to.
    """
    if max_order is None:
        max_order = space.family.continuity + 1
    rng = np.random.default_rng(seed)
    integration = CutIntegration(space, space.active.domain)
    every = np.arange(space.active.n_active)
    interior = space.active.interior_positions
    ratios = np.zeros((samples, max_order + 1))
    for s in range(samples):
        v = rng.uniform(-1.0, 1.0, E.n_reduced)
        full = apply_expand(E, v)
        top = mesh_seminorms(full, space, every, max_order, integration)
        bottom = mesh_seminorms(full, space, interior, max_order, integration)
        ratios[s] = top / bottom
    logger.debug("stability ratios: max per order %s", ratios.max(axis=0))
    return ratios


def eoc(h: Sequence[float], errors: Sequence[Optional[float]]) -> List[Optional[float]]:
    """log(e_i / e_i+1) / log(h_i / h_i+1); None where an error is missing or not positive."""
    out = []
    for i in range(len(h) - 1):
        e0, e1 = errors[i], errors[i + 1]
        if e0 is None or e1 is None or not (e0 > 0.0 and e1 > 0.0):
            out.append(None)
            continue
        out.append(math.log(e0 / e1) / math.log(h[i] / h[i + 1]))
    return out


def eoc_table(rows: Sequence[Sequence[Optional[float]]]) -> List[List[Optional[float]]]:
    """EOC per error column of rows (h, e_1, e_2, ...)."""
    if len(rows) < 2:
        raise AnalysisError("need >= 2 levels")
    h = [row[0] for row in rows]
    for a, b in zip(h, h[1:]):
        if not b < a:
            raise AnalysisError(f"Mesh sizes must strictly decrease, got {a} then {b}")
    columns = len(rows[0]) - 1
    return [eoc(h, [row[c + 1] for row in rows]) for c in range(columns)]
