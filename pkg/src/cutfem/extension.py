"""
Discrete extension operator for cutfem

E = A F maps the DOFs of interior cells to all active DOFs: every cut cell
borrows the polynomial of its donor cell (canonical extension F) and band
nodes average those polynomials with convex weights (A).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sparse

from .femspace import FESpace
from .mesh import ShMap

logger = logging.getLogger(__name__)


class ExtensionError(ValueError):
    """Raised for invalid averaging weights or mismatched vectors."""
    pass


@dataclass
class AveragingRule:
    """Convex weights per band DOF: {dof: [(active position, weight), ...]}."""
    weights: Dict[int, List[Tuple[int, float]]]
    name: str = 'custom'

    def validate(self, space: FESpace):
        """Check weights are convex and only name cells sharing the DOF."""
        owners = space.dofmap.cells_of_dof()
        for dof in space.dofmap.band_dofs:
            entries = self.weights.get(int(dof))
            if not entries:
                raise ExtensionError(f"No averaging weights for band DOF {dof}")
            allowed = set(int(p) for p in owners[dof])
            total = 0.0
            for position, weight in entries:
                if weight < 0.0:
                    raise ExtensionError(f"Negative weight {weight} for band DOF {dof}")
                if position not in allowed:
                    raise ExtensionError(f"Cell {position} does not contain band DOF {dof}")
                total += weight
            if abs(total - 1.0) > 1e-12:
                raise ExtensionError(f"Weights of band DOF {dof} sum to {total}, not 1")


def default_averaging_rule(space: FESpace, sh_map: ShMap) -> AveragingRule:
    """Weight 1 on the cell whose donor centroid is nearest the node.

    Distances are measured in half steps of the node lattice, so they are
    exact integers; ties go to the lowest cell index.
    """
    dofmap = space.dofmap
    active = space.active
    stride = space.family.lattice_stride
    owners = dofmap.cells_of_dof()
    ci, cj = active.grid.cell_ij(active.active_cells)
    weights = {}
    for dof in dofmap.band_dofs:
        candidates = owners[dof]
        donors = sh_map.target[candidates]
        gx, gy = dofmap.node_lattice[dof]
        dx = 2 * gx - (2 * ci[donors] + 1) * stride
        dy = 2 * gy - (2 * cj[donors] + 1) * stride
        best = candidates[int(np.argmin(dx * dx + dy * dy))]
        weights[int(dof)] = [(int(best), 1.0)]
    return AveragingRule(weights, name='nearest-donor')


def uniform_averaging_rule(space: FESpace) -> AveragingRule:
    """Equal weights over every active cell sharing the node."""
    owners = space.dofmap.cells_of_dof()
    weights = {}
    for dof in space.dofmap.band_dofs:
        candidates = owners[dof]
        weights[int(dof)] = [(int(p), 1.0 / len(candidates)) for p in candidates]
    return AveragingRule(weights, name='uniform')


@dataclass
class ExtensionOperator:
    """Sparse E of shape (all DOFs, interior DOFs); columns follow interior_dofs."""
    matrix: sparse.csr_matrix
    interior_dofs: np.ndarray

    @property
    def n_full(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_reduced(self) -> int:
        return self.matrix.shape[1]

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        return apply_expand(self, reduced)

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return restrict(self, full)

    def reduce_matrix(self, K) -> sparse.csr_matrix:
        """E^T K E."""
        if K.shape != (self.n_full, self.n_full):
            raise ExtensionError(f"Matrix shape {K.shape} does not match {self.n_full} DOFs")
        E = self.matrix
        return (E.T @ sparse.csr_matrix(K) @ E).tocsr()


def build_extension(space: FESpace, sh_map: ShMap, rule: AveragingRule = None) -> ExtensionOperator:
    """Assemble E row by row; interior rows are unit rows."""
    if rule is None:
        rule = default_averaging_rule(space, sh_map)
    rule.validate(space)

    dofmap = space.dofmap
    n = dofmap.n_dofs
    interior = dofmap.interior_dofs
    column = np.full(n, -1, dtype=np.int64)
    column[interior] = np.arange(len(interior))

    rows = [interior]
    cols = [np.arange(len(interior))]
    vals = [np.ones(len(interior))]

    # group the requests by donor cell so each donor is tabulated once
    requests: Dict[int, List[Tuple[int, float]]] = {}
    for dof, entries in rule.weights.items():
        for position, weight in entries:
            if weight == 0.0:
                continue
            donor = int(sh_map.target[position])
            if not space.active.interior[donor]:
                raise ExtensionError(f"S_h target {donor} of cell {position} is not an interior cell")
            requests.setdefault(donor, []).append((dof, weight))

    for donor, entries in requests.items():
        dofs = np.array([d for d, _ in entries], dtype=np.int64)
        kappa = np.array([w for _, w in entries])
        points = dofmap.node_points[dofs]
        alphas = dofmap.node_alpha[dofs]
        needed = {(int(a), int(b)) for a, b in alphas}
        tables = space.tabulate(donor, points, needed)
        local = np.empty((len(dofs), space.family.dofs_per_cell))
        for i, (a, b) in enumerate(alphas):
            local[i] = tables[(int(a), int(b))][i]
        local *= space.dof_scales(dofs)[:, None]
        donor_cols = column[space.cell_dofs(donor)]
        if np.any(donor_cols < 0):
            raise ExtensionError(f"Donor cell {donor} has DOFs outside the interior set")
        rows.append(np.repeat(dofs, len(donor_cols)))
        cols.append(np.tile(donor_cols, len(dofs)))
        vals.append((kappa[:, None] * local).ravel())

    matrix = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(n, len(interior))).tocsr()
    matrix.sum_duplicates()
    logger.debug("extension (%s): %d x %d, %d nonzeros", rule.name, n, len(interior), matrix.nnz)
    return ExtensionOperator(matrix=matrix, interior_dofs=interior)


def apply_expand(E: ExtensionOperator, reduced: np.ndarray) -> np.ndarray:
    reduced = np.asarray(reduced, dtype=float)
    if reduced.shape != (E.n_reduced,):
        raise ExtensionError(f"Expected a reduced vector of length {E.n_reduced}, got shape {reduced.shape}")
    return E.matrix @ reduced


def restrict(E: ExtensionOperator, full: np.ndarray) -> np.ndarray:
    """Action of E^T."""
    full = np.asarray(full, dtype=float)
    if full.shape != (E.n_full,):
        raise ExtensionError(f"Expected a full vector of length {E.n_full}, got shape {full.shape}")
    return E.matrix.T @ full


def interpolate_pi_E(u, space: FESpace, E: ExtensionOperator) -> Tuple[np.ndarray, np.ndarray]:
    """Nodal interpolation on interior DOFs followed by extension; returns (reduced, full)."""
    reduced = space.interpolate(u, E.interior_dofs)
    return reduced, apply_expand(E, reduced)
