"""
Finite element spaces for cutfem

Tensor-product Lagrange (Q1, Q2) and Hermite spline (k = 1, 3, 5) elements on
the active mesh. Shape functions are polynomials, so evaluating them outside
their own cell gives the canonical extension used by the extension operator.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum, auto
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .mesh import ActiveMesh

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, int]


class SpaceError(ValueError):
    """Raised for unsupported elements or malformed evaluation requests."""
    pass


class ElementKind(Enum):
    """Element families on the square grid."""
    LAGRANGE = auto()
    HERMITE = auto()


_SUPPORTED = {
    ElementKind.LAGRANGE: (1, 2),
    ElementKind.HERMITE: (1, 3, 5),
}


def _check_supported(kind: ElementKind, degree: int):
    if degree not in _SUPPORTED.get(kind, ()):
        raise SpaceError(f"Unsupported element {kind.name} of degree {degree}")


@dataclass(frozen=True)
class ElementFamily:
    """Element kind and per-axis polynomial degree k."""
    kind: ElementKind
    degree: int

    def __post_init__(self):
        _check_supported(self.kind, self.degree)

    @classmethod
    def lagrange(cls, degree: int) -> 'ElementFamily':
        return cls(ElementKind.LAGRANGE, degree)

    @classmethod
    def hermite(cls, degree: int) -> 'ElementFamily':
        return cls(ElementKind.HERMITE, degree)

    @classmethod
    def from_name(cls, name: str) -> 'ElementFamily':
        """Parse 'Q1', 'Q2', 'H3', 'H5'."""
        kinds = {'Q': ElementKind.LAGRANGE, 'H': ElementKind.HERMITE}
        if len(name) < 2 or name[0].upper() not in kinds or not name[1:].isdigit():
            raise SpaceError(f"Unknown element name '{name}'")
        return cls(kinds[name[0].upper()], int(name[1:]))

    @property
    def name(self) -> str:
        return f"{'Q' if self.kind == ElementKind.LAGRANGE else 'H'}{self.degree}"

    @property
    def dofs_per_cell(self) -> int:
        return (self.degree + 1) ** 2

    @property
    def continuity(self) -> int:
        """Order l of the C^l continuity across cell edges."""
        if self.kind == ElementKind.LAGRANGE:
            return 0
        return (self.degree - 1) // 2

    @property
    def derivatives_per_axis(self) -> int:
        """Number of derivative DOFs per node and axis (1 for Lagrange)."""
        return self.continuity + 1 if self.kind == ElementKind.HERMITE else 1

    @property
    def lattice_stride(self) -> int:
        """Nodes per cell edge on the global node lattice."""
        return self.degree if self.kind == ElementKind.LAGRANGE else 1


@dataclass(frozen=True)
class GeneralizedNode:
    """DOF functional v -> h^|alpha| D^alpha v(xi) on cells of size h."""
    alpha: MultiIndex
    xi: Tuple[float, float]


def _falling(p: int, r: int) -> float:
    """p (p-1) ... (p-r+1)."""
    return float(math.perm(p, r)) if p >= r else 0.0


def _monomial_derivatives(t: np.ndarray, degree: int, r: int) -> np.ndarray:
    """Matrix V[i, p] = d^r/dt^r t^p at t[i]."""
    t = np.asarray(t, dtype=float)
    V = np.zeros((t.size, degree + 1))
    for p in range(r, degree + 1):
        V[:, p] = _falling(p, r) * t ** (p - r)
    return V


class ReferenceBasis:
    """1D shape functions and dual functionals of one family on [0, 1].

    The 2D basis is the tensor product; local DOF i = iy * (k + 1) + ix.
    """

    def __init__(self, family: ElementFamily):
        _check_supported(family.kind, family.degree)
        self.family = family
        k = family.degree
        if family.kind == ElementKind.LAGRANGE:
            functionals = [(j / k, 0, j) for j in range(k + 1)]
        else:
            m = family.continuity
            functionals = [(float(e), l, e) for e in (0, 1) for l in range(m + 1)]
        # (node t, derivative order l, lattice offset)
        self.functionals: List[Tuple[float, int, int]] = functionals
        dual = np.zeros((k + 1, k + 1))
        for row, (t, l, _) in enumerate(functionals):
            dual[row] = _monomial_derivatives(np.array([t]), k, l)[0]
        self.dual = dual
        # coefficients[i, p]: monomial coefficients of basis function i
        self.coefficients = np.linalg.inv(dual).T

        n1 = k + 1
        ix = np.tile(np.arange(n1), n1)
        iy = np.repeat(np.arange(n1), n1)
        self.local_ix = ix
        self.local_iy = iy
        self.local_lx = np.array([functionals[i][1] for i in ix])
        self.local_ly = np.array([functionals[i][1] for i in iy])
        self.local_ox = np.array([functionals[i][2] for i in ix])
        self.local_oy = np.array([functionals[i][2] for i in iy])

    @property
    def degree(self) -> int:
        return self.family.degree

    def kronecker(self) -> np.ndarray:
        """Functionals applied to basis functions; the identity for a valid basis."""
        return self.dual @ self.coefficients.T

    def eval_1d(self, t, r: int = 0) -> np.ndarray:
        """r-th derivative of every 1D basis function at t, shape (len(t), k + 1)."""
        return _monomial_derivatives(t, self.degree, r) @ self.coefficients.T

    def reference_nodes(self) -> List[GeneralizedNode]:
        """Generalized nodes of the reference cell in local DOF order."""
        return [GeneralizedNode((int(self.local_lx[i]), int(self.local_ly[i])),
                                (self.functionals[self.local_ix[i]][0], self.functionals[self.local_iy[i]][0]))
                for i in range(self.family.dofs_per_cell)]


@lru_cache(maxsize=None)
def reference_basis(family: ElementFamily) -> ReferenceBasis:
    return ReferenceBasis(family)


def evaluate_shape(family: ElementFamily, local_dof: int, point: Sequence[float],
                   deriv: MultiIndex = (0, 0)) -> float:
    """Evaluate a reference shape function (or derivative) anywhere in the plane."""
    basis = reference_basis(family)
    if not 0 <= local_dof < family.dofs_per_cell:
        raise SpaceError(f"Local DOF {local_dof} out of range for {family.name}")
    if deriv[0] < 0 or deriv[1] < 0:
        raise SpaceError(f"Negative derivative order {deriv}")
    ix = basis.local_ix[local_dof]
    iy = basis.local_iy[local_dof]
    vx = basis.eval_1d(np.array([point[0]]), deriv[0])[0, ix]
    vy = basis.eval_1d(np.array([point[1]]), deriv[1])[0, iy]
    return float(vx * vy)


@dataclass
class DofMap:
    """Global numbering of generalized nodes on the active mesh."""
    nodes: List[GeneralizedNode]
    node_points: np.ndarray
    node_alpha: np.ndarray
    node_lattice: np.ndarray
    cell_to_dofs: np.ndarray
    interior_dofs: np.ndarray
    band_dofs: np.ndarray

    @property
    def n_dofs(self) -> int:
        return len(self.nodes)

    def cells_of_dof(self) -> List[np.ndarray]:
        """Active positions of the cells sharing each DOF."""
        n_cells, per_cell = self.cell_to_dofs.shape
        flat = self.cell_to_dofs.ravel()
        order = np.argsort(flat, kind='stable')
        owners = (order // per_cell)
        counts = np.bincount(flat, minlength=self.n_dofs)
        return np.split(owners, np.cumsum(counts)[:-1])


def build_dof_map(active: ActiveMesh, family: ElementFamily) -> DofMap:
    """Number DOFs conformingly; interior DOFs are those touched by interior cells."""
    if active.n_active == 0:
        raise SpaceError("Cannot number DOFs on an empty mesh")
    basis = reference_basis(family)
    grid = active.grid
    stride = family.lattice_stride
    m1 = family.derivatives_per_axis
    lattice_nx = grid.nx * stride + 1

    ci, cj = grid.cell_ij(active.active_cells)
    lat_x = ci[:, None] * stride + basis.local_ox[None, :]
    lat_y = cj[:, None] * stride + basis.local_oy[None, :]
    code = ((lat_y * lattice_nx + lat_x) * m1 + basis.local_ly[None, :]) * m1 + basis.local_lx[None, :]
    unique, inverse = np.unique(code.ravel(), return_inverse=True)
    cell_to_dofs = inverse.reshape(code.shape).astype(np.int64)

    lx = unique % m1
    ly = (unique // m1) % m1
    lattice = unique // (m1 * m1)
    gx = lattice % lattice_nx
    gy = lattice // lattice_nx
    spacing = grid.cell_size / stride
    points = np.column_stack([grid.origin[0] + gx * spacing, grid.origin[1] + gy * spacing])
    alpha = np.column_stack([lx, ly]).astype(np.int64)
    nodes = [GeneralizedNode((int(a), int(b)), (float(x), float(y)))
             for (a, b), (x, y) in zip(alpha, points)]

    interior_dofs = np.unique(cell_to_dofs[active.interior].ravel())
    band_dofs = np.setdiff1d(np.arange(len(unique)), interior_dofs)
    logger.debug("%s DOF map: %d DOFs (%d interior, %d band)",
                 family.name, len(unique), len(interior_dofs), len(band_dofs))
    return DofMap(
        nodes=nodes,
        node_points=points,
        node_alpha=alpha,
        node_lattice=np.column_stack([gx, gy]).astype(np.int64),
        cell_to_dofs=cell_to_dofs,
        interior_dofs=interior_dofs,
        band_dofs=band_dofs,
    )


class FESpace:
    """Element family, active mesh and DOF map bundled for assembly."""

    def __init__(self, active: ActiveMesh, family: ElementFamily, dofmap: DofMap):
        self.active = active
        self.family = family
        self.dofmap = dofmap
        self.basis = reference_basis(family)

    @classmethod
    def build(cls, active: ActiveMesh, family: ElementFamily) -> 'FESpace':
        return cls(active, family, build_dof_map(active, family))

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_dofs

    @property
    def cell_size(self) -> float:
        return self.active.grid.cell_size

    def cell_dofs(self, position: int) -> np.ndarray:
        return self.dofmap.cell_to_dofs[position]

    def _tabulate_local(self, tx: np.ndarray, ty: np.ndarray,
                        derivatives: Iterable[MultiIndex]) -> Dict[MultiIndex, np.ndarray]:
        h = self.cell_size
        basis = self.basis
        cache_x: Dict[int, np.ndarray] = {}
        cache_y: Dict[int, np.ndarray] = {}
        tables = {}
        for rx, ry in derivatives:
            if rx < 0 or ry < 0:
                raise SpaceError(f"Negative derivative order {(rx, ry)}")
            if rx not in cache_x:
                cache_x[rx] = basis.eval_1d(tx, rx)[:, basis.local_ix] * h ** -rx
            if ry not in cache_y:
                cache_y[ry] = basis.eval_1d(ty, ry)[:, basis.local_iy] * h ** -ry
            tables[(rx, ry)] = cache_x[rx] * cache_y[ry]
        return tables

    def tabulate(self, position: int, points: np.ndarray,
                 derivatives: Iterable[MultiIndex]) -> Dict[MultiIndex, np.ndarray]:
        """Physical shape-function derivatives of one cell at arbitrary points.

        Returns {(rx, ry): array (n_points, dofs_per_cell)}; points outside the
        cell give the canonical polynomial extension.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        origin = self.active.cell_origins([position])[0]
        h = self.cell_size
        return self._tabulate_local((points[:, 0] - origin[0]) / h, (points[:, 1] - origin[1]) / h,
                                    derivatives)

    def tabulate_reference(self, ref_points: np.ndarray,
                           derivatives: Iterable[MultiIndex]) -> Dict[MultiIndex, np.ndarray]:
        """Physical derivatives at reference points of [0, 1]^2, identical for every cell."""
        ref_points = np.atleast_2d(ref_points)
        return self._tabulate_local(ref_points[:, 0], ref_points[:, 1], derivatives)

    def dof_scales(self, dofs: Optional[np.ndarray] = None) -> np.ndarray:
        """h^|alpha| of each DOF functional."""
        alpha = self.dofmap.node_alpha if dofs is None else self.dofmap.node_alpha[np.asarray(dofs, dtype=np.int64)]
        return self.cell_size ** alpha.sum(axis=1).astype(float)

    def interpolate(self, field, dofs: Optional[np.ndarray] = None) -> np.ndarray:
        """Apply the DOF functionals h^|alpha| D^alpha(.)(xi) to a field."""
        if dofs is None:
            dofs = np.arange(self.n_dofs)
        dofs = np.asarray(dofs, dtype=np.int64)
        values = np.zeros(len(dofs))
        alpha = self.dofmap.node_alpha[dofs]
        points = self.dofmap.node_points[dofs]
        for a in {tuple(int(v) for v in row) for row in alpha}:
            mask = (alpha[:, 0] == a[0]) & (alpha[:, 1] == a[1])
            values[mask] = field(points[mask, 0], points[mask, 1], a)
        return values * self.dof_scales(dofs)

    def evaluate(self, coefficients: np.ndarray, position: int, points: np.ndarray,
                 alpha: MultiIndex = (0, 0)) -> np.ndarray:
        """Evaluate D^alpha of a global coefficient vector using one cell's polynomial."""
        table = self.tabulate(position, points, [alpha])[alpha]
        return table @ coefficients[self.cell_dofs(position)]
