"""
Bilinear forms for cutfem

Nitsche assemblies on cut meshes (Poisson, elliptic interface, biharmonic,
triharmonic) and the mass matrix. Matrices are assembled in full coordinates
and reduced to the extended space with E^T K E.

A Nitsche form is described by its volume operator, its consistency terms
(sign, flux, trace) and its penalty terms (scale, trace):

    a(v, w) = (L v, L w)_Omega
              + sum sign * [(flux v, trace w) + (flux w, trace v)]_boundary
              + sum scale * (trace v, trace w)_boundary
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sparse

from .extension import ExtensionOperator
from .femspace import ElementKind, FESpace
from .fields import Field, FieldLike, as_field
from .geometry import LevelSetDomain, QuadratureRule, surface_quadrature, tensor_rule, volume_quadrature
from .operators import derivatives_of, trace_operator, volume_operator

logger = logging.getLogger(__name__)


class FormError(ValueError):
    """Raised for invalid form parameters or incompatible spaces."""
    pass


def _check_spd(A: np.ndarray, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise FormError(f"{name} must be a 2x2 matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(A).max())):
        raise FormError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(A).min() <= 0.0:
        raise FormError(f"{name} is not positive definite")
    return A


@dataclass
class FormParams:
    """Penalty parameters, interface weighting and diffusion matrices.

    kappa is 'area' (kappa_1 = |T & Omega_1| / |T|) or a fixed kappa_1 in (0, 1).
    local_penalty multiplies each boundary penalty on a cut cell by the
    local inverse estimate of its paired flux when that exceeds one.
    """
    beta: float = 100.0
    gamma: float = 1.0
    kappa: Union[str, float] = 'area'
    local_penalty: bool = True
    A1: np.ndarray = field(default_factory=lambda: np.eye(2))
    A2: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        if not self.beta > 0.0:
            raise FormError(f"Penalty beta must be positive, got {self.beta}")
        if not self.gamma > 0.0:
            raise FormError(f"Penalty gamma must be positive, got {self.gamma}")
        if isinstance(self.kappa, str):
            if self.kappa != 'area':
                raise FormError(f"Unknown interface weighting '{self.kappa}'")
        elif not 0.0 < float(self.kappa) < 1.0:
            raise FormError(f"Fixed kappa_1 must lie in (0, 1), got {self.kappa}")
        self.A1 = _check_spd(self.A1, 'A1')
        self.A2 = _check_spd(self.A2, 'A2')


@dataclass
class AssembledSystem:
    """K u = b in full or reduced coordinates.

    extension maps a reduced solution to full coefficients (block diagonal
    for the interface problem); offsets split full vectors into phases.
    """
    K: sparse.csr_matrix
    b: np.ndarray
    coordinates: str
    extension: Optional[sparse.csr_matrix] = None
    offsets: Tuple[int, ...] = (0,)
    dirichlet_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def expand(self, x: np.ndarray) -> np.ndarray:
        if self.extension is None:
            return np.asarray(x, dtype=float)
        return self.extension @ x

    def split(self, full: np.ndarray) -> List[np.ndarray]:
        """Cut a full vector into per-phase pieces."""
        bounds = list(self.offsets) + [len(full)]
        return [full[bounds[i]:bounds[i + 1]] for i in range(len(self.offsets))]


def default_depth(space: FESpace) -> int:
    return 6 if space.family.kind == ElementKind.HERMITE else 4


class CutIntegration:
    """Quadrature for one space on one domain.

    Uncut cells share a single reference rule; cut cells get their own volume
    and surface rules, computed on first use.
    """

    def __init__(self, space: FESpace, domain: LevelSetDomain, depth: Optional[int] = None,
                 volume_order: Optional[int] = None, surface_order: Optional[int] = None):
        k = space.family.degree
        self.space = space
        self.domain = domain
        self.volume_order = volume_order or k + 1
        self.surface_order = surface_order or k + 2
        if domain.is_polygonal:
            self.depth = 0
        else:
            self.depth = default_depth(space) if depth is None else depth
        self.ref_points, ref_weights = tensor_rule(self.volume_order)
        self.ref_weights = ref_weights * space.cell_size ** 2
        self._volume: Dict[int, QuadratureRule] = {}
        self._surface: Dict[int, QuadratureRule] = {}
        self._scalings: List[Tuple[NitscheTerms, Optional[ExtensionOperator], 'PenaltyScaling']] = []

    @property
    def uncut_positions(self) -> np.ndarray:
        return np.flatnonzero(~self.space.active.cut)

    @property
    def cut_positions(self) -> np.ndarray:
        return np.flatnonzero(self.space.active.cut)

    def uncut_points(self, positions: np.ndarray) -> np.ndarray:
        """Quadrature points of uncut cells, shape (n_cells, n_points, 2)."""
        origins = self.space.active.cell_origins(positions)
        return origins[:, None, :] + self.space.cell_size * self.ref_points[None, :, :]

    def volume_rule(self, position: int) -> QuadratureRule:
        rule = self._volume.get(position)
        if rule is None:
            rule = volume_quadrature(self.space.active.cell(position), self.domain,
                                     self.volume_order, self.depth)
            self._volume[position] = rule
        return rule

    def surface_rule(self, position: int) -> QuadratureRule:
        rule = self._surface.get(position)
        if rule is None:
            rule = surface_quadrature(self.space.active.cell(position), self.domain, self.surface_order)
            self._surface[position] = rule
        return rule

    def cut_area(self, position: int) -> float:
        return self.volume_rule(position).total_weight()

    def measure(self) -> float:
        """|Omega| as integrated by these rules."""
        uncut = len(self.uncut_positions) * self.ref_weights.sum()
        return float(uncut + sum(self.cut_area(p) for p in self.cut_positions))

    def penalty_scaling(self, terms: 'NitscheTerms', E: Optional[ExtensionOperator] = None) -> 'PenaltyScaling':
        """Penalty multipliers of terms, computed once per extension operator."""
        for cached_terms, cached_E, scaling in self._scalings:
            if cached_terms == terms and cached_E is E:
                return scaling
        scaling = PenaltyScaling(self.space, self, terms, E)
        self._scalings.append((terms, E, scaling))
        return scaling


@dataclass(frozen=True)
class NitscheTerms:
    """Volume operator, consistency terms (sign, flux, trace) and penalties (scale, trace).

    With local_scaling each penalty on a cut cell T is multiplied by
    max(1, h^p Lambda_T), Lambda_T being the largest eigenvalue of
    ||flux v||^2 on the boundary part of T against ||L v||^2 on all of T for
    the flux paired with the penalized trace.
    """
    volume: str
    consistency: Tuple[Tuple[float, str, str], ...] = ()
    penalties: Tuple[Tuple[float, str], ...] = ()
    local_scaling: bool = False

    def boundary_derivatives(self):
        names = [flux for _, flux, _ in self.consistency] + [tr for _, _, tr in self.consistency]
        names += [tr for _, tr in self.penalties]
        return derivatives_of(names)

    def flux_for(self, trace_name: str) -> Optional[str]:
        for _, flux, trace in self.consistency:
            if trace == trace_name:
                return flux
        return None

    def penalty_power(self, trace_name: str) -> int:
        """p with Lambda_T ~ h^-p for the flux paired with trace_name."""
        flux = self.flux_for(trace_name)
        if flux is None:
            raise FormError(f"No consistency term pairs with the '{trace_name}' penalty")
        return 2 * trace_operator(flux).order - 2 * volume_operator(self.volume).order + 1

    @property
    def has_boundary(self) -> bool:
        return bool(self.consistency or self.penalties)


def poisson_terms(params: FormParams, h: float) -> NitscheTerms:
    return NitscheTerms('grad', ((-1.0, 'dn', 'value'),), ((params.beta / h, 'value'),),
                        local_scaling=params.local_penalty)


def biharmonic_terms(params: FormParams, h: float) -> NitscheTerms:
    return NitscheTerms(
        'lap',
        ((-1.0, 'lap', 'dn'), (1.0, 'dn_lap', 'value')),
        ((params.beta / h, 'dn'), (params.beta * params.gamma / h ** 3, 'value')),
        local_scaling=params.local_penalty,
    )


def triharmonic_terms(params: FormParams, h: float) -> NitscheTerms:
    return NitscheTerms(
        'grad_lap',
        ((-1.0, 'dn_bilap', 'value'), (1.0, 'bilap', 'dn'), (-1.0, 'dn_lap', 'lap')),
        ((params.beta / h, 'lap'), (params.beta / h ** 3, 'dn'), (params.beta / h ** 5, 'value')),
        local_scaling=params.local_penalty,
    )


class _Scatter:
    """Collects local matrices and vectors for COO assembly."""

    def __init__(self, n: int):
        self.n = n
        self.rows: List[np.ndarray] = []
        self.cols: List[np.ndarray] = []
        self.vals: List[np.ndarray] = []
        self.b = np.zeros(n)

    def add_matrix(self, dofs: np.ndarray, local: np.ndarray):
        self.rows.append(np.repeat(dofs, len(dofs)))
        self.cols.append(np.tile(dofs, len(dofs)))
        self.vals.append(local.ravel())

    def add_matrices(self, dofs: np.ndarray, local: np.ndarray):
        """Same local matrix (nb, nb) for every row of dofs (m, nb)."""
        nb = dofs.shape[1]
        self.rows.append(np.repeat(dofs, nb, axis=1).ravel())
        self.cols.append(np.tile(dofs, (1, nb)).ravel())
        self.vals.append(np.tile(local.ravel(), len(dofs)))

    def add_vector(self, dofs: np.ndarray, local: np.ndarray):
        np.add.at(self.b, dofs, local)

    def matrix(self) -> sparse.csr_matrix:
        if not self.rows:
            return sparse.csr_matrix((self.n, self.n))
        K = sparse.coo_matrix((np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
                              shape=(self.n, self.n)).tocsr()
        K.sum_duplicates()
        return K


def _volume_local(L: np.ndarray, weights: np.ndarray, coefficient: Optional[np.ndarray]) -> np.ndarray:
    WL = L * weights[None, :, None]
    if coefficient is None:
        return np.einsum('cqi,cqj->ij', L, WL)
    return np.einsum('cqi,cd,dqj->ij', L, coefficient, WL)


class PenaltyScaling:
    """Local inverse estimates of the paired fluxes on every cut cell.

    For a cut cell T the estimate Lambda_T is the largest eigenvalue of
    ||F v||^2 on the boundary part of T against ||L v||^2 on T & Omega plus
    the interior cells sharing a reduced DOF with T, over the extended space
    when E is given. Without E the whole cell T is used instead.
    Each penalty on T is multiplied by max(1, h^p Lambda_T).
    """

    def __init__(self, space: FESpace, integration: 'CutIntegration', terms: NitscheTerms,
                 E: Optional[ExtensionOperator] = None):
        self.space = space
        self.terms = terms
        self.E = E
        vol = volume_operator(terms.volume)
        self._vol = vol
        tables = space.tabulate_reference(integration.ref_points, vol.derivatives)
        self._reference = _volume_local(vol.apply(tables), integration.ref_weights, None)
        self.factors: Dict[int, Dict[str, float]] = {}
        if E is not None:
            self._column = np.full(space.n_dofs, -1, dtype=np.int64)
            self._column[E.interior_dofs] = np.arange(E.n_reduced)
            self._owners = space.dofmap.cells_of_dof()
        h = space.cell_size
        traces = [trace_name for _, trace_name in terms.penalties]
        powers = {name: terms.penalty_power(name) for name in traces}
        for position in integration.cut_positions:
            surf = integration.surface_rule(position)
            if surf.size == 0:
                continue
            R, B = self._patch(integration, int(position))
            W = _whitening(B)
            bnd = space.tabulate(position, surf.points, derivatives_of(terms.flux_for(t) for t in traces))
            cell = {}
            for name in traces:
                Fv = trace_operator(terms.flux_for(name)).apply(bnd, surf.normals) @ R
                A = Fv.T @ (surf.weights[:, None] * Fv)
                lam = float(np.linalg.eigvalsh(W.T @ A @ W).max()) if W.shape[1] else 0.0
                cell[name] = max(1.0, h ** powers[name] * lam)
            self.factors[int(position)] = cell
        if self.factors:
            values = [v for cell in self.factors.values() for v in cell.values()]
            logger.debug("penalty multipliers on %d cut cells in [%.3g, %.3g]",
                         len(self.factors), min(values), max(values))

    def factor(self, position: int, trace_name: str) -> float:
        return self.factors.get(int(position), {}).get(trace_name, 1.0)

    def _cell_energy(self, integration: 'CutIntegration', position: int) -> np.ndarray:
        if not self.space.active.cut[position]:
            return self._reference
        rule = integration.volume_rule(position)
        if rule.size == 0:
            return np.zeros_like(self._reference)
        tables = self.space.tabulate(position, rule.points, self._vol.derivatives)
        return _volume_local(self._vol.apply(tables), rule.weights, None)

    def _patch(self, integration: 'CutIntegration', position: int) -> Tuple[np.ndarray, np.ndarray]:
        """(R, B): cell DOFs as a function of the patch coordinates, and the patch energy."""
        dofs = self.space.cell_dofs(position)
        if self.E is None:
            return np.eye(len(dofs)), self._reference
        E = self.E
        active = self.space.active
        column = self._column
        owners = self._owners
        rows = E.matrix[dofs]
        own = np.unique(rows.indices)
        patch = sorted({int(c) for d in E.interior_dofs[own] for c in owners[d] if active.interior[c]})
        union = np.unique(np.concatenate([own] + [column[self.space.cell_dofs(c)] for c in patch]))
        R = rows[:, union].toarray()
        B = R.T @ self._cell_energy(integration, position) @ R
        for c in patch:
            where = np.searchsorted(union, column[self.space.cell_dofs(c)])
            B[np.ix_(where, where)] += self._cell_energy(integration, c)
        return R, B


def _whitening(B: np.ndarray) -> np.ndarray:
    """W with W^T B W = I on the range of B."""
    mu, Q = np.linalg.eigh(B)
    keep = mu > 1e-10 * max(mu.max(), 0.0)
    # kernel of L lies in the kernel of every paired flux
    return Q[:, keep] / np.sqrt(mu[keep])[None, :]


def _assemble_full(space: FESpace, integration: CutIntegration, terms: NitscheTerms,
                   f: Optional[Field] = None, g: Optional[Field] = None,
                   coefficient: Optional[np.ndarray] = None,
                   with_matrix: bool = True,
                   E: Optional[ExtensionOperator] = None) -> Tuple[Optional[sparse.csr_matrix], np.ndarray]:
    """Assemble a Nitsche form and its load in full coordinates.

    E only enters through the local penalty scaling.
    """
    scaling = integration.penalty_scaling(terms, E) if terms.local_scaling and terms.penalties else None
    vol = volume_operator(terms.volume)
    needed = set(vol.derivatives) | {(0, 0)}
    boundary_needed = terms.boundary_derivatives() | {(0, 0)}
    scatter = _Scatter(space.n_dofs)
    cell_to_dofs = space.dofmap.cell_to_dofs

    uncut = integration.uncut_positions
    if len(uncut):
        tables = space.tabulate_reference(integration.ref_points, needed)
        if with_matrix:
            K_ref = _volume_local(vol.apply(tables), integration.ref_weights, coefficient)
            scatter.add_matrices(cell_to_dofs[uncut], K_ref)
        if f is not None:
            pts = integration.uncut_points(uncut)
            fvals = f(pts[..., 0], pts[..., 1])
            b_local = (fvals * integration.ref_weights[None, :]) @ tables[(0, 0)]
            scatter.add_vector(cell_to_dofs[uncut].ravel(), b_local.ravel())

    for position in integration.cut_positions:
        dofs = cell_to_dofs[position]
        rule = integration.volume_rule(position)
        if rule.size:
            tables = space.tabulate(position, rule.points, needed)
            if with_matrix:
                scatter.add_matrix(dofs, _volume_local(vol.apply(tables), rule.weights, coefficient))
            if f is not None:
                fvals = f(rule.points[:, 0], rule.points[:, 1])
                scatter.add_vector(dofs, tables[(0, 0)].T @ (rule.weights * fvals))
        if not terms.has_boundary:
            continue
        surf = integration.surface_rule(position)
        if surf.size == 0:
            continue
        tables = space.tabulate(position, surf.points, boundary_needed)
        w = surf.weights
        local = np.zeros((len(dofs), len(dofs)))
        load = np.zeros(len(dofs))
        for sign, flux_name, trace_name in terms.consistency:
            flux = trace_operator(flux_name)
            trace = trace_operator(trace_name)
            Fv = flux.apply(tables, surf.normals)
            Tv = trace.apply(tables, surf.normals)
            cross = Fv.T @ (w[:, None] * Tv)
            local += sign * (cross + cross.T)
            if g is not None:
                load += sign * Fv.T @ (w * trace.apply_field(g, surf.points, surf.normals))
        for scale, trace_name in terms.penalties:
            trace = trace_operator(trace_name)
            Tv = trace.apply(tables, surf.normals)
            if scaling is not None:
                scale = scale * scaling.factor(position, trace_name)
            local += scale * Tv.T @ (w[:, None] * Tv)
            if g is not None:
                load += scale * Tv.T @ (w * trace.apply_field(g, surf.points, surf.normals))
        if with_matrix:
            scatter.add_matrix(dofs, local)
        scatter.add_vector(dofs, load)

    K = scatter.matrix() if with_matrix else None
    return K, scatter.b


def _integration_for(space: FESpace, domain: LevelSetDomain,
                     integration: Optional[CutIntegration]) -> CutIntegration:
    if integration is None:
        return CutIntegration(space, domain)
    if integration.space is not space:
        raise FormError("Quadrature was built for a different space")
    return integration


def _reduce(E: ExtensionOperator, K, b: np.ndarray) -> AssembledSystem:
    K_red = E.reduce_matrix(K)
    b_red = E.matrix.T @ b
    return AssembledSystem(K=K_red, b=b_red, coordinates='reduced', extension=E.matrix)


def _check_extension(space: FESpace, E: ExtensionOperator):
    if E.n_full != space.n_dofs:
        raise FormError(f"Extension has {E.n_full} rows but the space has {space.n_dofs} DOFs")


def _assemble_reduced(space, E, domain, terms, f, g, integration) -> AssembledSystem:
    _check_extension(space, E)
    integration = _integration_for(space, domain, integration)
    K, b = _assemble_full(space, integration, terms, as_field(f), as_field(g), E=E)
    return _reduce(E, K, b)


def assemble_poisson(space: FESpace, E: ExtensionOperator, domain: LevelSetDomain, params: FormParams,
                     f: FieldLike = None, g: FieldLike = None,
                     integration: Optional[CutIntegration] = None) -> AssembledSystem:
    """Symmetric Nitsche method for -Laplace u = f, u = g on the boundary."""
    return _assemble_reduced(space, E, domain, poisson_terms(params, space.cell_size), f, g, integration)


def poisson_load_vector(space: FESpace, E: ExtensionOperator, domain: LevelSetDomain, params: FormParams,
                        f: FieldLike = None, g: FieldLike = None,
                        integration: Optional[CutIntegration] = None) -> np.ndarray:
    """Reduced Poisson load only (used by the time stepper at every step)."""
    _check_extension(space, E)
    integration = _integration_for(space, domain, integration)
    _, b = _assemble_full(space, integration, poisson_terms(params, space.cell_size),
                          as_field(f), as_field(g), with_matrix=False, E=E)
    return E.matrix.T @ b


def assemble_full_stiffness(space: FESpace, domain: LevelSetDomain, params: FormParams,
                            integration: Optional[CutIntegration] = None,
                            E: Optional[ExtensionOperator] = None) -> sparse.csr_matrix:
    """Poisson Nitsche matrix on all active DOFs, without extension.

    Passing E gives the penalties of the extended method.
    """
    integration = _integration_for(space, domain, integration)
    K, _ = _assemble_full(space, integration, poisson_terms(params, space.cell_size), E=E)
    return K


def assemble_biharmonic(space: FESpace, E: ExtensionOperator, domain: LevelSetDomain, params: FormParams,
                        f: FieldLike = None, g: FieldLike = None,
                        integration: Optional[CutIntegration] = None) -> AssembledSystem:
    """Nitsche method for the clamped plate Delta^2 u = f, u = g, du/dn = dg/dn."""
    if space.family.continuity < 1:
        raise FormError("biharmonic requires C1 elements")
    return _assemble_reduced(space, E, domain, biharmonic_terms(params, space.cell_size), f, g, integration)


def assemble_triharmonic(space: FESpace, E: ExtensionOperator, domain: LevelSetDomain, params: FormParams,
                         f: FieldLike = None, g: FieldLike = None,
                         integration: Optional[CutIntegration] = None) -> AssembledSystem:
    """Nitsche method for -Delta^3 u = f with u, du/dn and Delta u prescribed."""
    if space.family.continuity < 2:
        raise FormError("triharmonic requires C2 elements")
    return _assemble_reduced(space, E, domain, triharmonic_terms(params, space.cell_size), f, g, integration)


def assemble_mass(space: FESpace, E: ExtensionOperator, domain: LevelSetDomain,
                  integration: Optional[CutIntegration] = None) -> sparse.csr_matrix:
    """Reduced mass matrix E^T M E."""
    _check_extension(space, E)
    integration = _integration_for(space, domain, integration)
    M, _ = _assemble_full(space, integration, NitscheTerms('value'))
    return E.reduce_matrix(M)


def interface_weights(integration: CutIntegration, params: FormParams) -> Dict[int, Tuple[float, float]]:
    """(kappa_1, kappa_2) per cut background cell of phase 1."""
    active = integration.space.active
    cell_area = integration.space.cell_size ** 2
    weights = {}
    for position in integration.cut_positions:
        if params.kappa == 'area':
            k1 = min(max(integration.cut_area(position) / cell_area, 0.0), 1.0)
        else:
            k1 = float(params.kappa)
        weights[int(active.active_cells[position])] = (k1, 1.0 - k1)
    return weights


def boundary_dofs(space: FESpace, dofs: np.ndarray) -> np.ndarray:
    """Subset of dofs determined by the trace on the outer grid boundary.

    Value DOFs on the boundary qualify, as do derivatives tangential to it.
    """
    grid = space.active.grid
    stride = space.family.lattice_stride
    lat = space.dofmap.node_lattice[dofs]
    alpha = space.dofmap.node_alpha[dofs]
    on_x = (lat[:, 0] == 0) | (lat[:, 0] == grid.nx * stride)
    on_y = (lat[:, 1] == 0) | (lat[:, 1] == grid.ny * stride)
    keep = (on_x & (alpha[:, 0] == 0)) | (on_y & (alpha[:, 1] == 0))
    return dofs[keep]


def apply_dirichlet(K: sparse.csr_matrix, b: np.ndarray, dofs: np.ndarray,
                    values: np.ndarray) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """Symmetric elimination of prescribed DOFs; returns a new system."""
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    n = K.shape[0]
    lifted = np.zeros(n)
    lifted[dofs] = values
    b = b - K @ lifted
    keep = np.ones(n)
    keep[dofs] = 0.0
    D = sparse.diags(keep)
    fixed = sparse.diags(1.0 - keep)
    K = (D @ K @ D + fixed).tocsr()
    b[dofs] = values
    return K, b


def assemble_interface(spaces: Sequence[FESpace], extensions: Sequence[ExtensionOperator],
                       domains: Sequence[LevelSetDomain], params: FormParams,
                       f: Union[FieldLike, Sequence[FieldLike]] = None,
                       g: FieldLike = None,
                       integrations: Optional[Sequence[CutIntegration]] = None) -> AssembledSystem:
    """Nitsche coupling of two phases across the interface of domains[0].

    Both phases are bounded by the fitted outer boundary of the grid where
    they reach it; g (one field, or one per phase) is imposed strongly there
    on the reduced DOFs.
    """
    if len(spaces) != 2 or len(extensions) != 2 or len(domains) != 2:
        raise FormError("The interface problem needs exactly two phases")
    for space, E in zip(spaces, extensions):
        _check_extension(space, E)
    if integrations is None:
        integrations = [CutIntegration(s, d) for s, d in zip(spaces, domains)]
    loads = list(f) if isinstance(f, (list, tuple)) else [f, f]
    A = (params.A1, params.A2)

    n1, n2 = spaces[0].n_dofs, spaces[1].n_dofs
    blocks = []
    loads_full = []
    for i in range(2):
        K_i, b_i = _assemble_full(spaces[i], integrations[i], NitscheTerms('grad'),
                                  as_field(loads[i]), coefficient=A[i])
        blocks.append(K_i)
        loads_full.append(b_i)

    coupling = _Scatter(n1 + n2)
    h = spaces[0].cell_size
    kappa = interface_weights(integrations[0], params)
    mesh2 = spaces[1].active
    for position in integrations[0].cut_positions:
        cell_index = int(spaces[0].active.active_cells[position])
        other = mesh2.position(cell_index)
        if other < 0:
            raise FormError(f"Interface cell {cell_index} is not active in the outer phase")
        rule = integrations[0].surface_rule(position)
        if rule.size == 0:
            continue
        k1, k2 = kappa[cell_index]
        n_1 = rule.normals
        t1 = spaces[0].tabulate(position, rule.points, [(0, 0), (1, 0), (0, 1)])
        t2 = spaces[1].tabulate(other, rule.points, [(0, 0), (1, 0), (0, 1)])
        zeros = np.zeros_like(t1[(0, 0)])
        jumps = (np.hstack([k2 * t1[(0, 0)], -k2 * t2[(0, 0)]]),
                 np.hstack([-k1 * t1[(0, 0)], k1 * t2[(0, 0)]]))
        dofs = np.concatenate([spaces[0].cell_dofs(position), n1 + spaces[1].cell_dofs(other)])
        w = rule.weights
        local = np.zeros((len(dofs), len(dofs)))
        for i, (tables, normal) in enumerate(((t1, n_1), (t2, -n_1))):
            An = normal @ A[i]
            flux_i = An[:, 0:1] * tables[(1, 0)] + An[:, 1:2] * tables[(0, 1)]
            flux = np.hstack([flux_i, zeros]) if i == 0 else np.hstack([zeros, flux_i])
            cross = flux.T @ (w[:, None] * jumps[i])
            local -= cross + cross.T
            scale = params.beta / h * np.sqrt(np.einsum('qa,ab,qb->q', normal, A[i], normal))
            local += jumps[i].T @ ((w * scale)[:, None] * jumps[i])
        coupling.add_matrix(dofs, local)

    K = (sparse.block_diag(blocks, format='csr') + coupling.matrix()).tocsr()
    b = np.concatenate(loads_full)
    E = sparse.block_diag([extensions[0].matrix, extensions[1].matrix], format='csr')
    K_red = (E.T @ K @ E).tocsr()
    b_red = E.T @ b

    reduced1 = extensions[0].n_reduced
    data = list(g) if isinstance(g, (list, tuple)) else [g, g]
    columns = []
    values = []
    for i, offset in enumerate((0, reduced1)):
        interior = extensions[i].interior_dofs
        outer = boundary_dofs(spaces[i], interior)
        columns.append(np.searchsorted(interior, outer) + offset)
        values.append(spaces[i].interpolate(as_field(data[i]), outer))
    columns = np.concatenate(columns)
    K_red, b_red = apply_dirichlet(K_red, b_red, columns, np.concatenate(values))
    logger.debug("interface system: %d reduced DOFs, %d strongly fixed", K_red.shape[0], len(columns))
    return AssembledSystem(K=K_red, b=b_red, coordinates='reduced', extension=E,
                           offsets=(0, n1), dirichlet_dofs=columns)
