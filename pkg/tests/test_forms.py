"""
Tests for cutfem Nitsche assemblies
"""

import math

import numpy as np
import pytest
import scipy.sparse as sparse
import sympy
from src.cutfem.extension import build_extension
from src.cutfem.femspace import ElementFamily, FESpace
from src.cutfem.fields import Field, X, Y
from src.cutfem.forms import (
    CutIntegration, FormError, FormParams, apply_dirichlet, assemble_biharmonic,
    assemble_full_stiffness, assemble_interface, assemble_mass, assemble_poisson,
    assemble_triharmonic, biharmonic_terms, boundary_dofs, interface_weights, poisson_terms, triharmonic_terms,
)
from src.cutfem.geometry import LevelSetDomain
from src.cutfem.mesh import BackgroundGrid, build_active_mesh, build_sh_map
from src.cutfem.solver import is_symmetric, solve

DISC = LevelSetDomain.circle((0.0, 0.0), 0.5)
BOX = LevelSetDomain.axis_box((0.13, 0.17), (0.87, 0.81))


def setup(domain, family, grid):
    active = build_active_mesh(grid, domain)
    space = FESpace.build(active, family)
    return space, build_extension(space, build_sh_map(active))


def disc_grid(n=8):
    return BackgroundGrid((-0.5863, -0.5929), n, n, 1.2 / n)


def box_grid():
    return BackgroundGrid((0.0, 0.0), 5, 5, 0.2)


def solve_full(system):
    return system.expand(solve(system.K, system.b))


def test_params_errors():
    """Test parameter validation."""
    with pytest.raises(FormError):
        FormParams(beta=0.0)
    with pytest.raises(FormError):
        FormParams(gamma=-1.0)
    with pytest.raises(FormError):
        FormParams(kappa='volume')
    with pytest.raises(FormError):
        FormParams(kappa=1.5)
    with pytest.raises(FormError):
        FormParams(A1=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(FormError):
        FormParams(A2=-np.eye(2))
    with pytest.raises(FormError):
        FormParams(A1=np.eye(3))
    assert FormParams(kappa=0.5).kappa == 0.5


def test_poisson_patch_on_disc():
    """Test that a linear solution is reproduced on a disc."""
    space, E = setup(DISC, ElementFamily.lagrange(1), disc_grid())
    u = Field(X)
    integration = CutIntegration(space, DISC, volume_order=8, surface_order=8)
    system = assemble_poisson(space, E, DISC, FormParams(beta=100.0), f=0.0, g=u,
                              integration=integration)
    u_h = solve_full(system)
    assert np.max(np.abs(u_h - space.interpolate(u))) < 1e-9


def test_poisson_patch_on_box_q2():
    """Test that a quadratic solution is reproduced on a box."""
    space, E = setup(BOX, ElementFamily.lagrange(2), box_grid())
    u = Field(X**2 - X * Y + 2 * Y)
    system = assemble_poisson(space, E, BOX, FormParams(beta=50.0), f=-u.laplacian(), g=u)
    u_h = solve_full(system)
    assert np.max(np.abs(u_h - space.interpolate(u))) < 1e-9


def test_poisson_system_properties():
    """Test symmetry, positivity and the reduction E^T K E."""
    space, E = setup(DISC, ElementFamily.lagrange(2), disc_grid())
    params = FormParams(beta=100.0)
    system = assemble_poisson(space, E, DISC, params, f=1.0)
    assert system.coordinates == 'reduced'
    assert system.size == E.n_reduced
    assert is_symmetric(system.K)
    assert np.linalg.eigvalsh(system.K.toarray()).min() > 0.0
    K = assemble_full_stiffness(space, DISC, params, E=E)
    assert K.shape == (space.n_dofs, space.n_dofs)
    np.testing.assert_allclose(system.K.toarray(), (E.matrix.T @ K @ E.matrix).toarray(), atol=1e-10)


def test_coercivity_threshold():
    """Test that a tiny penalty loses positivity and the default penalty keeps it."""
    space, E = setup(DISC, ElementFamily.lagrange(1), disc_grid())
    integration = CutIntegration(space, DISC)
    weak = assemble_poisson(space, E, DISC, FormParams(beta=0.01), integration=integration)
    strong = assemble_poisson(space, E, DISC, FormParams(beta=100.0), integration=integration)
    assert np.linalg.eigvalsh(weak.K.toarray()).min() < 0.0
    assert np.linalg.eigvalsh(strong.K.toarray()).min() > 0.0


def test_penalty_powers():
    """Test the h-exponents of the inverse estimates paired with each penalty."""
    params = FormParams()
    assert poisson_terms(params, 0.1).penalty_power('value') == 1
    biharmonic = biharmonic_terms(params, 0.1)
    assert [biharmonic.penalty_power(t) for t in ('dn', 'value')] == [1, 3]
    triharmonic = triharmonic_terms(params, 0.1)
    assert [triharmonic.penalty_power(t) for t in ('lap', 'dn', 'value')] == [1, 3, 5]
    assert triharmonic.flux_for('value') == 'dn_bilap'
    with pytest.raises(FormError):
        biharmonic.penalty_power('lap')


def test_penalty_multipliers():
    """Test that local multipliers never lower a penalty and can be switched off."""
    space, E = setup(DISC, ElementFamily.hermite(3), disc_grid())
    integration = CutIntegration(space, DISC)
    terms = biharmonic_terms(FormParams(), space.cell_size)
    assert terms.local_scaling
    scaling = integration.penalty_scaling(terms, E)
    assert integration.penalty_scaling(terms, E) is scaling
    assert set(scaling.factors) <= set(int(p) for p in integration.cut_positions)
    values = [v for cell in scaling.factors.values() for v in cell.values()]
    assert values and all(np.isfinite(v) and v >= 1.0 for v in values)
    assert scaling.factor(int(integration.uncut_positions[0]), 'value') == 1.0

    scaled = assemble_biharmonic(space, E, DISC, FormParams(), integration=integration)
    plain = assemble_biharmonic(space, E, DISC, FormParams(local_penalty=False), integration=integration)
    difference = (scaled.K - plain.K).toarray()
    # multipliers only add penalty mass
    assert np.linalg.eigvalsh(difference).min() > -1e-8 * np.abs(plain.K).max()


def test_integrated_measure():
    """Test that the cut rules integrate the disc area."""
    space, _ = setup(DISC, ElementFamily.lagrange(2), disc_grid())
    integration = CutIntegration(space, DISC)
    assert integration.measure() == pytest.approx(DISC.area(), abs=1e-8)
    assert DISC.area() == pytest.approx(math.pi / 4)


def test_biharmonic_patch_on_box():
    """Test that u = xy is reproduced by the clamped plate form."""
    space, E = setup(BOX, ElementFamily.hermite(3), box_grid())
    u = Field(X * Y)
    system = assemble_biharmonic(space, E, BOX, FormParams(beta=100.0, gamma=1.0), f=0.0, g=u)
    assert is_symmetric(system.K)
    u_h = solve_full(system)
    assert np.max(np.abs(u_h - space.interpolate(u))) < 1e-9


def test_biharmonic_patch_with_curvature():
    """Test a cubic solution with a nonzero Laplacian."""
    space, E = setup(BOX, ElementFamily.hermite(3), box_grid())
    u = Field(X**2 * Y + Y**3)
    f = u.laplacian().laplacian()
    system = assemble_biharmonic(space, E, BOX, FormParams(beta=100.0), f=f, g=u)
    u_h = solve_full(system)
    assert np.max(np.abs(u_h - space.interpolate(u))) < 1e-8


def test_triharmonic_patch_on_box():
    """Test that u = x^3 is reproduced by the triharmonic form."""
    space, E = setup(BOX, ElementFamily.hermite(5), box_grid())
    u = Field(X**3)
    system = assemble_triharmonic(space, E, BOX, FormParams(beta=100.0), f=0.0, g=u)
    assert is_symmetric(system.K)
    u_h = solve_full(system)
    assert np.max(np.abs(u_h - space.interpolate(u))) < 1e-7


def test_continuity_requirements():
    """Test that higher-order forms reject elements that are not smooth enough."""
    space, E = setup(BOX, ElementFamily.lagrange(2), box_grid())
    with pytest.raises(FormError, match="C1"):
        assemble_biharmonic(space, E, BOX, FormParams())
    space, E = setup(BOX, ElementFamily.hermite(3), box_grid())
    with pytest.raises(FormError, match="C2"):
        assemble_triharmonic(space, E, BOX, FormParams())


def test_extension_must_match_space():
    """Test that an extension built for another space is rejected."""
    space, _ = setup(DISC, ElementFamily.lagrange(1), disc_grid())
    _, other = setup(DISC, ElementFamily.lagrange(2), disc_grid())
    with pytest.raises(FormError):
        assemble_poisson(space, other, DISC, FormParams())
    with pytest.raises(FormError):
        assemble_poisson(space, build_extension(space, build_sh_map(space.active)), DISC, FormParams(),
                         integration=CutIntegration(FESpace.build(space.active, space.family), DISC))


def test_mass_matrix_integrates_area():
    """Test 1^T M 1 = |Omega| for the reduced mass matrix."""
    space, E = setup(DISC, ElementFamily.lagrange(2), disc_grid())
    M = assemble_mass(space, E, DISC)
    ones = np.ones(E.n_reduced)
    assert float(ones @ (M @ ones)) == pytest.approx(math.pi / 4, abs=1e-10)
    assert is_symmetric(M)
    assert np.linalg.eigvalsh(M.toarray()).min() > 0.0


def test_mass_matrix_moments():
    """Test second moments of a box with the Hermite mass matrix."""
    space, E = setup(BOX, ElementFamily.hermite(3), box_grid())
    M = assemble_mass(space, E, BOX)
    x = space.interpolate(Field(X))[E.interior_dofs]
    y = space.interpolate(Field(Y))[E.interior_dofs]
    assert float(x @ (M @ x)) == pytest.approx((0.87**3 - 0.13**3) / 3 * 0.64, rel=1e-12)
    assert float(x @ (M @ y)) == pytest.approx((0.87**2 - 0.13**2) / 2 * (0.81**2 - 0.17**2) / 2, rel=1e-12)


def interface_setup():
    grid = BackgroundGrid((0.0, 0.0), 5, 5, 0.2)
    left = LevelSetDomain.half_plane((1.0, 0.0), 0.5)
    right = left.complement()
    family = ElementFamily.lagrange(1)
    spaces, extensions = [], []
    for domain in (left, right):
        space, E = setup(domain, family, grid)
        spaces.append(space)
        extensions.append(E)
    return spaces, extensions, (left, right)


def test_interface_planar_patch():
    """Test a flux-matched piecewise linear solution across x = 0.5."""
    spaces, extensions, domains = interface_setup()
    params = FormParams(beta=10.0, A1=5.0 * np.eye(2), A2=2.0 * np.eye(2))
    u1 = Field(2 * X)
    u2 = Field(5 * X - sympy.Rational(3, 2))
    system = assemble_interface(spaces, extensions, domains, params, f=0.0, g=[u1, u2])
    assert system.offsets == (0, spaces[0].n_dofs)
    assert is_symmetric(system.K)
    full = solve_full(system)
    first, second = system.split(full)
    assert np.max(np.abs(first - spaces[0].interpolate(u1))) < 1e-9
    assert np.max(np.abs(second - spaces[1].interpolate(u2))) < 1e-9


def test_interface_weights():
    """Test area weights on cells cut through the middle."""
    spaces, _, domains = interface_setup()
    integration = CutIntegration(spaces[0], domains[0])
    weights = interface_weights(integration, FormParams())
    assert len(weights) == 5
    for k1, k2 in weights.values():
        assert k1 == pytest.approx(0.5)
        assert k1 + k2 == pytest.approx(1.0)
    fixed = interface_weights(integration, FormParams(kappa=0.3))
    assert all(k == pytest.approx((0.3, 0.7)) for k in fixed.values())


def test_boundary_dofs_and_dirichlet():
    """Test detection of outer boundary DOFs and symmetric elimination."""
    grid = BackgroundGrid((0.0, 0.0), 2, 2, 0.5)
    space, _ = setup(LevelSetDomain.half_plane((1.0, 0.0), 10.0), ElementFamily.lagrange(1), grid)
    dofs = boundary_dofs(space, np.arange(space.n_dofs))
    assert len(dofs) == 8
    np.testing.assert_array_equal(np.setdiff1d(np.arange(9), dofs), [4])
    hermite, _ = setup(LevelSetDomain.half_plane((1.0, 0.0), 10.0), ElementFamily.hermite(3), grid)
    # value and tangential derivative on edge nodes, value and both first derivatives at corners
    assert len(boundary_dofs(hermite, np.arange(hermite.n_dofs))) == 4 * 2 + 4 * 3

    K = sparse.csr_matrix(np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]))
    K2, b2 = apply_dirichlet(K, np.zeros(3), np.array([0, 2]), np.array([1.0, 3.0]))
    assert is_symmetric(K2)
    np.testing.assert_allclose(np.linalg.solve(K2.toarray(), b2), [1.0, 2.0, 3.0])
