"""
Tests for cutfem finite element spaces
"""

import numpy as np
import pytest
from src.cutfem.femspace import (
    ElementFamily, ElementKind, FESpace, SpaceError, evaluate_shape, reference_basis,
)
from src.cutfem.fields import Field
from src.cutfem.geometry import LevelSetDomain
from src.cutfem.mesh import BackgroundGrid, build_active_mesh

FAMILIES = [ElementFamily.lagrange(1), ElementFamily.lagrange(2),
            ElementFamily.hermite(1), ElementFamily.hermite(3), ElementFamily.hermite(5)]


def full_space(family, n=3, size=0.5, origin=(-0.25, 0.1)):
    grid = BackgroundGrid(origin, n, n, size)
    active = build_active_mesh(grid, LevelSetDomain.half_plane((1.0, 0.0), 100.0))
    return FESpace.build(active, family)


def random_points(space, position, rng, count=7):
    cell = space.active.cell(position)
    return np.array([cell.x0, cell.y0]) + cell.size * rng.random((count, 2))


def test_family_names():
    """Test family construction and naming."""
    assert ElementFamily.from_name('Q2') == ElementFamily.lagrange(2)
    assert ElementFamily.from_name('h5').kind == ElementKind.HERMITE
    assert ElementFamily.hermite(3).name == 'H3'
    assert ElementFamily.hermite(5).continuity == 2
    assert ElementFamily.hermite(3).continuity == 1
    assert ElementFamily.lagrange(2).continuity == 0
    assert ElementFamily.hermite(5).dofs_per_cell == 36


def test_unsupported_families():
    """Test that unsupported degrees and names are rejected."""
    with pytest.raises(SpaceError):
        ElementFamily.lagrange(3)
    with pytest.raises(SpaceError):
        ElementFamily.hermite(2)
    with pytest.raises(SpaceError):
        ElementFamily.from_name('P2')
    with pytest.raises(SpaceError):
        ElementFamily.from_name('Q')


@pytest.mark.parametrize('family', FAMILIES, ids=lambda f: f.name)
def test_kronecker_property(family):
    """Test that the dual functionals applied to the basis give the identity."""
    basis = reference_basis(family)
    np.testing.assert_allclose(basis.kronecker(), np.eye(family.degree + 1), atol=1e-10)


def test_reference_nodes_hermite():
    """Test the generalized nodes of the cubic Hermite element."""
    nodes = reference_basis(ElementFamily.hermite(3)).reference_nodes()
    assert len(nodes) == 16
    assert {node.alpha for node in nodes} == {(0, 0), (1, 0), (0, 1), (1, 1)}
    assert {node.xi for node in nodes} == {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)}


def test_evaluate_shape():
    """Test nodal values of reference shape functions."""
    q1 = ElementFamily.lagrange(1)
    assert evaluate_shape(q1, 0, (0.0, 0.0)) == pytest.approx(1.0)
    assert evaluate_shape(q1, 0, (1.0, 0.0)) == pytest.approx(0.0)
    assert evaluate_shape(q1, 3, (0.5, 0.5)) == pytest.approx(0.25)
    assert evaluate_shape(q1, 1, (0.3, 0.2), (1, 0)) == pytest.approx(0.8)
    with pytest.raises(SpaceError):
        evaluate_shape(q1, 4, (0.0, 0.0))
    with pytest.raises(SpaceError):
        evaluate_shape(q1, 0, (0.0, 0.0), (-1, 0))


@pytest.mark.parametrize('family, expected', [
    (ElementFamily.lagrange(1), 16),
    (ElementFamily.lagrange(2), 49),
    (ElementFamily.hermite(3), 64),
    (ElementFamily.hermite(5), 144),
], ids=lambda v: getattr(v, 'name', str(v)))
def test_dof_counts(family, expected):
    """Test global DOF counts on a 3 x 3 grid."""
    space = full_space(family)
    assert space.n_dofs == expected
    assert len(space.dofmap.interior_dofs) == expected
    assert len(space.dofmap.band_dofs) == 0


def test_lagrange_partition_of_unity():
    """Test that Q2 shape functions sum to one with vanishing gradient."""
    space = full_space(ElementFamily.lagrange(2))
    points = random_points(space, 4, np.random.default_rng(1))
    tables = space.tabulate(4, points, [(0, 0), (1, 0), (0, 1)])
    np.testing.assert_allclose(tables[(0, 0)].sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(tables[(1, 0)].sum(axis=1), 0.0, atol=1e-11)
    np.testing.assert_allclose(tables[(0, 1)].sum(axis=1), 0.0, atol=1e-11)


@pytest.mark.parametrize('family', FAMILIES, ids=lambda f: f.name)
def test_interpolation_reproduces_polynomials(family):
    """Test that the interpolant of a full tensor polynomial is exact."""
    rng = np.random.default_rng(7)
    k = family.degree
    u = Field.polynomial(rng.standard_normal((k + 1, k + 1)), center=(0.3, 0.4))
    space = full_space(family)
    coefficients = space.interpolate(u)
    for position in range(space.active.n_active):
        points = random_points(space, position, rng)
        for alpha in [(0, 0), (1, 0), (0, 1)]:
            np.testing.assert_allclose(space.evaluate(coefficients, position, points, alpha),
                                       u(points[:, 0], points[:, 1], alpha), rtol=1e-9, atol=1e-9)


def test_derivative_scaling():
    """Test physical scaling of derivatives on small cells."""
    space = full_space(ElementFamily.hermite(3), n=2, size=0.01)
    u = Field.polynomial([[0.0, 0.0], [1.0, 0.0]])
    coefficients = space.interpolate(u)
    points = random_points(space, 0, np.random.default_rng(3))
    np.testing.assert_allclose(space.evaluate(coefficients, 0, points, (1, 0)), 1.0, atol=1e-10)
    np.testing.assert_allclose(space.evaluate(coefficients, 0, points, (2, 0)), 0.0, atol=1e-6)


def test_hermite_dofs_are_h_scaled():
    """Test that derivative DOFs hold h^|alpha| times the derivative."""
    h = 0.01
    space = full_space(ElementFamily.hermite(3), n=2, size=h)
    alpha = space.dofmap.node_alpha
    order = alpha.sum(axis=1)
    np.testing.assert_allclose(space.dof_scales(), h ** order)
    np.testing.assert_allclose(space.dof_scales([0]), h ** order[:1])
    coefficients = space.interpolate(Field.polynomial([[0.0, 0.0], [1.0, 0.0]]))
    dx = (alpha[:, 0] == 1) & (alpha[:, 1] == 0)
    np.testing.assert_allclose(coefficients[dx], h, rtol=1e-12)
    np.testing.assert_allclose(coefficients[alpha[:, 1] > 0], 0.0, atol=1e-15)
    np.testing.assert_allclose(full_space(ElementFamily.lagrange(2)).dof_scales(), 1.0)


@pytest.mark.parametrize('family, order', [
    (ElementFamily.lagrange(2), 0),
    (ElementFamily.hermite(3), 1),
    (ElementFamily.hermite(5), 2),
], ids=lambda v: getattr(v, 'name', str(v)))
def test_continuity_across_edges(family, order):
    """Test that random functions are C^l across the edge of neighbouring cells."""
    space = full_space(family, n=2, size=1.0, origin=(0.0, 0.0))
    rng = np.random.default_rng(11)
    coefficients = rng.standard_normal(space.n_dofs)
    edge = np.column_stack([np.ones(5), rng.random(5)])
    left = space.active.position(0)
    right = space.active.position(1)
    for r in range(order + 1):
        for alpha in [(r, 0), (0, r)]:
            np.testing.assert_allclose(space.evaluate(coefficients, left, edge, alpha),
                                       space.evaluate(coefficients, right, edge, alpha),
                                       atol=1e-10)


def test_shared_dofs():
    """Test that neighbouring cells share the DOFs on their common edge."""
    space = full_space(ElementFamily.lagrange(2), n=2, size=1.0, origin=(0.0, 0.0))
    shared = set(space.cell_dofs(0)) & set(space.cell_dofs(1))
    assert len(shared) == 3
    owners = space.dofmap.cells_of_dof()
    for dof in shared:
        assert list(owners[dof]) == [0, 1]
        assert space.dofmap.node_points[dof][0] == pytest.approx(1.0)


def test_band_dofs_on_cut_mesh():
    """Test that DOFs touched only by cut cells are band DOFs."""
    grid = BackgroundGrid((0.0, 0.0), 3, 1, 1.0)
    active = build_active_mesh(grid, LevelSetDomain.half_plane((1.0, 0.0), 2.5))
    space = FESpace.build(active, ElementFamily.lagrange(1))
    np.testing.assert_allclose(space.dofmap.node_points[space.dofmap.band_dofs][:, 0], [3.0, 3.0])
    assert len(space.dofmap.interior_dofs) == 6


def test_tabulate_rejects_negative_orders():
    """Test evaluation errors."""
    space = full_space(ElementFamily.lagrange(1), n=1)
    with pytest.raises(SpaceError):
        space.tabulate(0, np.zeros((1, 2)), [(0, -1)])
