"""
Tests for cutfem error analysis
"""

import math

import numpy as np
import pytest
from src.cutfem.analysis import (
    AnalysisError, derivative_components, eoc, eoc_table, error_norms, mesh_seminorms,
    stability_ratios,
)
from src.cutfem.extension import build_extension
from src.cutfem.femspace import ElementFamily, FESpace
from src.cutfem.fields import Field, X, Y
from src.cutfem.geometry import LevelSetDomain
from src.cutfem.mesh import BackgroundGrid, build_active_mesh, build_sh_map

DISC = LevelSetDomain.circle((0.0, 0.0), 0.5)


def disc_space(family):
    grid = BackgroundGrid((-0.5863, -0.5929), 8, 8, 0.15)
    active = build_active_mesh(grid, DISC)
    return FESpace.build(active, family)


def test_eoc_examples():
    """Test orders from pairs of (h, error)."""
    assert eoc([0.1, 0.05], [1e-2, 2.5e-3]) == [pytest.approx(2.0)]
    assert eoc([0.1, 0.05], [1e-2, 1e-2]) == [pytest.approx(0.0)]
    h = [0.1, 0.05, 0.025]
    rates = eoc(h, [x**3 for x in h])
    assert rates == [pytest.approx(3.0), pytest.approx(3.0)]
    assert eoc(h, [1e-2, None, 1e-4]) == [None, None]
    assert eoc(h, [1e-2, 0.0, 1e-4]) == [None, None]


def test_eoc_table():
    """Test per-column orders and input checks."""
    table = eoc_table([(0.2, 4e-2, 0.2), (0.1, 1e-2, 0.1), (0.05, 2.5e-3, 0.05)])
    assert table[0] == [pytest.approx(2.0), pytest.approx(2.0)]
    assert table[1] == [pytest.approx(1.0), pytest.approx(1.0)]
    with pytest.raises(AnalysisError, match="need >= 2 levels"):
        eoc_table([(0.1, 1e-2)])
    with pytest.raises(AnalysisError):
        eoc_table([(0.1, 1e-2), (0.1, 1e-3)])


def test_derivative_components():
    """Test binomial weights of the j-th derivative tensor."""
    weights = derivative_components(2)
    assert [list(t) for t in weights] == [[(2, 0)], [(1, 1)], [(0, 2)]]
    assert [list(t.values())[0] for t in weights] == [1.0, pytest.approx(math.sqrt(2.0)), 1.0]


def test_norms_of_constant_error():
    """Test u_h = 0 against the constant one."""
    space = disc_space(ElementFamily.lagrange(1))
    norms = error_norms(np.zeros(space.n_dofs), Field.constant(1.0), space, DISC)
    assert norms.l2 == pytest.approx(math.sqrt(math.pi / 4), rel=1e-9)
    assert norms.h1_semi == pytest.approx(0.0, abs=1e-14)
    assert norms.h2_semi is None
    assert norms.energy is None
    assert norms.energy_squared is None


def test_norms_of_linear_error():
    """Test u_h = 0 against u = x, with the energy norm of a scaled Laplacian."""
    space = disc_space(ElementFamily.lagrange(2))
    norms = error_norms(np.zeros(space.n_dofs), Field(X), space, DISC,
                        energy='grad', coefficient=5.0 * np.eye(2))
    assert norms.l2 == pytest.approx(math.sqrt(math.pi * 0.5**4 / 4), rel=1e-9)
    assert norms.h1_semi == pytest.approx(math.sqrt(math.pi / 4), rel=1e-9)
    assert norms.energy == pytest.approx(math.sqrt(5.0 * math.pi / 4), rel=1e-9)
    assert norms.energy_squared == pytest.approx(5.0 * math.pi / 4, rel=1e-9)
    assert set(norms.as_dict()) == {'l2', 'h1', 'h2', 'energy'}


def test_interpolant_has_no_error():
    """Test that interpolating a polynomial in the space gives zero error."""
    space = disc_space(ElementFamily.hermite(3))
    u = Field(X**3 * Y - 2 * X * Y**2 + 1)
    norms = error_norms(space.interpolate(u), u, space, DISC, energy='lap')
    assert norms.l2 < 1e-12
    assert norms.h1_semi < 1e-11
    assert norms.h2_semi is not None and norms.h2_semi < 1e-10
    assert norms.energy < 1e-10


def test_error_norm_errors():
    """Test invalid arguments."""
    space = disc_space(ElementFamily.lagrange(1))
    with pytest.raises(AnalysisError):
        error_norms(np.zeros(space.n_dofs), 1.0, space, DISC)
    with pytest.raises(AnalysisError):
        error_norms(np.zeros(space.n_dofs + 1), Field(X), space, DISC)


def test_mesh_seminorms_whole_cells():
    """Test seminorms of x over a block of whole cells."""
    grid = BackgroundGrid((0.0, 0.0), 4, 4, 0.25)
    active = build_active_mesh(grid, LevelSetDomain.half_plane((1.0, 0.0), 10.0))
    space = FESpace.build(active, ElementFamily.lagrange(1))
    values = mesh_seminorms(space.interpolate(Field(X)), space, np.arange(16), 2)
    np.testing.assert_allclose(values, [math.sqrt(1.0 / 3.0), 1.0, 0.0], atol=1e-13)


def test_stability_ratios():
    """Test that extended functions are at least as large on the active mesh."""
    space = disc_space(ElementFamily.lagrange(2))
    E = build_extension(space, build_sh_map(space.active))
    ratios = stability_ratios(space, E, samples=5, seed=1)
    assert ratios.shape == (5, 2)
    assert np.all(ratios >= 1.0 - 1e-12)
    assert np.all(np.isfinite(ratios))
