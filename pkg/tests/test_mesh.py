"""
Tests for cutfem active meshes and the S_h map
"""

import math

import numpy as np
import pytest
from src.cutfem.geometry import LevelSetDomain
from src.cutfem.mesh import BackgroundGrid, ElementClass, MeshError, build_active_mesh, build_sh_map


@pytest.fixture
def unit_grid():
    return BackgroundGrid((0.0, 0.0), 4, 4, 0.25)


def test_grid_geometry(unit_grid):
    """Test cell lookup on the background grid."""
    assert unit_grid.n_cells == 16
    assert unit_grid.bounds() == ((0.0, 0.0), (1.0, 1.0))
    cell = unit_grid.cell(6)
    assert (cell.x0, cell.y0, cell.size) == (0.5, 0.25, 0.25)
    np.testing.assert_allclose(unit_grid.centroids([6]), [[0.625, 0.375]])
    np.testing.assert_array_equal(unit_grid.corner_vertices(6), [[7, 8, 13, 12]])


def test_grid_covering():
    """Test the smallest covering grid."""
    grid = BackgroundGrid.covering((0.0, 0.0), (1.0, 0.5), 0.3)
    assert (grid.nx, grid.ny) == (4, 2)
    grid = BackgroundGrid.covering((0.0, 0.0), (1.0, 1.0), 0.25)
    assert (grid.nx, grid.ny) == (4, 4)


def test_grid_errors():
    """Test invalid grids."""
    with pytest.raises(MeshError):
        BackgroundGrid((0.0, 0.0), 0, 4, 0.25)
    with pytest.raises(MeshError):
        BackgroundGrid((0.0, 0.0), 4, 4, 0.0)


def test_active_mesh_disc(unit_grid):
    """Test classification of a disc on a 4 x 4 grid."""
    active = build_active_mesh(unit_grid, LevelSetDomain.circle((0.5, 0.5), 0.45))
    assert active.n_active == 16
    np.testing.assert_array_equal(active.active_cells[active.interior], [5, 6, 9, 10])
    assert active.cut.sum() == 12
    assert active.nno == 25
    assert active.h == pytest.approx(0.2)
    assert active.cell_class[5] == ElementClass.INTERIOR
    assert active.cell_class[0] == ElementClass.CUT


def test_active_mesh_drops_outside_cells(unit_grid):
    """Test that corner cells missing the disc are inactive."""
    active = build_active_mesh(unit_grid, LevelSetDomain.circle((0.5, 0.5), 0.3))
    assert active.n_active == 12
    assert active.position(0) == -1
    assert active.position(1) == 0
    assert active.nno == 21
    assert active.h == pytest.approx(1.0 / math.sqrt(21))
    assert not active.interior.any()


def test_all_interior(unit_grid):
    """Test a domain containing the whole grid."""
    active = build_active_mesh(unit_grid, LevelSetDomain.half_plane((1.0, 0.0), 10.0))
    assert active.n_active == 16
    assert active.interior.all()
    sh = build_sh_map(active)
    np.testing.assert_array_equal(sh.target, np.arange(16))
    assert sh.max_diameter_ratio == pytest.approx(math.sqrt(2.0))


def test_sh_map_nearest_interior(unit_grid):
    """Test that every cut cell is sent to the nearest interior cell."""
    active = build_active_mesh(unit_grid, LevelSetDomain.circle((0.5, 0.5), 0.45))
    sh = build_sh_map(active)
    expected = {0: 5, 1: 5, 4: 5, 2: 6, 3: 6, 7: 6, 8: 9, 12: 9, 13: 9, 11: 10, 14: 10, 15: 10}
    for cell, donor in expected.items():
        assert sh.target[active.position(cell)] == active.position(donor)
    for donor in (5, 6, 9, 10):
        assert sh.target[active.position(donor)] == active.position(donor)
    assert sorted(sh.macro_of(active.position(0))) == [0, 1, 4, 5]
    assert sh.max_diameter_ratio == pytest.approx(2.0 * math.sqrt(2.0))


def test_sh_map_ties_go_to_lowest_index():
    """Test equidistant donors."""
    grid = BackgroundGrid((0.0, 0.0), 3, 1, 1.0)
    hole = LevelSetDomain.circle((1.5, 0.5), 0.3).complement()
    active = build_active_mesh(grid, hole)
    # cells 0 and 2 are interior, the middle one is cut
    sh = build_sh_map(active)
    assert list(sh.target) == [0, 0, 2]


def test_large_threshold(unit_grid):
    """Test that large cut cells become donors while staying cut."""
    disc = LevelSetDomain.circle((0.5, 0.5), 0.45)
    active = build_active_mesh(unit_grid, disc, large_threshold=0.5)
    assert active.interior.sum() > 4
    assert active.cut.sum() == 12
    assert active.interior[active.position(1)]
    assert not active.interior[active.position(0)]


def test_errors(unit_grid):
    """Test mesh construction errors."""
    with pytest.raises(MeshError, match="not covered"):
        build_active_mesh(unit_grid, LevelSetDomain.circle((0.0, 0.0), 1.0))
    with pytest.raises(MeshError, match="does not meet"):
        build_active_mesh(unit_grid, LevelSetDomain.half_plane((1.0, 0.0), -5.0))
    with pytest.raises(MeshError):
        build_active_mesh(unit_grid, LevelSetDomain.circle((0.5, 0.5), 0.45), large_threshold=-0.1)
    with pytest.raises(MeshError, match="too coarse"):
        build_sh_map(build_active_mesh(unit_grid, LevelSetDomain.circle((0.5, 0.5), 0.3)))
