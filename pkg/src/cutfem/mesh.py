"""
Mesh for cutfem

Uniform background grid, the active mesh of cells meeting the domain with
its interior/cut split, and the S_h map sending every cut cell to an
interior donor cell (macro elements are the fibres of that map).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Dict, List, Optional, Tuple

import numpy as np

from .geometry import Cell, CellClass, LevelSetDomain, classify_cell, volume_quadrature

logger = logging.getLogger(__name__)


class MeshError(ValueError):
    """Raised when a grid or active mesh cannot be built."""
    pass


class ElementClass(Enum):
    """Role of an active cell in the extension."""
    INTERIOR = auto()
    CUT = auto()


@dataclass(frozen=True)
class BackgroundGrid:
    """nx x ny uniform square cells starting at origin."""
    origin: Tuple[float, float]
    nx: int
    ny: int
    cell_size: float

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise MeshError(f"Grid needs at least one cell per direction, got {self.nx} x {self.ny}")
        if not self.cell_size > 0.0:
            raise MeshError(f"Cell size must be positive, got {self.cell_size}")

    @classmethod
    def covering(cls, lo: Tuple[float, float], hi: Tuple[float, float], cell_size: float) -> 'BackgroundGrid':
        """Smallest grid with the given cell size starting at lo and reaching hi."""
        nx = max(1, int(math.ceil((hi[0] - lo[0]) / cell_size - 1e-9)))
        ny = max(1, int(math.ceil((hi[1] - lo[1]) / cell_size - 1e-9)))
        return cls((float(lo[0]), float(lo[1])), nx, ny, float(cell_size))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def bounds(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        x0, y0 = self.origin
        return (x0, y0), (x0 + self.nx * self.cell_size, y0 + self.ny * self.cell_size)

    def cell_ij(self, index) -> Tuple[np.ndarray, np.ndarray]:
        index = np.asarray(index)
        return index % self.nx, index // self.nx

    def cell(self, index: int) -> Cell:
        i, j = self.cell_ij(index)
        return Cell(self.origin[0] + int(i) * self.cell_size,
                    self.origin[1] + int(j) * self.cell_size,
                    self.cell_size)

    def centroids(self, index) -> np.ndarray:
        i, j = self.cell_ij(index)
        return np.column_stack([self.origin[0] + (i + 0.5) * self.cell_size,
                                self.origin[1] + (j + 0.5) * self.cell_size])

    def corner_vertices(self, index) -> np.ndarray:
        """Global vertex numbers of the four corners of each cell."""
        i, j = self.cell_ij(np.atleast_1d(index))
        stride = self.nx + 1
        return np.column_stack([j * stride + i, j * stride + i + 1,
                                (j + 1) * stride + i + 1, (j + 1) * stride + i])


@dataclass
class ActiveMesh:
    """Cells of the background grid meeting the domain.

    interior marks cells used as extension donors; cut marks cells whose
    integrals need cut quadrature. They differ only when a large-intersection
    threshold promotes cut cells to donors.
    """
    grid: BackgroundGrid
    domain: LevelSetDomain
    active_cells: np.ndarray
    interior: np.ndarray
    cut: np.ndarray
    h: float
    nno: int
    large_threshold: float = 0.0
    _positions: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_active(self) -> int:
        return len(self.active_cells)

    @property
    def cell_class(self) -> List[ElementClass]:
        return [ElementClass.INTERIOR if flag else ElementClass.CUT for flag in self.interior]

    @property
    def interior_positions(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @property
    def band_positions(self) -> np.ndarray:
        return np.flatnonzero(~self.interior)

    def cell(self, position: int) -> Cell:
        return self.grid.cell(int(self.active_cells[position]))

    def cell_origins(self, positions=None) -> np.ndarray:
        cells = self.active_cells if positions is None else self.active_cells[positions]
        i, j = self.grid.cell_ij(cells)
        return np.column_stack([self.grid.origin[0] + i * self.grid.cell_size,
                                self.grid.origin[1] + j * self.grid.cell_size])

    def position(self, cell_index: int) -> int:
        """Active position of a background cell, -1 when it is not active."""
        if self._positions is None:
            positions = np.full(self.grid.n_cells, -1, dtype=np.int64)
            positions[self.active_cells] = np.arange(self.n_active)
            self._positions = positions
        return int(self._positions[cell_index])


def build_active_mesh(grid: BackgroundGrid, domain: LevelSetDomain,
                      large_threshold: float = 0.0, depth: int = 4) -> ActiveMesh:
    """Extract the cells meeting the domain and classify them."""
    if large_threshold < 0.0:
        raise MeshError(f"Large-intersection threshold must be non-negative, got {large_threshold}")

    box = domain.bounding_box()
    if box is not None:
        (lo_x, lo_y), (hi_x, hi_y) = grid.bounds()
        (dx0, dy0), (dx1, dy1) = box
        if dx0 < lo_x or dy0 < lo_y or dx1 > hi_x or dy1 > hi_y:
            raise MeshError(f"Domain {box} is not covered by the grid {grid.bounds()}")

    active = []
    interior = []
    cut = []
    threshold_area = large_threshold * grid.cell_size ** 2
    for index in range(grid.n_cells):
        status = classify_cell(grid.cell(index), domain)
        if status == CellClass.OUTSIDE:
            continue
        active.append(index)
        is_cut = status == CellClass.CUT
        cut.append(is_cut)
        if not is_cut:
            interior.append(True)
        elif large_threshold > 0.0:
            area = volume_quadrature(grid.cell(index), domain, 2, depth).total_weight()
            interior.append(area >= threshold_area)
        else:
            interior.append(False)

    if not active:
        raise MeshError("domain does not meet grid")

    active_cells = np.asarray(active, dtype=np.int64)
    nno = len(np.unique(grid.corner_vertices(active_cells)))
    mesh = ActiveMesh(
        grid=grid,
        domain=domain,
        active_cells=active_cells,
        interior=np.asarray(interior, dtype=bool),
        cut=np.asarray(cut, dtype=bool),
        h=1.0 / math.sqrt(nno),
        nno=nno,
        large_threshold=large_threshold,
    )
    logger.debug("active mesh: %d cells (%d interior, %d cut), nno=%d",
                 mesh.n_active, int(mesh.interior.sum()), int(mesh.cut.sum()), nno)
    return mesh


@dataclass
class ShMap:
    """Donor map S_h on active positions and its macro-element partition."""
    target: np.ndarray
    macro_elements: Dict[int, List[int]]
    diameters: Dict[int, float]
    max_diameter_ratio: float

    def macro_of(self, position: int) -> List[int]:
        return self.macro_elements[int(self.target[position])]


def build_sh_map(active: ActiveMesh) -> ShMap:
    """Send each cut cell to the interior cell with the nearest centroid.

    Distances are compared in whole grid steps, so ties are exact and go to
    the lowest cell index.
    """
    donors = active.interior_positions
    if len(donors) == 0:
        raise MeshError("mesh too coarse for extension")

    grid = active.grid
    target = np.arange(active.n_active, dtype=np.int64)
    di, dj = grid.cell_ij(active.active_cells[donors])
    band = active.band_positions
    chunk = 256
    for start in range(0, len(band), chunk):
        part = band[start:start + chunk]
        bi, bj = grid.cell_ij(active.active_cells[part])
        dist2 = (bi[:, None] - di[None, :]) ** 2 + (bj[:, None] - dj[None, :]) ** 2
        target[part] = donors[np.argmin(dist2, axis=1)]

    macro_elements: Dict[int, List[int]] = {}
    for position, donor in enumerate(target):
        macro_elements.setdefault(int(donor), []).append(position)

    diameters = {}
    for donor, members in macro_elements.items():
        if len(members) == 1:
            diameters[donor] = math.sqrt(2.0) * grid.cell_size
            continue
        corners = np.vstack([active.cell(p).corners() for p in members])
        diff = corners[:, None, :] - corners[None, :, :]
        diameters[donor] = float(np.sqrt((diff ** 2).sum(axis=2)).max())

    ratio = max(diameters.values()) / grid.cell_size
    logger.debug("S_h map: %d macro elements, max diameter / cell size = %.3f",
                 len(macro_elements), ratio)
    return ShMap(target=target, macro_elements=macro_elements, diameters=diameters,
                 max_diameter_ratio=ratio)
