"""
Geometry for cutfem

Analytic level-set domains (circle, axis-aligned box, half-plane), exact
cell classification, and quadrature on cut cells and on the embedded boundary.
Sign convention: the level-set value is negative inside the domain.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum, auto
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

MAX_GAUSS_ORDER = 10

Point = Tuple[float, float]


class GeometryError(ValueError):
    """Raised for invalid shapes or unsupported quadrature requests."""
    pass


class ShapeKind(Enum):
    """Analytic shapes with exact boundary parametrizations."""
    CIRCLE = auto()
    AXIS_BOX = auto()
    HALF_PLANE = auto()


class CellClass(Enum):
    """Position of a closed cell relative to the domain."""
    INSIDE = auto()
    OUTSIDE = auto()
    CUT = auto()


@dataclass(frozen=True)
class Cell:
    """Axis-aligned square [x0, x0 + size] x [y0, y0 + size]."""
    x0: float
    y0: float
    size: float

    def __post_init__(self):
        if not self.size > 0.0:
            raise GeometryError(f"Cell side length must be positive, got {self.size}")

    @property
    def x1(self) -> float:
        return self.x0 + self.size

    @property
    def y1(self) -> float:
        return self.y0 + self.size

    @property
    def center(self) -> Point:
        return (self.x0 + 0.5 * self.size, self.y0 + 0.5 * self.size)

    def corners(self) -> np.ndarray:
        """Corners in counterclockwise order starting at (x0, y0)."""
        return np.array([
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x1, self.y1],
            [self.x0, self.y1],
        ])

    def children(self) -> List['Cell']:
        half = 0.5 * self.size
        return [
            Cell(self.x0, self.y0, half),
            Cell(self.x0 + half, self.y0, half),
            Cell(self.x0, self.y0 + half, half),
            Cell(self.x0 + half, self.y0 + half, half),
        ]


@dataclass(frozen=True)
class LevelSetDomain:
    """Implicit domain {phi < 0} for one analytic shape.

    Build instances with circle(), axis_box() or half_plane(); complement()
    flips inside and outside where the result is still an analytic shape.
    """
    kind: ShapeKind
    center: Point = (0.0, 0.0)
    radius: float = 0.0
    lo: Point = (0.0, 0.0)
    hi: Point = (0.0, 0.0)
    normal: Point = (1.0, 0.0)
    offset: float = 0.0
    inverted: bool = False

    @classmethod
    def circle(cls, center: Point, radius: float) -> 'LevelSetDomain':
        if not radius > 0.0:
            raise GeometryError(f"Circle radius must be positive, got {radius}")
        return cls(ShapeKind.CIRCLE, center=(float(center[0]), float(center[1])), radius=float(radius))

    @classmethod
    def axis_box(cls, lo: Point, hi: Point) -> 'LevelSetDomain':
        if not (hi[0] > lo[0] and hi[1] > lo[1]):
            raise GeometryError(f"Empty box {lo} .. {hi}")
        return cls(ShapeKind.AXIS_BOX, lo=(float(lo[0]), float(lo[1])), hi=(float(hi[0]), float(hi[1])))

    @classmethod
    def half_plane(cls, normal: Point, offset: float) -> 'LevelSetDomain':
        """Domain {p : normal . p < offset}."""
        length = math.hypot(normal[0], normal[1])
        if not length > 0.0:
            raise GeometryError("Half-plane normal must be nonzero")
        n = (normal[0] / length, normal[1] / length)
        return cls(ShapeKind.HALF_PLANE, normal=n, offset=float(offset) / length)

    def complement(self) -> 'LevelSetDomain':
        if self.kind == ShapeKind.CIRCLE:
            return LevelSetDomain(ShapeKind.CIRCLE, center=self.center, radius=self.radius,
                                  inverted=not self.inverted)
        if self.kind == ShapeKind.HALF_PLANE:
            return LevelSetDomain(ShapeKind.HALF_PLANE, normal=(-self.normal[0], -self.normal[1]),
                                  offset=-self.offset)
        raise GeometryError("The complement of a box is not supported")

    @property
    def is_polygonal(self) -> bool:
        """True when cut cells are clipped exactly by straight lines."""
        return self.kind in (ShapeKind.AXIS_BOX, ShapeKind.HALF_PLANE)

    def bounding_box(self) -> Optional[Tuple[Point, Point]]:
        """Bounding box of the domain, None when it is unbounded."""
        if self.kind == ShapeKind.CIRCLE and not self.inverted:
            cx, cy = self.center
            r = self.radius
            return (cx - r, cy - r), (cx + r, cy + r)
        if self.kind == ShapeKind.AXIS_BOX:
            return self.lo, self.hi
        return None

    def area(self) -> Optional[float]:
        if self.kind == ShapeKind.CIRCLE and not self.inverted:
            return math.pi * self.radius ** 2
        if self.kind == ShapeKind.AXIS_BOX:
            return (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
        return None

    def value(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == ShapeKind.CIRCLE:
            phi = np.hypot(x - self.center[0], y - self.center[1]) - self.radius
            return -phi if self.inverted else phi
        if self.kind == ShapeKind.HALF_PLANE:
            return self.normal[0] * x + self.normal[1] * y - self.offset
        faces = np.stack(np.broadcast_arrays(self.lo[0] - x, x - self.hi[0], self.lo[1] - y, y - self.hi[1]))
        return faces.max(axis=0)

    def gradient(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self.kind == ShapeKind.CIRCLE:
            dx = x - self.center[0]
            dy = y - self.center[1]
            r = np.hypot(dx, dy)
            safe = np.where(r > 0.0, r, 1.0)
            sign = -1.0 if self.inverted else 1.0
            return sign * np.where(r > 0.0, dx / safe, 0.0), sign * np.where(r > 0.0, dy / safe, 0.0)
        if self.kind == ShapeKind.HALF_PLANE:
            return np.full(x.shape, self.normal[0]), np.full(x.shape, self.normal[1])
        faces = np.stack([self.lo[0] - x, x - self.hi[0], self.lo[1] - y, y - self.hi[1]])
        active = faces.argmax(axis=0)
        gx = np.choose(active, [-1.0, 1.0, 0.0, 0.0])
        gy = np.choose(active, [0.0, 0.0, -1.0, 1.0])
        return gx.astype(float), gy.astype(float)

    def _constraints(self) -> List[Tuple[Callable, Callable]]:
        """Sequence of (value, edge root) pairs whose intersection is the domain."""
        if self.kind == ShapeKind.CIRCLE:
            return [(lambda p: float(self.value(p[0], p[1])), self._circle_root)]
        if self.kind == ShapeKind.HALF_PLANE:
            return [_line_constraint(self.normal, self.offset)]
        return [
            _line_constraint((-1.0, 0.0), -self.lo[0]),
            _line_constraint((1.0, 0.0), self.hi[0]),
            _line_constraint((0.0, -1.0), -self.lo[1]),
            _line_constraint((0.0, 1.0), self.hi[1]),
        ]

    def _circle_root(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Exact intersection of the segment pq with the circle."""
        d = q - p
        f = p - np.asarray(self.center)
        a = float(d @ d)
        b = 2.0 * float(f @ d)
        c = float(f @ f) - self.radius ** 2
        disc = max(b * b - 4.0 * a * c, 0.0)
        sq = math.sqrt(disc)
        roots = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]
        inside = [s for s in roots if -1e-12 <= s <= 1.0 + 1e-12]
        s = min(max(inside[0] if inside else roots[0], 0.0), 1.0)
        return p + s * d


def _line_constraint(normal: Point, offset: float) -> Tuple[Callable, Callable]:
    n = np.asarray(normal, dtype=float)

    def value(p):
        return float(n @ p - offset)

    def root(p, q):
        vp = value(p)
        vq = value(q)
        return p + (vp / (vp - vq)) * (q - p)

    return value, root


@dataclass
class QuadratureRule:
    """Points and weights of a volume or surface rule (normals for surface rules)."""
    points: np.ndarray
    weights: np.ndarray
    normals: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, surface: bool = False) -> 'QuadratureRule':
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)) if surface else None)

    @property
    def size(self) -> int:
        return len(self.weights)

    def total_weight(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _check_gauss_order(gauss_order: int):
    if gauss_order < 1:
        raise GeometryError(f"Gauss order must be at least 1, got {gauss_order}")
    if gauss_order > MAX_GAUSS_ORDER:
        raise GeometryError(
            f"Gauss order {gauss_order} is not supported (maximum {MAX_GAUSS_ORDER})")


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def tensor_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """n x n Gauss rule on the unit square."""
    t, w = gauss_legendre(n)
    tx, ty = np.meshgrid(t, t, indexing='xy')
    wx, wy = np.meshgrid(w, w, indexing='xy')
    return np.column_stack([tx.ravel(), ty.ravel()]), (wx * wy).ravel()


@lru_cache(maxsize=None)
def triangle_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss rule on the reference triangle (0,0), (1,0), (0,1).

    Exact for polynomials of total degree 2n - 1.
    """
    tu, wu = gauss_legendre(n + 1)
    tv, wv = gauss_legendre(n)
    u = np.repeat(tu, n)
    v = np.tile(tv, n + 1) * (1.0 - u)
    w = np.repeat(wu, n) * np.tile(wv, n + 1) * (1.0 - u)
    return np.column_stack([u, v]), w


def _square_rule(cell: Cell, gauss_order: int) -> Tuple[np.ndarray, np.ndarray]:
    ref_points, ref_weights = tensor_rule(gauss_order)
    points = np.array([cell.x0, cell.y0]) + cell.size * ref_points
    return points, ref_weights * cell.size ** 2


def classify_cell(cell: Cell, domain: LevelSetDomain) -> CellClass:
    """Classify the closed cell exactly against the domain.

    Cells meeting the boundary in a single point are classified by the
    sign at the cell center.
    """
    if domain.kind == ShapeKind.CIRCLE:
        return _classify_circle(cell, domain)
    if domain.kind == ShapeKind.HALF_PLANE:
        values = domain.value(cell.corners()[:, 0], cell.corners()[:, 1])
        vmax = values.max()
        vmin = values.min()
        if vmax < 0.0:
            return CellClass.INSIDE
        if vmin >= 0.0:
            return CellClass.OUTSIDE
        if vmax == 0.0 and np.count_nonzero(values == 0.0) == 1:
            return CellClass.INSIDE
        return CellClass.CUT
    overlap_x = min(cell.x1, domain.hi[0]) - max(cell.x0, domain.lo[0])
    overlap_y = min(cell.y1, domain.hi[1]) - max(cell.y0, domain.lo[1])
    if overlap_x <= 0.0 or overlap_y <= 0.0:
        return CellClass.OUTSIDE
    if (cell.x0 > domain.lo[0] and cell.x1 < domain.hi[0]
            and cell.y0 > domain.lo[1] and cell.y1 < domain.hi[1]):
        return CellClass.INSIDE
    return CellClass.CUT


def _classify_circle(cell: Cell, domain: LevelSetDomain) -> CellClass:
    cx, cy = domain.center
    r = domain.radius
    dx = max(cell.x0 - cx, 0.0, cx - cell.x1)
    dy = max(cell.y0 - cy, 0.0, cy - cell.y1)
    d_min = math.hypot(dx, dy)
    d_max = max(math.hypot(px - cx, py - cy) for px, py in cell.corners())
    tol = 1e-14 * max(1.0, r)
    if not domain.inverted:
        if d_max < r:
            return CellClass.INSIDE
        if d_min >= r - tol:
            return CellClass.OUTSIDE
        if abs(d_max - r) <= tol:
            return CellClass.INSIDE
        return CellClass.CUT
    if d_min > r + tol:
        return CellClass.INSIDE
    if d_max <= r:
        return CellClass.OUTSIDE
    if abs(d_min - r) <= tol:
        return CellClass.INSIDE
    return CellClass.CUT


def clip_polygon(polygon: np.ndarray, domain: LevelSetDomain) -> np.ndarray:
    """Clip a convex polygon against the domain, straight chords between exact crossings."""
    vertices = [np.asarray(p, dtype=float) for p in polygon]
    for value, root in domain._constraints():
        if not vertices:
            break
        clipped = []
        n = len(vertices)
        for i in range(n):
            p = vertices[i]
            q = vertices[(i + 1) % n]
            vp = value(p)
            vq = value(q)
            if vp <= 0.0:
                clipped.append(p)
            if (vp < 0.0 < vq) or (vq < 0.0 < vp):
                clipped.append(root(p, q))
        vertices = clipped
    if len(vertices) < 3:
        return np.zeros((0, 2))
    return np.array(vertices)


def _fan_rule(polygon: np.ndarray, gauss_order: int) -> Tuple[np.ndarray, np.ndarray]:
    ref_points, ref_weights = triangle_rule(gauss_order)
    points = []
    weights = []
    a = polygon[0]
    for i in range(1, len(polygon) - 1):
        b = polygon[i]
        c = polygon[i + 1]
        jac = abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
        if jac == 0.0:
            continue
        points.append(a + np.outer(ref_points[:, 0], b - a) + np.outer(ref_points[:, 1], c - a))
        weights.append(ref_weights * jac)
    if not points:
        return np.zeros((0, 2)), np.zeros(0)
    return np.vstack(points), np.concatenate(weights)


def _circle_segment_rule(domain: LevelSetDomain, a: float, b: float,
                         n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Region between the chord and the arc of angles [a, b].

    Chord and arc are joined by straight lines at equal parameter; the signed
    Jacobian keeps the rule exact for arcs longer than a half circle.
    """
    t, wt = gauss_legendre(n)
    T, S = np.meshgrid(t, t, indexing='ij')
    W = np.outer(wt, wt)
    c = np.asarray(domain.center)
    r = domain.radius
    pa = c + r * np.array([math.cos(a), math.sin(a)])
    pb = c + r * np.array([math.cos(b), math.sin(b)])
    theta = a + (b - a) * T
    chord = pa + T[..., None] * (pb - pa)
    arc = c + r * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    points = (1.0 - S[..., None]) * chord + S[..., None] * arc
    dt = (1.0 - S[..., None]) * (pb - pa) + S[..., None] * (r * (b - a)) * np.stack(
        [-np.sin(theta), np.cos(theta)], axis=-1)
    ds = arc - chord
    jac = dt[..., 0] * ds[..., 1] - dt[..., 1] * ds[..., 0]
    weights = W * jac
    if weights.sum() < 0.0:
        weights = -weights
    return points.reshape(-1, 2), weights.ravel()


def _convex_hull_rule(points: List[np.ndarray], size: float,
                      gauss_order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Fan rule on the convex polygon through points (any order, duplicates allowed)."""
    unique: List[np.ndarray] = []
    for p in points:
        if all(np.hypot(*(p - q)) > 1e-13 * size for q in unique):
            unique.append(p)
    if len(unique) < 3:
        return np.zeros((0, 2)), np.zeros(0)
    ring = np.array(unique)
    mid = ring.mean(axis=0)
    order = np.argsort(np.arctan2(ring[:, 1] - mid[1], ring[:, 0] - mid[0]))
    return _fan_rule(ring[order], gauss_order)


def _curved_leaf_rule(leaf: Cell, domain: LevelSetDomain,
                      gauss_order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Exact-geometry rule on leaf & domain for circles.

    The disc part is the hull of the inside corners and arc endpoints plus one
    circular segment per arc. A complement is the whole leaf minus the disc part,
    so its weights are signed.
    """
    disc = LevelSetDomain(ShapeKind.CIRCLE, center=domain.center, radius=domain.radius)
    c = np.asarray(domain.center)
    r = domain.radius
    arcs = _arc_pieces(leaf, disc)
    hull = [p for p in leaf.corners() if float(disc.value(p[0], p[1])) <= 0.0]
    for a, b in arcs:
        hull.append(c + r * np.array([math.cos(a), math.sin(a)]))
        hull.append(c + r * np.array([math.cos(b), math.sin(b)]))
    parts = [_convex_hull_rule(hull, leaf.size, gauss_order)]
    parts += [_circle_segment_rule(disc, a, b, gauss_order + 1) for a, b in arcs]
    points = np.vstack([p for p, _ in parts])
    weights = np.concatenate([w for _, w in parts])
    if not domain.inverted:
        return points, weights
    sp, sw = _square_rule(leaf, gauss_order)
    return np.vstack([sp, points]), np.concatenate([sw, -weights])


def volume_quadrature(cell: Cell, domain: LevelSetDomain, gauss_order: int,
                      subdivision_depth: int, curved: bool = True) -> QuadratureRule:
    """Quadrature rule for the cut region cell & domain.

    Cut cells are subdivided as a quadtree down to subdivision_depth; cut
    leaves are clipped by straight chords and fan-triangulated. With curved
    set, circle leaves also get the segments between chord and arc, so the
    rule agrees with surface_quadrature on the boundary.
    """
    _check_gauss_order(gauss_order)
    if subdivision_depth < 0:
        raise GeometryError(f"Subdivision depth must be non-negative, got {subdivision_depth}")

    status = classify_cell(cell, domain)
    if status == CellClass.INSIDE:
        points, weights = _square_rule(cell, gauss_order)
        return QuadratureRule(points, weights)
    if status == CellClass.OUTSIDE:
        return QuadratureRule.empty()

    points = []
    weights = []
    stack = [(cell, 0)]
    while stack:
        sub, level = stack.pop()
        status = classify_cell(sub, domain)
        if status == CellClass.OUTSIDE:
            continue
        if status == CellClass.INSIDE:
            p, w = _square_rule(sub, gauss_order)
        elif level < subdivision_depth:
            stack.extend((child, level + 1) for child in reversed(sub.children()))
            continue
        elif curved and domain.kind == ShapeKind.CIRCLE:
            p, w = _curved_leaf_rule(sub, domain, gauss_order)
        else:
            polygon = clip_polygon(sub.corners(), domain)
            if len(polygon) == 0:
                continue
            p, w = _fan_rule(polygon, gauss_order)
        points.append(p)
        weights.append(w)

    if not points:
        return QuadratureRule.empty()
    return QuadratureRule(np.vstack(points), np.concatenate(weights))


def _clip_parameter(origin: np.ndarray, direction: np.ndarray, cell: Cell,
                    s_lo: float, s_hi: float) -> Optional[Tuple[float, float]]:
    """Restrict origin + s * direction, s in [s_lo, s_hi], to the closed cell."""
    for axis, (lo, hi) in enumerate(((cell.x0, cell.x1), (cell.y0, cell.y1))):
        if direction[axis] == 0.0:
            if origin[axis] < lo or origin[axis] > hi:
                return None
            continue
        a = (lo - origin[axis]) / direction[axis]
        b = (hi - origin[axis]) / direction[axis]
        s_lo = max(s_lo, min(a, b))
        s_hi = min(s_hi, max(a, b))
    if s_hi <= s_lo:
        return None
    return s_lo, s_hi


def _segment_pieces(cell: Cell, domain: LevelSetDomain) -> List[Tuple[np.ndarray, np.ndarray, float, float, np.ndarray]]:
    """Straight boundary pieces inside the cell as (origin, direction, s0, s1, normal)."""
    if domain.kind == ShapeKind.HALF_PLANE:
        n = np.asarray(domain.normal)
        origin = domain.offset * n
        direction = np.array([-n[1], n[0]])
        span = _clip_parameter(origin, direction, cell, -math.inf, math.inf)
        return [] if span is None else [(origin, direction, span[0], span[1], n)]
    lo = np.asarray(domain.lo)
    hi = np.asarray(domain.hi)
    sides = [
        (np.array([lo[0], lo[1]]), np.array([hi[0] - lo[0], 0.0]), np.array([0.0, -1.0])),
        (np.array([hi[0], lo[1]]), np.array([0.0, hi[1] - lo[1]]), np.array([1.0, 0.0])),
        (np.array([hi[0], hi[1]]), np.array([lo[0] - hi[0], 0.0]), np.array([0.0, 1.0])),
        (np.array([lo[0], hi[1]]), np.array([0.0, lo[1] - hi[1]]), np.array([-1.0, 0.0])),
    ]
    pieces = []
    for origin, direction, normal in sides:
        span = _clip_parameter(origin, direction, cell, 0.0, 1.0)
        if span is not None:
            pieces.append((origin, direction, span[0], span[1], normal))
    return pieces


def _arc_pieces(cell: Cell, domain: LevelSetDomain) -> List[Tuple[float, float]]:
    """Angular intervals of the circle lying inside the closed cell."""
    cx, cy = domain.center
    r = domain.radius
    angles = []
    for xe in (cell.x0, cell.x1):
        d = xe - cx
        if abs(d) <= r:
            h = math.sqrt(max(r * r - d * d, 0.0))
            for ye in (cy - h, cy + h):
                if cell.y0 <= ye <= cell.y1:
                    angles.append(math.atan2(ye - cy, d))
    for ye in (cell.y0, cell.y1):
        d = ye - cy
        if abs(d) <= r:
            h = math.sqrt(max(r * r - d * d, 0.0))
            for xe in (cx - h, cx + h):
                if cell.x0 <= xe <= cell.x1:
                    angles.append(math.atan2(d, xe - cx))

    def inside(theta):
        px = cx + r * math.cos(theta)
        py = cy + r * math.sin(theta)
        tol = 1e-12 * max(1.0, cell.size)
        return (cell.x0 - tol <= px <= cell.x1 + tol) and (cell.y0 - tol <= py <= cell.y1 + tol)

    if not angles:
        return [(0.0, 2.0 * math.pi)] if inside(0.0) else []
    angles = sorted(a % (2.0 * math.pi) for a in angles)
    unique = [angles[0]]
    for a in angles[1:]:
        if a - unique[-1] > 1e-14:
            unique.append(a)
    if len(unique) == 1:
        return []
    pieces = []
    for i, a in enumerate(unique):
        b = unique[i + 1] if i + 1 < len(unique) else unique[0] + 2.0 * math.pi
        if b - a > 1e-14 and inside(0.5 * (a + b)):
            pieces.append((a, b))
    return pieces


def surface_quadrature(cell: Cell, domain: LevelSetDomain, gauss_order: int) -> QuadratureRule:
    """Arc-length quadrature on the boundary piece inside a cut cell.

    Points lie exactly on the zero level set; normals point out of the domain.
    A zero-length intersection gives an empty rule.
    """
    _check_gauss_order(gauss_order)
    if classify_cell(cell, domain) != CellClass.CUT:
        raise GeometryError("Surface quadrature requested on a cell that is not cut")
    t, w = gauss_legendre(gauss_order)
    points = []
    weights = []
    normals = []
    if domain.kind == ShapeKind.CIRCLE:
        sign = -1.0 if domain.inverted else 1.0
        for a, b in _arc_pieces(cell, domain):
            theta = a + (b - a) * t
            n = np.column_stack([np.cos(theta), np.sin(theta)])
            points.append(np.asarray(domain.center) + domain.radius * n)
            weights.append(domain.radius * (b - a) * w)
            normals.append(sign * n)
    else:
        for origin, direction, s0, s1, normal in _segment_pieces(cell, domain):
            length = float(np.hypot(*direction)) * (s1 - s0)
            if length <= 1e-14 * cell.size:
                continue
            s = s0 + (s1 - s0) * t
            points.append(origin + np.outer(s, direction))
            weights.append(length * w)
            normals.append(np.tile(normal, (len(t), 1)))
    if not points:
        return QuadratureRule.empty(surface=True)
    return QuadratureRule(np.vstack(points), np.concatenate(weights), np.vstack(normals))
