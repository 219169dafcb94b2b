"""Vertebra regions, boundaries, corner quadrilaterals and anatomical labels.

Foreground is 8-connected (background 4-connected). Corner points of a
vertebra are the corners of the minimum-area rectangle enclosing its
boundary, found with rotating calipers over the convex hull.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import AmbiguousOrderingError, DegenerateGeometryError
from .raster import BinaryMask, Point

ANATOMICAL_LABELS = ("L5", "L4", "L3", "L2", "L1") + tuple(f"T{i}" for i in range(12, 0, -1)) + ("C7",)
# Bottom-to-top, index 0 = L5.
assert len(ANATOMICAL_LABELS) == 18

REFERENCE_AREA = 1024 * 512
DEFAULT_MIN_PIXELS = 200
ORDER_TOLERANCE = 0.5
RECT_TIE_TOLERANCE = 1e-9

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class Region:
    """One 8-connected foreground component.

    ``coords`` is an ``(N, 2)`` integer array of ``(x, y)`` pixel positions in
    raster order (row by row).
    """

    coords: np.ndarray

    def __post_init__(self):
        self.coords.flags.writeable = False

    @property
    def pixel_count(self) -> int:
        return len(self.coords)

    @property
    def pixel_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(map(tuple, self.coords.tolist()))

    @property
    def bounding_box(self) -> tuple[int, int, int, int]:
        mn = self.coords.min(axis=0)
        mx = self.coords.max(axis=0)
        return int(mn[0]), int(mn[1]), int(mx[0]), int(mx[1])

    @property
    def centroid(self) -> Point:
        c = self.coords.mean(axis=0)
        return Point(float(c[0]), float(c[1]))

    def __eq__(self, other):
        if not isinstance(other, Region):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())


@dataclass(frozen=True)
class VertebraQuad:
    """Corner points of one vertebra, UL, UR, LL, LR in the image frame.

    Edge angles are in degrees in the math frame (y up, counterclockwise
    positive), folded into (-90, 90].
    """

    corners: tuple[Point, Point, Point, Point]
    centroid: Point
    upper_angle: float
    lower_angle: float

    @property
    def upper_left(self) -> Point:
        return self.corners[0]

    @property
    def upper_right(self) -> Point:
        return self.corners[1]

    @property
    def lower_left(self) -> Point:
        return self.corners[2]

    @property
    def lower_right(self) -> Point:
        return self.corners[3]

    @property
    def upper_slope(self) -> float:
        return math.tan(math.radians(self.upper_angle))

    @property
    def lower_slope(self) -> float:
        return math.tan(math.radians(self.lower_angle))

    @classmethod
    def from_corners(cls, ul, ur, ll, lr, centroid=None) -> "VertebraQuad":
        corners = tuple(Point(float(p[0]), float(p[1])) for p in (ul, ur, ll, lr))
        if centroid is None:
            centroid = Point(sum(p.x for p in corners) / 4, sum(p.y for p in corners) / 4)
        return cls(
            corners=corners,
            centroid=Point(float(centroid[0]), float(centroid[1])),
            upper_angle=edge_angle(corners[0], corners[1]),
            lower_angle=edge_angle(corners[2], corners[3]),
        )


@dataclass(frozen=True)
class LabeledSpine:
    """Vertebrae ordered bottom (index 0) to top."""

    vertebrae: tuple[tuple[str, VertebraQuad], ...]
    complete: bool
    warnings: tuple[str, ...] = field(default=())

    def __len__(self):
        return len(self.vertebrae)

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.vertebrae]

    @property
    def quads(self) -> list[VertebraQuad]:
        return [quad for _, quad in self.vertebrae]


def scaled_min_pixels(width: int, height: int, base: int = DEFAULT_MIN_PIXELS) -> int:
    """Noise threshold ``base`` at 1024x512, scaled with canvas area."""
    return max(1, int(round(base * width * height / REFERENCE_AREA)))


def extract_regions(mask: BinaryMask) -> list[Region]:
    """Maximal 8-connected foreground components, ordered by first pixel in raster order."""
    labels, n = ndimage.label(mask.pixels, structure=_EIGHT)
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs]
    # Stable sort keeps raster order within each component.
    order = np.argsort(ids, kind="stable")
    ids, xs, ys = ids[order], xs[order], ys[order]
    splits = np.flatnonzero(np.diff(ids)) + 1
    coords = np.stack([xs, ys], axis=1).astype(np.int64)
    return [Region(np.ascontiguousarray(c)) for c in np.split(coords, splits)]


def filter_small(regions: Sequence[Region], a: int) -> list[Region]:
    """Drop regions with fewer than ``a`` pixels."""
    if a < 0:
        raise ValueError(f"minimum pixel count must be >= 0, got {a}")
    return [r for r in regions if r.pixel_count >= a]


# Clockwise on screen (y down), starting west.
_MOORE = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


def trace_boundary(region: Region) -> list[Point]:
    """Outer boundary by Moore-neighbour tracing, clockwise on screen.

    Each boundary pixel is listed once, at its first visit.
    """
    pixels = region.pixel_set
    start = tuple(region.coords[0].tolist())  # raster-first, so its west neighbour is background
    path = [start]
    seen = {start}
    cur, back = start, 0
    first_next = None
    for _ in range(8 * len(pixels) + 8):
        nxt = None
        for step in range(1, 9):
            d = (back + step) % 8
            cand = (cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1])
            if cand in pixels:
                nxt = cand
                prev = (cur[0] + _MOORE[(d - 1) % 8][0], cur[1] + _MOORE[(d - 1) % 8][1])
                break
        if nxt is None:
            return [Point(float(start[0]), float(start[1]))]
        if cur == start:
            if first_next is None:
                first_next = nxt
            elif nxt == first_next:
                break
        back = _MOORE_INDEX[(prev[0] - nxt[0], prev[1] - nxt[1])]
        cur = nxt
        if cur not in seen:
            seen.add(cur)
            path.append(cur)
    return [Point(float(x), float(y)) for x, y in path]


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Sequence) -> list[Point]:
    """Andrew's monotone chain.

    Vertices are returned counterclockwise with x right and y up (positive
    signed area in the given coordinates); collinear points are dropped.
    """
    pts = sorted(set((float(p[0]), float(p[1])) for p in points))
    if not pts:
        raise ValueError("convex hull of an empty point set")
    if len(pts) <= 2:
        return [Point(*p) for p in pts]
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [Point(*p) for p in lower[:-1] + upper[:-1]]


def polygon_area(points: Sequence) -> float:
    """Signed shoelace area; positive for counterclockwise (y-up) order."""
    n = len(points)
    s = 0.0
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return s / 2.0


def _fold45(deg: float) -> float:
    """Rectangle orientation is defined modulo 90 degrees; map to (-45, 45]."""
    d = math.fmod(deg, 90.0)
    if d > 45.0:
        d -= 90.0
    elif d <= -45.0:
        d += 90.0
    return d


def min_area_rect(points: Sequence) -> list[Point]:
    """Corners of the minimum-area enclosing rectangle, counterclockwise.

    Rotating calipers: for each hull edge the four extreme vertices (both ends
    along the edge, farthest along its inward normal) advance monotonically.
    Equal-area orientations (within 1e-9) resolve to the one closest to
    horizontal.
    """
    hull = np.array(convex_hull(points), dtype=np.float64)
    h = len(hull)
    if h < 3:
        raise DegenerateGeometryError("points are collinear or coincident; no enclosing rectangle")
    area = polygon_area(hull)
    if area <= 0:
        raise DegenerateGeometryError("hull has zero area")

    def along(k, u):
        return hull[k % h] @ u

    candidates = []
    j = k = m = None
    for i in range(h):
        p = hull[i]
        e = hull[(i + 1) % h] - p
        u = e / math.hypot(e[0], e[1])
        nrm = np.array([-u[1], u[0]])  # inward for a counterclockwise hull
        if j is None:
            proj_u = hull @ u
            proj_n = hull @ nrm
            k = int(np.argmax(proj_u))
            m = int(np.argmin(proj_u))
            j = int(np.argmax(proj_n))
        else:
            for _ in range(h):
                if along(k + 1, u) >= along(k, u):
                    k += 1
                else:
                    break
            for _ in range(h):
                if along(m + 1, u) <= along(m, u):
                    m += 1
                else:
                    break
            for _ in range(h):
                if along(j + 1, nrm) >= along(j, nrm):
                    j += 1
                else:
                    break
        s_max = (hull[k % h] - p) @ u
        s_min = (hull[m % h] - p) @ u
        t_max = (hull[j % h] - p) @ nrm
        rect_area = (s_max - s_min) * t_max
        corners = [
            p + s_min * u,
            p + s_max * u,
            p + s_max * u + t_max * nrm,
            p + s_min * u + t_max * nrm,
        ]
        angle = _fold45(math.degrees(math.atan2(u[1], u[0])))
        candidates.append((rect_area, abs(angle), i, corners))

    best_area = min(c[0] for c in candidates)
    tol = RECT_TIE_TOLERANCE * max(1.0, best_area)
    tied = [c for c in candidates if c[0] - best_area <= tol]
    _, _, _, corners = min(tied, key=lambda c: (c[1], c[2]))
    return [Point(float(c[0]), float(c[1])) for c in corners]


def edge_angle(a, b) -> float:
    """Angle of segment a->b (image frame) to the horizontal, math frame, in (-90, 90]."""
    dx = b[0] - a[0]
    dy = -(b[1] - a[1])
    if dx == 0 and dy == 0:
        raise DegenerateGeometryError("zero-length edge")
    deg = math.degrees(math.atan2(dy, dx))
    if deg > 90.0:
        deg -= 180.0
    elif deg <= -90.0:
        deg += 180.0
    return deg + 0.0  # no negative zero


def extract_quad(region: Region, index: int | None = None) -> VertebraQuad:
    """Four corners of a vertebra region with UL/UR/LL/LR labelling.

    Geometry is computed relative to the bounding-box origin, so angles are
    bitwise identical under integer translation of the mask.
    """
    x0, y0, x1, y1 = region.bounding_box
    origin = np.array([x0, y0], dtype=np.float64)
    boundary = np.array(trace_boundary(region), dtype=np.float64) - origin
    try:
        rect = np.array(min_area_rect(boundary))
    except DegenerateGeometryError as exc:
        where = f"region {index}" if index is not None else "region"
        raise DegenerateGeometryError(
            f"{where} with bounding box ({x0}, {y0}, {x1}, {y1}) is degenerate: {exc}"
        ) from exc
    # The rectangle's near-horizontal axis carries the endplates: pick the pair
    # of opposite edges whose direction is closest to horizontal.
    e0 = rect[1] - rect[0]
    e1 = rect[2] - rect[1]
    if abs(e0[0]) * np.hypot(*e1) >= abs(e1[0]) * np.hypot(*e0):
        edges = [(rect[0], rect[1]), (rect[3], rect[2])]
    else:
        edges = [(rect[1], rect[2]), (rect[0], rect[3])]
    edges.sort(key=lambda e: (e[0][1] + e[1][1]))
    (ua, ub), (la, lb) = edges
    ul, ur = (ua, ub) if ua[0] <= ub[0] else (ub, ua)
    ll, lr = (la, lb) if la[0] <= lb[0] else (lb, la)
    return VertebraQuad(
        corners=tuple(Point(float(p[0] + origin[0]), float(p[1] + origin[1])) for p in (ul, ur, ll, lr)),
        centroid=region.centroid,
        upper_angle=edge_angle(ul, ur),
        lower_angle=edge_angle(ll, lr),
    )


def order_and_label(quads: Sequence[VertebraQuad], expected: int = 18) -> LabeledSpine:
    """Sort bottom-to-top by centroid and attach labels.

    Exactly 18 vertebrae get L5..C7; any other count gets V1..Vk and a warning.
    """
    ordered = sorted(quads, key=lambda q: (-q.centroid.y, q.centroid.x))
    for lo, hi in zip(ordered, ordered[1:]):
        if abs(lo.centroid.y - hi.centroid.y) < ORDER_TOLERANCE:
            raise AmbiguousOrderingError(
                f"vertebra centroids at y={lo.centroid.y:.2f} and y={hi.centroid.y:.2f} "
                f"are within {ORDER_TOLERANCE} px; bottom-to-top order is ambiguous"
            )
    warnings = []
    complete = len(ordered) == len(ANATOMICAL_LABELS)
    if complete:
        labels = list(ANATOMICAL_LABELS)
    else:
        labels = [f"V{i + 1}" for i in range(len(ordered))]
    if len(ordered) != expected or not complete:
        warnings.append(
            f"found {len(ordered)} vertebrae, expected {expected}; "
            + ("anatomical labels assigned" if complete else "using generic labels V1..Vk")
        )
    return LabeledSpine(tuple(zip(labels, ordered)), complete, tuple(warnings))


def spine_from_mask(mask: BinaryMask, min_pixels: int | None = None, expected: int = 18) -> LabeledSpine:
    if min_pixels is None:
        min_pixels = scaled_min_pixels(mask.width, mask.height)
    regions = filter_small(extract_regions(mask), min_pixels)
    quads = [extract_quad(r, i) for i, r in enumerate(regions)]
    return order_and_label(quads, expected)
