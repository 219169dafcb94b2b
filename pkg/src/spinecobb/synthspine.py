"""Synthetic scoliotic spine masks with exactly known geometry.

Vertebrae are rectangles stacked bottom-to-top along a lateral centerline,
each rotated so its endplates are perpendicular to the local centerline
tangent, optionally with per-corner jitter, then rasterised by testing pixel
centres against the quadrilateral.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .cobb import CobbResult, DEFAULT_BOUNDARIES, best_pair, classify_severity
from .contour import ANATOMICAL_LABELS, edge_angle
from .errors import SpecInfeasibleError
from .raster import BinaryMask, Point

MIN_MARGIN = 2.0
MIN_GAP = 2.0
CENTERLINES = ("sinusoid", "polynomial")


@dataclass(frozen=True)
class SynthSpec:
    width: int = 512
    height: int = 1024
    vertebra_count: int = 18
    centerline: str = "sinusoid"
    # Sinusoid: offset(s) = amplitude * sin(2*pi*s / wavelength + phase), where
    # s is the vertical distance above the bottom of the spine. wavelength
    # None means twice the spine's vertical span, a single C-shaped curve.
    amplitude: float = 0.0
    wavelength: float | None = None
    phase: float = 0.0
    # Polynomial: offset(t) = sum(c_k * t**k) px with t in [0, 1] bottom to top.
    poly_coeffs: tuple[float, ...] = ()
    base_width: float = 64.0
    base_height: float = 38.0
    # Per-index size factors, bottom first; None ramps 1.15 -> 0.85.
    scales: tuple[float, ...] | None = None
    gap: float = 12.0
    seed: int = 0
    jitter: float = 0.0

    def __post_init__(self):
        if self.scales is not None:
            object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        object.__setattr__(self, "poly_coeffs", tuple(float(c) for c in self.poly_coeffs))

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise SpecInfeasibleError("canvas dimensions must be positive")
        if self.vertebra_count < 4:
            raise SpecInfeasibleError(f"vertebra_count must be >= 4, got {self.vertebra_count}")
        if self.gap < MIN_GAP:
            raise SpecInfeasibleError(f"gap must be >= {MIN_GAP} px, got {self.gap}")
        if self.centerline not in CENTERLINES:
            raise SpecInfeasibleError(f"centerline must be one of {CENTERLINES}")
        if self.wavelength is not None and self.wavelength <= 0:
            raise SpecInfeasibleError("wavelength must be positive")
        if self.jitter < 0:
            raise SpecInfeasibleError("jitter must be >= 0")
        if self.base_width <= 0 or self.base_height <= 0:
            raise SpecInfeasibleError("vertebra size must be positive")
        if self.scales is not None:
            if len(self.scales) != self.vertebra_count:
                raise SpecInfeasibleError(
                    f"scales has {len(self.scales)} entries for {self.vertebra_count} vertebrae"
                )
            if min(self.scales) <= 0:
                raise SpecInfeasibleError("scales must be positive")

    def size_factors(self) -> np.ndarray:
        if self.scales is not None:
            return np.asarray(self.scales, dtype=np.float64)
        return np.linspace(1.15, 0.85, self.vertebra_count)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SpecInfeasibleError(f"unknown synth spec keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["poly_coeffs"] = list(self.poly_coeffs)
        if self.scales is not None:
            d["scales"] = list(self.scales)
        return d

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GroundTruth:
    """Exact pre-rasterisation geometry, bottom vertebra first."""

    corners: tuple[tuple[Point, Point, Point, Point], ...]  # UL, UR, LL, LR, image frame
    upper_angles: tuple[float, ...]
    lower_angles: tuple[float, ...]
    labels: tuple[str, ...]
    tilts: tuple[float, ...] = field(default=())  # centerline tilt before jitter

    def to_dict(self) -> dict:
        cobb = analytic_cobb(self)
        return {
            "vertebrae": [
                {
                    "index": i,
                    "label": self.labels[i],
                    "corners": [list(p) for p in self.corners[i]],
                    "upper_angle": self.upper_angles[i],
                    "lower_angle": self.lower_angles[i],
                    "tilt": self.tilts[i] if self.tilts else None,
                }
                for i in range(len(self.labels))
            ],
            "cobb": cobb.to_dict(),
        }


def _labels(n: int) -> tuple[str, ...]:
    if n == len(ANATOMICAL_LABELS):
        return ANATOMICAL_LABELS
    return tuple(f"V{i + 1}" for i in range(n))


class _Centerline:
    """Lateral offset and slope as functions of height above the spine bottom."""

    def __init__(self, spec: SynthSpec, span: float):
        self.spec = spec
        self.span = span

    def offset(self, s):
        spec = self.spec
        if spec.centerline == "sinusoid":
            lam = spec.wavelength or 2.0 * self.span
            return spec.amplitude * np.sin(2 * np.pi * s / lam + spec.phase)
        t = np.asarray(s) / self.span
        return sum(c * t ** k for k, c in enumerate(spec.poly_coeffs)) + 0 * t

    def slope(self, s):
        spec = self.spec
        if spec.centerline == "sinusoid":
            lam = spec.wavelength or 2.0 * self.span
            return spec.amplitude * (2 * np.pi / lam) * np.cos(2 * np.pi * s / lam + spec.phase)
        t = np.asarray(s) / self.span
        return sum(k * c * t ** (k - 1) for k, c in enumerate(spec.poly_coeffs) if k > 0) / self.span + 0 * t


def _layout(spec: SynthSpec):
    """Vertical span and per-vertebra centre heights, placed by arc length."""
    sizes = spec.size_factors()
    heights = spec.base_height * sizes
    total = float(heights.sum() + spec.gap * (spec.vertebra_count - 1))
    along = np.concatenate([[0.0], np.cumsum(heights[:-1] + spec.gap)]) + heights / 2

    span = total
    for _ in range(50):
        line = _Centerline(spec, span)
        grid = np.linspace(0.0, span * 1.5, 6001)
        ds = np.sqrt(1.0 + line.slope(grid) ** 2)
        arc = np.concatenate([[0.0], np.cumsum((ds[1:] + ds[:-1]) / 2 * np.diff(grid))])
        new_span = float(np.interp(total, arc, grid))
        if abs(new_span - span) < 1e-9:
            break
        span = new_span
    line = _Centerline(spec, span)
    centres = np.interp(along, arc, grid)
    return line, span, centres, sizes


def _rasterize(quads: list[np.ndarray], width: int, height: int) -> np.ndarray:
    out = np.zeros((height, width), dtype=bool)
    for q in quads:
        # q rows: UL, UR, LR, LL (cyclic, image frame).
        x0 = max(0, int(math.floor(q[:, 0].min())))
        x1 = min(width - 1, int(math.ceil(q[:, 0].max())))
        y0 = max(0, int(math.floor(q[:, 1].min())))
        y1 = min(height - 1, int(math.ceil(q[:, 1].max())))
        ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
        inside = np.ones(xs.shape, dtype=bool)
        sign = np.sign(_signed_area(q))
        for i in range(4):
            a, b = q[i], q[(i + 1) % 4]
            cross = (b[0] - a[0]) * (ys - a[1]) - (b[1] - a[1]) * (xs - a[0])
            inside &= sign * cross >= 0
        out[y0:y1 + 1, x0:x1 + 1] |= inside
    return out


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _is_convex(poly: np.ndarray) -> bool:
    signs = []
    for i in range(len(poly)):
        a, b, c = poly[i], poly[(i + 1) % len(poly)], poly[(i + 2) % len(poly)]
        signs.append((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]))
    return all(s > 0 for s in signs) or all(s < 0 for s in signs)


def _separated(p: np.ndarray, q: np.ndarray) -> bool:
    """Separating-axis test for two convex polygons."""
    for poly in (p, q):
        for i in range(len(poly)):
            e = poly[(i + 1) % len(poly)] - poly[i]
            axis = np.array([-e[1], e[0]])
            pa, qa = p @ axis, q @ axis
            if pa.max() < qa.min() or qa.max() < pa.min():
                return True
    return False


def _point_segment(pt: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    t = np.clip(np.dot(pt - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.hypot(*(a + t * ab - pt)))


def polygon_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Euclidean distance between two convex polygons; 0 if they intersect."""
    if not _separated(p, q):
        return 0.0
    best = math.inf
    for src, dst in ((p, q), (q, p)):
        for v in src:
            for i in range(len(dst)):
                best = min(best, _point_segment(v, dst[i], dst[(i + 1) % len(dst)]))
    return best


def generate(spec: SynthSpec) -> tuple[BinaryMask, GroundTruth]:
    """Rasterised mask plus exact geometry; a pure function of ``spec``."""
    spec.validate()
    line, span, centres, sizes = _layout(spec)
    rng = np.random.default_rng(spec.seed)

    offsets = line.offset(centres)
    # Centre the curve laterally on the canvas.
    grid = np.linspace(0.0, span, 2001)
    all_off = line.offset(grid)
    lateral = (all_off.max() + all_off.min()) / 2
    cx = (spec.width - 1) / 2 + offsets - lateral
    bottom = (spec.height - 1) / 2 + span / 2  # image y of the spine bottom
    cy = bottom - centres

    # Centerline formulated in the math frame (offset to the right, height up),
    # so the endplate direction (1, -slope) normalised has angle -atan(slope).
    slopes = line.slope(centres)
    tilts = -np.degrees(np.arctan(slopes))

    corners_img = []
    quads_cyclic = []
    for i in range(spec.vertebra_count):
        w = spec.base_width * sizes[i]
        h = spec.base_height * sizes[i]
        t = math.radians(tilts[i])
        e = np.array([math.cos(t), -math.sin(t)])  # endplate direction, image frame
        d = np.array([math.sin(t), math.cos(t)])   # downward along the spine, image frame
        c = np.array([cx[i], cy[i]])
        ul = c - (h / 2) * d - (w / 2) * e
        ur = c - (h / 2) * d + (w / 2) * e
        ll = c + (h / 2) * d - (w / 2) * e
        lr = c + (h / 2) * d + (w / 2) * e
        pts = np.array([ul, ur, ll, lr])
        if spec.jitter > 0:
            radius = spec.jitter * np.sqrt(rng.uniform(0.0, 1.0, 4))
            ang = rng.uniform(0.0, 2 * np.pi, 4)
            pts = pts + np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
        cyc = pts[[0, 1, 3, 2]]
        if not _is_convex(cyc):
            raise SpecInfeasibleError(f"vertebra {i} is not convex after jitter", i)
        if (cyc[:, 0].min() < MIN_MARGIN or cyc[:, 0].max() > spec.width - 1 - MIN_MARGIN
                or cyc[:, 1].min() < MIN_MARGIN or cyc[:, 1].max() > spec.height - 1 - MIN_MARGIN):
            raise SpecInfeasibleError(
                f"vertebra {i} leaves the canvas (needs {MIN_MARGIN} px margin)", i
            )
        corners_img.append(pts)
        quads_cyclic.append(cyc)

    for i in range(spec.vertebra_count):
        for j in range(i + 1, spec.vertebra_count):
            dist = polygon_distance(quads_cyclic[i], quads_cyclic[j])
            if dist < MIN_GAP:
                raise SpecInfeasibleError(
                    f"vertebra {j} is {dist:.2f} px from vertebra {i}; at least {MIN_GAP} px required", j
                )

    mask = BinaryMask(_rasterize(quads_cyclic, spec.width, spec.height))
    corners = tuple(tuple(Point(float(p[0]), float(p[1])) for p in pts) for pts in corners_img)
    gt = GroundTruth(
        corners=corners,
        upper_angles=tuple(edge_angle(c[0], c[1]) for c in corners),
        lower_angles=tuple(edge_angle(c[2], c[3]) for c in corners),
        labels=_labels(spec.vertebra_count),
        tilts=tuple(float(t) + 0.0 for t in tilts),
    )
    return mask, gt


def analytic_cobb(gt: GroundTruth, gap: int = 3, boundaries=DEFAULT_BOUNDARIES) -> CobbResult:
    """Cobb angle of the exact geometry with the measurement's pair rule."""
    up, low, theta = best_pair(gt.upper_angles, gt.lower_angles, gap)
    return CobbResult(
        upper_label=gt.labels[up],
        lower_label=gt.labels[low],
        upper_index=up,
        lower_index=low,
        theta=theta,
        severity=classify_severity(theta, boundaries),
    )


def spec_for_cobb(target: float, base: SynthSpec | None = None, tol: float = 1e-6) -> SynthSpec:
    """Sinusoid amplitude giving the jitter-free analytic Cobb angle ``target``.

    Bisection on amplitude; the returned spec keeps ``base``'s jitter and seed.
    """
    base = base or SynthSpec()
    if target <= 0:
        return replace(base, centerline="sinusoid", amplitude=0.0)
    probe = replace(base, centerline="sinusoid", jitter=0.0)

    def theta(amp: float) -> float:
        line, span, centres, _ = _layout(replace(probe, amplitude=amp))
        tilts = tuple(float(t) for t in -np.degrees(np.arctan(line.slope(centres))))
        return best_pair(tilts, tilts)[2]

    lo, hi = 0.0, 1.0
    while theta(hi) < target:
        hi *= 2
        if hi > 1e5:
            raise SpecInfeasibleError(f"no amplitude reaches a Cobb angle of {target}")
    while hi - lo > tol:
        midpoint = (lo + hi) / 2
        if theta(midpoint) < target:
            lo = midpoint
        else:
            hi = midpoint
    return replace(base, centerline="sinusoid", amplitude=(lo + hi) / 2)
