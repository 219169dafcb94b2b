"""Cobb angle from the most tilted vertebra pair, and severity classes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .config import MeasureConfig
from .contour import LabeledSpine, extract_quad, extract_regions, filter_small, order_and_label, scaled_min_pixels
from .errors import DomainError, EmptySpineError, InsufficientVertebraeError
from .raster import BinaryMask

PERPENDICULAR_EPS = 1e-12
DEFAULT_BOUNDARIES = (10.0, 25.0, 45.0)


class Severity(str, enum.Enum):
    NORMAL = "normal"
    MILD = "mild"
    MODERATE = "moderate"
    SEVERE = "severe"

    @property
    def rank(self) -> int:
        return _RANKS[self]

    @property
    def treatment(self) -> str:
        return TREATMENT[self]


_RANKS = {Severity.NORMAL: 0, Severity.MILD: 1, Severity.MODERATE: 2, Severity.SEVERE: 3}

TREATMENT = {
    Severity.NORMAL: "none",
    Severity.MILD: "check in every 2 years",
    Severity.MODERATE: "wear a brace for 16-23 hours/day",
    Severity.SEVERE: "revision surgery in 20-30 years",
}


@dataclass(frozen=True)
class CobbResult:
    upper_label: str
    lower_label: str
    upper_index: int
    lower_index: int
    theta: float
    severity: Severity

    def to_dict(self) -> dict:
        return {
            "upper_label": self.upper_label,
            "lower_label": self.lower_label,
            "upper_index": self.upper_index,
            "lower_index": self.lower_index,
            "theta": self.theta,
            "severity": self.severity.value,
        }


@dataclass(frozen=True)
class Measurement:
    result: CobbResult
    spine: LabeledSpine
    warnings: tuple[str, ...]
    min_contour_pixels: int


def cobb_angle(m_u: float, m_l: float) -> float:
    """Angle in degrees between two lines given by their slopes, in [0, 90]."""
    if not (math.isfinite(m_u) and math.isfinite(m_l)):
        raise DomainError(f"slopes must be finite, got {m_u!r}, {m_l!r}")
    denom = 1.0 + m_u * m_l
    if abs(denom) < PERPENDICULAR_EPS:
        return 90.0
    return abs(math.degrees(math.atan((m_u - m_l) / denom)))


def cobb_angle_from_angles(alpha_u: float, alpha_l: float) -> float:
    """Same quantity from edge angles in degrees; safe for vertical edges."""
    d = math.fmod(abs(alpha_u - alpha_l), 180.0)
    return min(d, 180.0 - d)


def classify_severity(theta: float, boundaries: Sequence[float] = DEFAULT_BOUNDARIES) -> Severity:
    """Each boundary angle belongs to the more severe class."""
    if not (math.isfinite(theta) and 0.0 <= theta <= 90.0):
        raise DomainError(f"Cobb angle must be in [0, 90], got {theta!r}")
    lo, mid, hi = boundaries
    if theta < lo:
        return Severity.NORMAL
    if theta < mid:
        return Severity.MILD
    if theta < hi:
        return Severity.MODERATE
    return Severity.SEVERE


def best_pair(upper_angles: Sequence[float], lower_angles: Sequence[float], gap: int = 3) -> tuple[int, int, float]:
    """Exhaustive search for ``(u, l, theta)`` maximising theta over ``u - l >= gap``.

    Ties go to the larger index gap, then the smaller ``l``.
    """
    n = len(upper_angles)
    if n < gap + 1:
        raise InsufficientVertebraeError(f"need at least {gap + 1} vertebrae for a gap of {gap}, found {n}")
    best = None
    for low in range(n - gap):
        a_l = lower_angles[low]
        for up in range(low + gap, n):
            theta = cobb_angle_from_angles(upper_angles[up], a_l)
            key = (theta, up - low, -low)
            if best is None or key > best[0]:
                best = (key, up, low)
    (theta, _, _), up, low = best
    return up, low, theta


def _extreme_tilts(spine: LabeledSpine, gap: int) -> tuple[int, int, float] | None:
    tilts = [(q.upper_angle + q.lower_angle) / 2 for q in spine.quads]
    i_max = max(range(len(tilts)), key=lambda i: (tilts[i], -i))
    i_min = min(range(len(tilts)), key=lambda i: (tilts[i], i))
    up, low = max(i_max, i_min), min(i_max, i_min)
    if up - low < gap:
        return None
    theta = cobb_angle_from_angles(spine.quads[up].upper_angle, spine.quads[low].lower_angle)
    return up, low, theta


def select_tilted_pair(
    spine: LabeledSpine,
    gap: int = 3,
    boundaries: Sequence[float] = DEFAULT_BOUNDARIES,
    rule: str = "maximize_theta",
) -> CobbResult:
    """Pick the upper/lower vertebra pair and compute its Cobb angle.

    ``maximize_theta`` uses the upper edge of the upper vertebra and the lower
    edge of the lower one, maximised over all pairs at least ``gap`` indices
    apart. ``extreme_tilts`` takes the most positively and most negatively
    tilted vertebrae, falling back to ``maximize_theta`` when they are too close.
    """
    n = len(spine)
    if n < gap + 1:
        raise InsufficientVertebraeError(f"need at least {gap + 1} vertebrae, found {n}")
    picked = _extreme_tilts(spine, gap) if rule == "extreme_tilts" else None
    if picked is None:
        quads = spine.quads
        picked = best_pair([q.upper_angle for q in quads], [q.lower_angle for q in quads], gap)
    up, low, theta = picked
    labels = spine.labels
    return CobbResult(
        upper_label=labels[up],
        lower_label=labels[low],
        upper_index=up,
        lower_index=low,
        theta=theta,
        severity=classify_severity(theta, boundaries),
    )


def measure(mask: BinaryMask, config: MeasureConfig | None = None) -> Measurement:
    """Full pipeline: regions, size filter, corners, ordering, pair selection."""
    config = config or MeasureConfig()
    a = config.min_contour_pixels
    if a is None:
        a = scaled_min_pixels(mask.width, mask.height)
    regions = filter_small(extract_regions(mask), a)
    if not regions:
        raise EmptySpineError(f"no foreground region with at least {a} pixels")
    spine = order_and_label([extract_quad(r, i) for i, r in enumerate(regions)], config.expected_vertebrae)
    warnings = list(spine.warnings)
    if config.pair_rule == "extreme_tilts" and len(spine) > config.gap and _extreme_tilts(spine, config.gap) is None:
        warnings.append("extreme tilts are closer than the required gap; fell back to maximize_theta")
    result = select_tilted_pair(spine, config.gap, config.severity_boundaries, config.pair_rule)
    return Measurement(result, spine, tuple(warnings), a)
