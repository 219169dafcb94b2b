"""JSON reports and SVG overlays for measurements."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from . import __version__
from .cobb import Measurement
from .config import MeasureConfig
from .contour import VertebraQuad


def _corners(q: VertebraQuad) -> dict:
    return {
        "upper_left": list(q.upper_left),
        "upper_right": list(q.upper_right),
        "lower_left": list(q.lower_left),
        "lower_right": list(q.lower_right),
    }


def measure_report(path: str, m: Measurement, config: MeasureConfig, width: int, height: int) -> dict:
    return {
        "tool": "spinecobb",
        "version": __version__,
        "input": path,
        "image": {"width": width, "height": height},
        "cobb": m.result.to_dict(),
        "treatment": m.result.severity.treatment,
        "vertebrae": [
            {
                "index": i,
                "label": label,
                "corners": _corners(q),
                "centroid": list(q.centroid),
                "upper_angle": q.upper_angle,
                "lower_angle": q.lower_angle,
            }
            for i, (label, q) in enumerate(m.spine.vertebrae)
        ],
        "complete": m.spine.complete,
        "warnings": list(m.warnings),
        "config": config.to_dict(),
        "effective_min_contour_pixels": m.min_contour_pixels,
    }


def _tangent(a, b, width, height):
    """Segment through a and b extended across the canvas."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    n = math.hypot(dx, dy)
    ux, uy = dx / n, dy / n
    reach = math.hypot(width, height)
    mx, my = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
    return (mx - ux * reach, my - uy * reach), (mx + ux * reach, my + uy * reach)


def overlay_svg(m: Measurement, width: int, height: int) -> str:
    """Vertebra outlines, corner dots, the two Cobb tangents and the angle."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="black"/>',
    ]
    res = m.result
    for i, (label, q) in enumerate(m.spine.vertebrae):
        ul, ur, ll, lr = q.corners
        pts = " ".join(f"{p.x:.2f},{p.y:.2f}" for p in (ul, ur, lr, ll))
        colour = "#ffcc00" if i in (res.upper_index, res.lower_index) else "#4fc3f7"
        parts.append(f'<polygon points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        for p in q.corners:
            parts.append(f'<circle cx="{p.x:.2f}" cy="{p.y:.2f}" r="2" fill="#ff5252"/>')
        parts.append(
            f'<text x="{ur.x + 6:.2f}" y="{q.centroid.y:.2f}" fill="white" font-size="10">{escape(label)}</text>'
        )
    upper = m.spine.quads[res.upper_index]
    lower = m.spine.quads[res.lower_index]
    for a, b in ((upper.upper_left, upper.upper_right), (lower.lower_left, lower.lower_right)):
        (x0, y0), (x1, y1) = _tangent(a, b, width, height)
        parts.append(
            f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" stroke="#ffcc00" stroke-width="1"/>'
        )
    parts.append(
        f'<text x="8" y="20" fill="white" font-size="16">Cobb {res.theta:.2f}&#176; '
        f'({escape(res.upper_label)}-{escape(res.lower_label)}, {res.severity.value})</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
