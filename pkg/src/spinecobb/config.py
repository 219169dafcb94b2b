"""Measurement configuration, loadable from a JSON file."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

PAIR_RULES = ("maximize_theta", "extreme_tilts")


@dataclass(frozen=True)
class MeasureConfig:
    # None means 200 px at 1024x512, scaled with canvas area.
    min_contour_pixels: int | None = None
    expected_vertebrae: int = 18
    iou_threshold: float = 0.5
    gap: int = 3
    severity_boundaries: tuple[float, float, float] = (10.0, 25.0, 45.0)
    pair_rule: str = "maximize_theta"

    def __post_init__(self):
        b = tuple(float(v) for v in self.severity_boundaries)
        object.__setattr__(self, "severity_boundaries", b)
        if len(b) != 3 or not (0 < b[0] < b[1] < b[2] < 90):
            raise ConfigError(f"severity_boundaries must be three increasing angles in (0, 90), got {b}")
        if self.gap < 1:
            raise ConfigError(f"gap must be >= 1, got {self.gap}")
        if self.min_contour_pixels is not None and self.min_contour_pixels < 0:
            raise ConfigError("min_contour_pixels must be >= 0")
        if self.expected_vertebrae < 1:
            raise ConfigError("expected_vertebrae must be >= 1")
        if not 0 < self.iou_threshold <= 1:
            raise ConfigError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if self.pair_rule not in PAIR_RULES:
            raise ConfigError(f"pair_rule must be one of {PAIR_RULES}, got {self.pair_rule!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "MeasureConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "MeasureConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["severity_boundaries"] = list(self.severity_boundaries)
        return d
