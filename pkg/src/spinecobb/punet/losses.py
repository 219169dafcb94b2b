"""Soft Dice and binary cross-entropy losses with analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

DICE_SMOOTH = 1.0
XE_CLAMP = 1e-7


def _pair(pred, ref):
    p = np.asarray(pred, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    if p.shape != r.shape:
        raise ShapeError(f"prediction shape {p.shape} differs from reference shape {r.shape}")
    return p, r


def dice_loss(pred, ref, smooth: float = DICE_SMOOTH) -> float:
    p, r = _pair(pred, ref)
    return float(1.0 - (2.0 * np.sum(p * r) + smooth) / (np.sum(p) + np.sum(r) + smooth))


def xe_loss(pred, ref, clamp: float = XE_CLAMP) -> float:
    p, r = _pair(pred, ref)
    p = np.clip(p, clamp, 1.0 - clamp)
    return float(np.mean(-(r * np.log(p) + (1.0 - r) * np.log(1.0 - p))))


def dice_gradient(pred, ref, smooth: float = DICE_SMOOTH) -> np.ndarray:
    p, r = _pair(pred, ref)
    num = 2.0 * np.sum(p * r) + smooth
    den = np.sum(p) + np.sum(r) + smooth
    return -(2.0 * r * den - num) / den ** 2


def xe_gradient(pred, ref, clamp: float = XE_CLAMP) -> np.ndarray:
    # The clamp is flat outside [clamp, 1 - clamp], so the gradient is zero there.
    p, r = _pair(pred, ref)
    inside = (p > clamp) & (p < 1.0 - clamp)
    q = np.clip(p, clamp, 1.0 - clamp)
    g = (-(r / q) + (1.0 - r) / (1.0 - q)) / p.size
    return np.where(inside, g, 0.0)


def loss_gradient(kind: str, pred, ref) -> np.ndarray:
    """Gradient of the ``"dice"`` or ``"xe"`` loss with respect to ``pred``."""
    if kind == "dice":
        return dice_gradient(pred, ref)
    if kind == "xe":
        return xe_gradient(pred, ref)
    raise ValueError(f"unknown loss kind {kind!r}; expected 'dice' or 'xe'")
