"""Naive NumPy layer kernels on single images shaped ``(C, H, W)``."""

from __future__ import annotations

import numpy as np

IN_EPS = 1e-5

_ONE_BELOW = np.nextafter(1.0, 0.0)
_TINY = np.finfo(np.float64).tiny


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Stride-1 convolution (cross-correlation) with zero padding that keeps H x W.

    ``weight`` is ``(C_out, C_in, k, k)`` with odd ``k``.
    """
    c_out, c_in, k, _ = weight.shape
    _, h, w = x.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    out = np.empty((c_out, h * w), dtype=np.float64)
    out[:] = bias[:, None]
    for dy in range(k):
        for dx in range(k):
            patch = xp[:, dy:dy + h, dx:dx + w].reshape(c_in, h * w)
            out += weight[:, :, dy, dx] @ patch
    return out.reshape(c_out, h, w)


def instance_norm(x: np.ndarray, gamma=None, beta=None, eps: float = IN_EPS) -> np.ndarray:
    """Per-channel spatial standardisation followed by an optional affine map."""
    mean = x.mean(axis=(1, 2), keepdims=True)
    var = x.var(axis=(1, 2), keepdims=True)
    y = (x - mean) / np.sqrt(var + eps)
    if gamma is not None:
        y = y * np.asarray(gamma)[:, None, None]
    if beta is not None:
        y = y + np.asarray(beta)[:, None, None]
    return y


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def max_pool2(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def upsample_nearest(x: np.ndarray, factor: int) -> np.ndarray:
    return np.repeat(np.repeat(x, factor, axis=1), factor, axis=2)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, clipped so results stay strictly inside (0, 1)."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, _TINY, _ONE_BELOW)
