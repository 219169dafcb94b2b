"""Segmentation metrics: Dice, SSIM, average Hausdorff distance, object-level F1."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .contour import scaled_min_pixels
from .errors import EmptyBoundaryError, ShapeError, SizeError
from .raster import BinaryMask

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03

_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class SegMetrics:
    dice: float
    ssim: float
    avg_hausdorff: float
    f1: float

    def to_dict(self) -> dict:
        return asdict(self)


def _check_shapes(pred: BinaryMask, ref: BinaryMask) -> None:
    if pred.shape != ref.shape:
        raise ShapeError(
            f"mask dimensions differ: pred {pred.width}x{pred.height}, ref {ref.width}x{ref.height}"
        )


def dice(pred: BinaryMask, ref: BinaryMask) -> float:
    """2|P&R| / (|P|+|R|); 1.0 when both are empty."""
    _check_shapes(pred, ref)
    p, r = pred.pixels, ref.pixels
    total = int(np.count_nonzero(p)) + int(np.count_nonzero(r))
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(p & r)) / total


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalised 1-D Gaussian taps."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _valid_filter(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    k = len(taps)
    h, w = img.shape
    rows = sum(taps[i] * img[:, i:w - k + 1 + i] for i in range(k))
    return sum(taps[i] * rows[i:h - k + 1 + i, :] for i in range(k))


def ssim_map(x: np.ndarray, y: np.ndarray, data_range: float = 1.0) -> np.ndarray:
    """Local SSIM over every fully-contained 11x11 Gaussian window."""
    taps = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_x = _valid_filter(x, taps)
    mu_y = _valid_filter(y, taps)
    sxx = _valid_filter(x * x, taps) - mu_x ** 2
    syy = _valid_filter(y * y, taps) - mu_y ** 2
    sxy = _valid_filter(x * y, taps) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
    return num / den


def ssim(pred: BinaryMask, ref: BinaryMask) -> float:
    _check_shapes(pred, ref)
    if pred.height < SSIM_WINDOW or pred.width < SSIM_WINDOW:
        raise SizeError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {pred.width}x{pred.height}"
        )
    return float(ssim_map(pred.as_float(), ref.as_float()).mean())


def boundary_pixels(mask: BinaryMask) -> np.ndarray:
    """``(N, 2)`` array of ``(x, y)`` foreground pixels with a background 4-neighbour.

    Pixels outside the image count as background.
    """
    fg = mask.pixels
    interior = ndimage.binary_erosion(fg, structure=_FOUR, border_value=0)
    ys, xs = np.nonzero(fg & ~interior)
    return np.stack([xs, ys], axis=1).astype(np.float64)


def _directed_mean(src: np.ndarray, dst: np.ndarray) -> float:
    dist, _ = cKDTree(dst).query(src, k=1)
    return float(np.mean(dist))


def avg_hausdorff(pred: BinaryMask, ref: BinaryMask) -> float:
    """Mean of the two directed mean nearest-boundary distances, in pixels."""
    _check_shapes(pred, ref)
    a = boundary_pixels(pred)
    b = boundary_pixels(ref)
    if len(a) == 0 or len(b) == 0:
        side = "pred" if len(a) == 0 else "ref"
        raise EmptyBoundaryError(f"{side} mask has no boundary pixels")
    return (_directed_mean(a, b) + _directed_mean(b, a)) / 2.0


def _labels(mask: BinaryMask, min_pixels: int) -> tuple[np.ndarray, np.ndarray]:
    """Component label image with small components removed, plus kept ids."""
    labels, n = ndimage.label(mask.pixels, structure=_EIGHT)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    keep = np.flatnonzero(sizes >= min_pixels)
    keep = keep[keep > 0]
    return labels, keep


def object_f1(
    pred: BinaryMask,
    ref: BinaryMask,
    iou_threshold: float = 0.5,
    min_pixels: int | None = None,
) -> float:
    """Detection F1 over vertebra regions matched greedily by IoU.

    Candidate pairs are taken in order of decreasing IoU (ties by pred then
    ref order of first pixel); a pair is accepted when both regions are still
    unmatched and IoU >= ``iou_threshold``. F1 = 2TP / (2TP + FP + FN), and
    1.0 when neither mask has any region.
    """
    _check_shapes(pred, ref)
    if not 0 < iou_threshold <= 1:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    if min_pixels is None:
        min_pixels = scaled_min_pixels(pred.width, pred.height)
    lp, kp = _labels(pred, min_pixels)
    lr, kr = _labels(ref, min_pixels)
    n_pred, n_ref = len(kp), len(kr)
    if n_pred == 0 and n_ref == 0:
        return 1.0
    if n_pred == 0 or n_ref == 0:
        return 0.0

    # Remap kept components to 1..n; dropped ones to 0.
    map_p = np.zeros(lp.max() + 1, dtype=np.int64)
    map_p[kp] = np.arange(1, n_pred + 1)
    map_r = np.zeros(lr.max() + 1, dtype=np.int64)
    map_r[kr] = np.arange(1, n_ref + 1)
    ip = map_p[lp].ravel()
    ir = map_r[lr].ravel()
    size_p = np.bincount(ip, minlength=n_pred + 1)
    size_r = np.bincount(ir, minlength=n_ref + 1)
    both = (ip > 0) & (ir > 0)
    inter = np.bincount(ip[both] * (n_ref + 1) + ir[both], minlength=(n_pred + 1) * (n_ref + 1))
    inter = inter.reshape(n_pred + 1, n_ref + 1)

    pairs = []
    for a, b in zip(*np.nonzero(inter)):
        i = int(inter[a, b])
        iou = i / (size_p[a] + size_r[b] - i)
        pairs.append((-iou, int(a), int(b)))
    pairs.sort()
    used_p, used_r = set(), set()
    tp = 0
    for neg_iou, a, b in pairs:
        if -neg_iou < iou_threshold:
            break
        if a in used_p or b in used_r:
            continue
        used_p.add(a)
        used_r.add(b)
        tp += 1
    fp = n_pred - tp
    fn = n_ref - tp
    return 2 * tp / (2 * tp + fp + fn)


def evaluate(pred: BinaryMask, ref: BinaryMask, iou_threshold: float = 0.5, min_pixels: int | None = None) -> SegMetrics:
    return SegMetrics(
        dice=dice(pred, ref),
        ssim=ssim(pred, ref),
        avg_hausdorff=avg_hausdorff(pred, ref),
        f1=object_f1(pred, ref, iou_threshold, min_pixels),
    )
