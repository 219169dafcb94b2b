"""Brute-force reference implementations used only by the tests.

Each one is written independently of the library code it checks: plain
Python loops, exhaustive enumeration, no shared helpers.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np


def components(grid) -> list[set]:
    """8-connected foreground components by breadth-first flood fill."""
    g = np.asarray(grid, dtype=bool)
    h, w = g.shape
    seen = set()
    out = []
    for y in range(h):
        for x in range(w):
            if not g[y, x] or (x, y) in seen:
                continue
            comp = set()
            queue = deque([(x, y)])
            seen.add((x, y))
            while queue:
                cx, cy = queue.popleft()
                comp.add((cx, cy))
                for dx in (-1, 0, 1):
                    for dy in (-1, 0, 1):
                        nx, ny = cx + dx, cy + dy
                        if 0 <= nx < w and 0 <= ny < h and g[ny, nx] and (nx, ny) not in seen:
                            seen.add((nx, ny))
                            queue.append((nx, ny))
            out.append(comp)
    return out


def boundary_set(grid) -> set:
    """Foreground pixels with at least one background 4-neighbour (outside is background)."""
    g = np.asarray(grid, dtype=bool)
    h, w = g.shape
    out = set()
    for y in range(h):
        for x in range(w):
            if not g[y, x]:
                continue
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nx, ny = x + dx, y + dy
                if not (0 <= nx < w and 0 <= ny < h) or not g[ny, nx]:
                    out.add((x, y))
                    break
    return out


def hull_vertices(points) -> set:
    """Extreme points: endpoints of every pair with all other points strictly on one side. O(n^3)."""
    pts = [tuple(map(float, p)) for p in points]
    out = set()
    for a, b in itertools.permutations(pts, 2):
        ok = True
        for c in pts:
            if c == a or c == b:
                continue
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= 0:
                ok = False
                break
        if ok:
            out.add(a)
            out.add(b)
    return out


def point_in_convex(poly, p, tol=1e-9) -> bool:
    n = len(poly)
    signs = []
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        signs.append((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]))
    return all(s >= -tol for s in signs) or all(s <= tol for s in signs)


def min_rect_area(points) -> float:
    """Minimum enclosing-rectangle area over every direction defined by a pair of points.

    Every hull edge direction is among these, and each direction yields a
    valid enclosing rectangle, so the minimum is exact.
    """
    pts = [tuple(map(float, p)) for p in points]
    best = math.inf
    for a, b in itertools.combinations(pts, 2):
        dx, dy = b[0] - a[0], b[1] - a[1]
        n = math.hypot(dx, dy)
        if n == 0:
            continue
        ux, uy = dx / n, dy / n
        s = [p[0] * ux + p[1] * uy for p in pts]
        t = [-p[0] * uy + p[1] * ux for p in pts]
        best = min(best, (max(s) - min(s)) * (max(t) - min(t)))
    return best


def dice(p, r) -> float:
    P = {(x, y) for y, row in enumerate(np.asarray(p)) for x, v in enumerate(row) if v}
    R = {(x, y) for y, row in enumerate(np.asarray(r)) for x, v in enumerate(row) if v}
    if not P and not R:
        return 1.0
    return 2 * len(P & R) / (len(P) + len(R))


def avg_hausdorff(p, r) -> float:
    """Exhaustive all-pairs distance matrix between the two boundary sets."""
    A = np.array(sorted(boundary_set(p)), dtype=np.float64)
    B = np.array(sorted(boundary_set(r)), dtype=np.float64)
    d = np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2))
    return (d.min(axis=1).mean() + d.min(axis=0).mean()) / 2


def object_f1(p, r, iou_threshold=0.5, min_pixels=1) -> float:
    P = [c for c in components(p) if len(c) >= min_pixels]
    R = [c for c in components(r) if len(c) >= min_pixels]
    if not P and not R:
        return 1.0
    pairs = []
    for i, a in enumerate(P):
        for j, b in enumerate(R):
            inter = len(a & b)
            if inter:
                pairs.append((inter / len(a | b), i, j))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    up, ur, tp = set(), set(), 0
    for iou, i, j in pairs:
        if iou >= iou_threshold and i not in up and j not in ur:
            up.add(i)
            ur.add(j)
            tp += 1
    fp, fn = len(P) - tp, len(R) - tp
    return 2 * tp / (2 * tp + fp + fn)


def ssim(x, y, size=11, sigma=1.5, k1=0.01, k2=0.03, L=1.0) -> float:
    """Direct evaluation of the SSIM formula at every valid window position."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    g = [math.exp(-((i - (size - 1) / 2) ** 2) / (2 * sigma * sigma)) for i in range(size)]
    s = sum(g)
    g = [v / s for v in g]
    win = np.array([[g[i] * g[j] for j in range(size)] for i in range(size)])
    h, w = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            px = x[i:i + size, j:j + size]
            py = y[i:i + size, j:j + size]
            mx = float((win * px).sum())
            my = float((win * py).sum())
            vx = float((win * (px - mx) ** 2).sum())
            vy = float((win * (py - my) ** 2).sum())
            cxy = float((win * (px - mx) * (py - my)).sum())
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return sum(vals) / len(vals)


def conv2d(x, w, b):
    """Zero-padded stride-1 cross-correlation by explicit loops."""
    x = np.asarray(x, dtype=np.float64)
    c_in, h, wd = x.shape
    c_out, _, k, _ = w.shape
    pad = k // 2
    out = np.zeros((c_out, h, wd))
    for o in range(c_out):
        for i in range(h):
            for j in range(wd):
                acc = float(b[o])
                for c in range(c_in):
                    for di in range(k):
                        for dj in range(k):
                            ii, jj = i + di - pad, j + dj - pad
                            if 0 <= ii < h and 0 <= jj < wd:
                                acc += float(w[o, c, di, dj]) * float(x[c, ii, jj])
                out[o, i, j] = acc
    return out


def best_pair(upper, lower, gap=3):
    """All valid (u, l) pairs; max theta, then larger gap, then smaller l."""
    cands = []
    n = len(upper)
    for u in range(n):
        for l in range(n):
            if u - l >= gap:
                d = abs(upper[u] - lower[l]) % 180.0
                cands.append((min(d, 180.0 - d), u - l, -l, u, l))
    theta, _, _, u, l = max(cands)
    return u, l, theta


def finite_difference(f, x, h=1e-5):
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.astype(np.float64).copy()
        xm = x.astype(np.float64).copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g
