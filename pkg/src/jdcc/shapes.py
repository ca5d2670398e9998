"""Synthetic binary shapes for desk-scale experiments.

Each generator returns a short sequence of frames containing one object
that drifts by a pixel or two between frames, so earlier frames can serve
as training data for coding the later ones.
"""

from __future__ import annotations

import numpy as np

from .mask import GridMask

KINDS = ("rect", "circle", "lshape", "blob")


def rectangle_mask(size: int, corner: tuple[int, int], w: int, h: int) -> GridMask:
    pix = np.zeros((size, size), dtype=bool)
    i, j = corner
    pix[i : i + h, j : j + w] = True
    return GridMask(pix)


def circle_mask(size: int, center: tuple[float, float], radius: float) -> GridMask:
    ii, jj = np.mgrid[0:size, 0:size]
    ci, cj = center
    return GridMask((ii - ci) ** 2 + (jj - cj) ** 2 <= radius**2)


def l_shape_mask(size: int, corner: tuple[int, int], w: int, h: int) -> GridMask:
    """A w x h rectangle with its upper-right quadrant removed."""
    pix = np.zeros((size, size), dtype=bool)
    i, j = corner
    pix[i : i + h, j : j + w] = True
    pix[i : i + h // 2, j + w // 2 : j + w] = False
    return GridMask(pix)


def blob_mask(size: int, corner: tuple[int, int], w: int, h: int, seed: int = 0) -> GridMask:
    """Rectilinear blob: a rectangle with axis-aligned bumps and notches.

    Bump spans and depths are a few pixels, so the boundary keeps long
    straight runs with occasional features that smoothing can trade away.
    """
    rng = np.random.default_rng(seed)
    pix = np.zeros((size, size), dtype=bool)
    i, j = corner
    pix[i : i + h, j : j + w] = True
    n_feat = int(rng.integers(2, 5))
    for _ in range(n_feat):
        side = int(rng.integers(4))
        span = int(rng.integers(5, 10))
        deep = int(rng.integers(1, 3))
        notch = bool(rng.integers(2))
        if side in (0, 1):  # top or bottom
            c0 = int(rng.integers(j + 2, max(j + 3, j + w - span - 2)))
            if side == 0:
                rows = slice(i, i + deep) if notch else slice(i - deep, i)
            else:
                rows = slice(i + h - deep, i + h) if notch else slice(i + h, i + h + deep)
            pix[rows, c0 : c0 + span] = not notch
        else:  # left or right
            r0 = int(rng.integers(i + 2, max(i + 3, i + h - span - 2)))
            if side == 2:
                cols = slice(j, j + deep) if notch else slice(j - deep, j)
            else:
                cols = slice(j + w - deep, j + w) if notch else slice(j + w, j + w + deep)
            pix[r0 : r0 + span, cols] = not notch
    return GridMask(pix)


def shape_frames(kind: str, size: int = 64, frames: int = 3, seed: int = 0) -> list[GridMask]:
    """Frames of one drifting shape; frame t is frame t-1 shifted by one pixel."""
    if kind not in KINDS:
        raise ValueError(f"unknown shape kind {kind!r}; expected one of {KINDS}")
    if size < 32:
        raise ValueError("frame size must be at least 32")
    rng = np.random.default_rng(seed)
    # keep a margin so the drift never clips the object
    margin = size // 4
    w = int(rng.integers(size // 3, size // 2))
    h = int(rng.integers(size // 3, size // 2))
    i0 = int(rng.integers(margin, size - margin - h))
    j0 = int(rng.integers(margin, size - margin - w))
    feature_seed = int(rng.integers(1 << 31))
    steps = rng.integers(-1, 2, size=(frames, 2))
    out = []
    di = dj = 0
    for t in range(frames):
        if t > 0:
            di += int(steps[t, 0])
            dj += int(steps[t, 1])
            di = max(min(di, margin - 4), 4 - margin)
            dj = max(min(dj, margin - 4), 4 - margin)
        if kind == "rect":
            out.append(rectangle_mask(size, (i0 + di, j0 + dj), w, h))
        elif kind == "circle":
            r = min(w, h) / 2
            out.append(circle_mask(size, (i0 + di + h / 2, j0 + dj + w / 2), r))
        elif kind == "blob":
            out.append(blob_mask(size, (i0 + di, j0 + dj), w, h, seed=feature_seed))
        else:
            out.append(l_shape_mask(size, (i0 + di, j0 + dj), w, h))
    return out
