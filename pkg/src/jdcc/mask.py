"""Binary masks, PGM files, and boundary tracing.

Contours live on the corner lattice between pixels: pixel (row i, col j)
has corners (m, n) with m in {j, j+1} and n in {i, i+1}. Boundary walks
keep object pixels on the right of the travel direction, so outer
boundaries run clockwise on screen and hole boundaries counterclockwise.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .contour import DccString, Direction, realize
from .exceptions import PgmFormatError


class GridMask:
    """A width x height binary pixel grid; pixels[n, m] indexes row n."""

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 2:
            raise ValueError("mask must be 2-D")
        self.pixels = arr.astype(bool)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def copy(self) -> "GridMask":
        return GridMask(self.pixels.copy())

    def __eq__(self, other) -> bool:
        return isinstance(other, GridMask) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"GridMask({self.width}x{self.height}, object={int(self.pixels.sum())}px)"


def read_pgm(data: bytes) -> GridMask:
    """Parse a P2 or P5 PGM; any nonzero sample is object."""
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise PgmFormatError("not a P2/P5 PGM", offset=0)
    magic = data[:2]
    pos = 2

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmFormatError("truncated header", offset=start)
        return data[start:pos]

    try:
        width = int(token())
        height = int(token())
        maxval = int(token())
    except ValueError as exc:
        raise PgmFormatError(f"bad header field: {exc}", offset=pos) from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise PgmFormatError("bad dimensions or maxval", offset=pos)

    if magic == b"P2":
        fields = data[pos:].split()
        if len(fields) < width * height:
            raise PgmFormatError("truncated P2 sample data", offset=pos)
        try:
            arr = np.array(fields[: width * height], dtype=np.int64)
        except ValueError:
            raise PgmFormatError("non-numeric P2 sample", offset=pos) from None
    else:
        pos += 1  # single whitespace after maxval
        bytes_per = 2 if maxval > 255 else 1
        need = width * height * bytes_per
        raw = data[pos : pos + need]
        if len(raw) < need:
            raise PgmFormatError("truncated P5 sample data", offset=pos)
        dtype = ">u2" if bytes_per == 2 else np.uint8
        arr = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    return GridMask(arr.reshape(height, width) != 0)


def write_pgm(mask: GridMask) -> bytes:
    """Encode a mask as a binary P5 PGM (object=255)."""
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode()
    return header + (mask.pixels.astype(np.uint8) * 255).tobytes()


def _boundary_cracks(mask: GridMask) -> dict[tuple[int, int], dict[Direction, tuple[int, int]]]:
    """Directed boundary cracks keyed by tail point.

    Each crack separates an object pixel from background (pixels outside
    the frame count as background) and is oriented with the object on the
    right of travel.
    """
    pix = mask.pixels
    h, w = pix.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = pix
    out: dict[tuple[int, int], dict[Direction, tuple[int, int]]] = {}

    def add(tail, d, head):
        out.setdefault(tail, {})[d] = head

    for i, j in ((int(a), int(b)) for a, b in np.argwhere(pix)):
        if not padded[i, j + 1]:  # background above
            add((j, i), Direction.E, (j + 1, i))
        if not padded[i + 1, j + 2]:  # background east
            add((j + 1, i), Direction.S, (j + 1, i + 1))
        if not padded[i + 2, j + 1]:  # background below
            add((j + 1, i + 1), Direction.W, (j, i + 1))
        if not padded[i + 1, j]:  # background west
            add((j, i + 1), Direction.N, (j, i))
    return out


_START_PREF = (Direction.E, Direction.S, Direction.W, Direction.N)


def trace_contours(mask: GridMask) -> list[DccString]:
    """Extract every closed boundary walk between object and background.

    Walks are deterministic: contours are emitted in raster order (n, m)
    of their topmost-leftmost corner, junctions take the rightmost
    available turn, and each walk is returned as a closed DccString whose
    last edge ends back at the start point.
    """
    cracks = _boundary_cracks(mask)
    remaining = {(pt, d) for pt, dirs in cracks.items() for d in dirs}
    contours = []
    while remaining:
        start = min(remaining, key=lambda c: (c[0][1], c[0][0], _START_PREF.index(c[1])))
        pt, d = start
        dirs = [d]
        head = cracks[pt][d]
        remaining.discard((pt, d))
        while head != start[0]:
            options = cracks[head]
            for delta in (1, 0, -1):  # right, straight, left
                nd = Direction((dirs[-1] + delta) % 4)
                if nd in options and (head, nd) in remaining:
                    break
            else:
                raise AssertionError("boundary walk left the crack set")
            remaining.discard((head, nd))
            dirs.append(nd)
            head = options[nd]
        rel = "".join(
            {-1: "l", 0: "s", 1: "r"}[((b - a + 2) % 4) - 2] for a, b in zip(dirs, dirs[1:])
        )
        contours.append(DccString(start[0], dirs[0], rel, closed=True))
    return contours


def rasterize_contours(contours: Iterable[DccString], width: int, height: int) -> GridMask:
    """Fill the closed contours back into a pixel mask (even-odd rule)."""
    cols_by_row: dict[int, list[int]] = {}
    for c in contours:
        prev = c.start
        for e in realize(c):
            if e.d in (Direction.N, Direction.S):
                row = min(prev[1], e.n)
                cols_by_row.setdefault(row, []).append(e.m)
            prev = e.endpoint
    pix = np.zeros((height, width), dtype=bool)
    for row, cols in cols_by_row.items():
        if not 0 <= row < height:
            continue
        cols.sort()
        for a, b in zip(cols[::2], cols[1::2]):
            pix[row, max(a, 0) : min(b, width)] = True
    return GridMask(pix)
