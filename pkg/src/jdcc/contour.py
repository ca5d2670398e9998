"""Differential chain-code contours on the 2D pixel grid.

A contour is an initial lattice point, one absolute compass direction for
the first edge, and a string of relative turns over the alphabet
``{l, s, r}``. Coordinates follow the raster convention: ``m`` grows east,
``n`` grows south, so ``N`` decreases ``n``. Turning left rotates the
heading counterclockwise on screen (``E -> N``), turning right clockwise
(``S -> W``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .exceptions import ContourFormatError

SYMBOLS = "lsr"

_TURN = {"l": -1, "s": 0, "r": 1}


class Direction(IntEnum):
    """Absolute edge heading, N/E/S/W in clockwise order."""

    N = 0
    E = 1
    S = 2
    W = 3


# unit displacement (dm, dn) per heading
DISPLACEMENT = {
    Direction.N: (0, -1),
    Direction.E: (1, 0),
    Direction.S: (0, 1),
    Direction.W: (-1, 0),
}


class Edge(NamedTuple):
    """One unit edge: endpoint coordinate plus the heading that reached it."""

    m: int
    n: int
    d: Direction

    @property
    def endpoint(self) -> tuple[int, int]:
        return (self.m, self.n)


def turn(d: Direction, symbol: str) -> Direction:
    """Rotate heading ``d`` by one relative symbol."""
    return Direction((d + _TURN[symbol]) % 4)


def next_edge(e: Edge, symbol: str) -> Edge:
    """Edge reached from ``e`` by turning ``symbol`` and advancing one unit."""
    d = turn(e.d, symbol)
    dm, dn = DISPLACEMENT[d]
    return Edge(e.m + dm, e.n + dn, d)


@dataclass(frozen=True)
class DccString:
    """A chain-coded contour.

    ``rel`` holds the relative symbols for edges 2..L; the first edge is
    given by ``first_dir``. The contour has ``1 + len(rel)`` edges. For a
    closed contour the head of the last edge coincides with ``start`` and
    ``closed`` is set; the wrap-around edge is not duplicated.
    """

    start: tuple[int, int]
    first_dir: Direction
    rel: str = ""
    closed: bool = False

    def __post_init__(self):
        bad = set(self.rel) - set(SYMBOLS)
        if bad:
            raise ValueError(f"invalid relative symbols {sorted(bad)!r}")

    def __len__(self) -> int:
        """Number of edges."""
        return 1 + len(self.rel)

    def edges(self) -> list[Edge]:
        return realize(self)

    def points(self) -> list[tuple[int, int]]:
        """Start point followed by every edge endpoint (len(self)+1 points)."""
        pts = [self.start]
        pts.extend(e.endpoint for e in realize(self))
        return pts


def realize(x: DccString) -> list[Edge]:
    """Geometric realization of a contour as a list of edges."""
    m, n = x.start
    dm, dn = DISPLACEMENT[x.first_dir]
    e = Edge(m + dm, n + dn, x.first_dir)
    edges = [e]
    for sym in x.rel:
        e = next_edge(e, sym)
        edges.append(e)
    return edges


def chord_deviation(points: Sequence[tuple[int, int]]) -> float:
    """Greatest distance from ``points`` to the line through the first and
    last of them.

    When the first and last point coincide the line is undefined; the
    measure falls back to the greatest Euclidean distance from the first
    point, which is still zero only for a degenerate single point.
    """
    m0, n0 = points[0]
    m1, n1 = points[-1]
    dm = m1 - m0
    dn = n1 - n0
    norm = math.hypot(dm, dn)
    if norm == 0.0:
        return max(math.hypot(m - m0, n - n0) for m, n in points)
    peak = max(abs((m - m0) * dn - (n - n0) * dm) for m, n in points)
    return peak / norm


def straightness(w: str, incoming: Direction = Direction.E) -> float:
    """Straightness of a run of relative symbols.

    The run is realized as ``len(w) + 1`` points: each symbol turns the
    current heading and advances one unit, starting from ``incoming``.
    The choice of ``incoming`` only rotates the point set and therefore
    does not change the value. Returns the chord deviation of the points:
    0 exactly when the walk is a straight segment.
    """
    pts = [(0, 0)]
    m = n = 0
    d = incoming
    for sym in w:
        d = turn(d, sym)
        dm, dn = DISPLACEMENT[d]
        m += dm
        n += dn
        pts.append((m, n))
    return chord_deviation(pts)


def prior_cost(x: DccString, beta: float, span: int = 4) -> float:
    """Geometric prior: ``beta`` times the summed straightness of every
    window of ``span + 1`` consecutive edges.

    Windows are indexed by their final edge position ``i`` running from
    ``span + 1`` to ``len(x)``; contours shorter than ``span + 1`` edges
    contribute nothing. Equals the negative log of the straight-contour
    prior up to the constant ``beta`` scaling.
    """
    L = len(x)
    if beta == 0.0 or L < span + 1:
        return 0.0
    pts = x.points()
    total = 0.0
    for i in range(span + 1, L + 1):
        total += chord_deviation(pts[i - span - 1 : i + 1])
    return beta * total


def distortion(xhat: DccString, x: DccString) -> float:
    """Sum of squared minimum L1 distances from each edge endpoint of
    ``xhat`` to the edge endpoints of ``x``."""
    a = np.array([e.endpoint for e in realize(xhat)], dtype=np.int64)
    b = np.array([e.endpoint for e in realize(x)], dtype=np.int64)
    d = np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2).min(axis=1)
    return float((d.astype(np.float64) ** 2).sum())


@dataclass(frozen=True)
class GridBounds:
    """Inclusive ranges of valid edge endpoint coordinates."""

    m_min: int
    m_max: int
    n_min: int
    n_max: int

    def __post_init__(self):
        if self.m_max < self.m_min or self.n_max < self.n_min:
            raise ValueError("empty bounds")

    @property
    def locations(self) -> int:
        """Number of possible edge endpoint locations."""
        return (self.m_max - self.m_min + 1) * (self.n_max - self.n_min + 1)

    def contains(self, m: int, n: int) -> bool:
        return self.m_min <= m <= self.m_max and self.n_min <= n <= self.n_max

    @classmethod
    def for_frame(cls, width: int, height: int) -> "GridBounds":
        """Bounds of the corner lattice of a width x height pixel frame."""
        return cls(0, width, 0, height)


_DIR_NAMES = {d.name: d for d in Direction}


def write_contours(contours: Iterable[DccString]) -> str:
    """Serialize contours to the stanza text format."""
    stanzas = []
    for c in contours:
        head = f"CONTOUR {c.start[0]} {c.start[1]} {c.first_dir.name} {int(c.closed)}"
        stanzas.append(head + "\n" + c.rel + "\n")
    return "".join(stanzas)


def read_contours(text: str) -> list[DccString]:
    """Parse the stanza text format produced by :func:`write_contours`."""
    lines = text.splitlines()
    contours = []
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        parts = line.split()
        if len(parts) != 5 or parts[0] != "CONTOUR":
            raise ContourFormatError(f"expected CONTOUR header, got {line!r}", offset=i + 1)
        try:
            m0, n0 = int(parts[1]), int(parts[2])
        except ValueError:
            raise ContourFormatError(f"bad coordinates in {line!r}", offset=i + 1) from None
        if parts[3] not in _DIR_NAMES:
            raise ContourFormatError(f"bad direction {parts[3]!r}", offset=i + 1)
        if parts[4] not in ("0", "1"):
            raise ContourFormatError(f"bad closed flag {parts[4]!r}", offset=i + 1)
        if i + 1 >= len(lines):
            raise ContourFormatError("missing symbol line", offset=i + 1)
        rel = lines[i + 1].strip()
        try:
            contours.append(
                DccString((m0, n0), _DIR_NAMES[parts[3]], rel, closed=parts[4] == "1")
            )
        except ValueError as exc:
            raise ContourFormatError(str(exc), offset=i + 2) from None
        i += 2
    return contours
