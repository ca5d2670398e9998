"""Ternary context tree, PPM probabilities, and rate estimates.

Context labels are stored most-recent-symbol-first, so a node's children
extend its context one symbol further into the past. Each node keeps one
occurrence counter per next symbol; building visits every training symbol
once per context length, skipping the first ``depth`` symbols of each
string so that every counted position has a full-depth history.
"""

from __future__ import annotations

import math
import struct
from typing import Iterable, NamedTuple, Sequence

from .contour import SYMBOLS, DccString
from .exceptions import TreeFormatError

LOG2_3 = math.log2(3.0)

_IDX = {s: i for i, s in enumerate(SYMBOLS)}


class SymbolDistribution(NamedTuple):
    """Conditional probabilities for the three relative symbols."""

    l: float
    s: float
    r: float

    def for_symbol(self, symbol: str) -> float:
        return self[_IDX[symbol]]


class ContextTree:
    """Counting tree over reversed relative-symbol contexts."""

    def __init__(self, counts: dict[str, list[int]], depth: int,
                 training_symbols: int = 0, training_strings: int = 0):
        if "" not in counts:
            counts = {"": [0, 0, 0], **counts}
        self.counts = counts
        self.depth = depth
        self.training_symbols = training_symbols
        self.training_strings = training_strings
        self.build_visits = 0  # counter increments performed during build

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ContextTree)
            and self.depth == other.depth
            and self.counts == other.counts
        )

    def __repr__(self) -> str:
        return f"ContextTree(depth={self.depth}, nodes={len(self.counts)})"

    def node_total(self, label: str) -> int:
        node = self.counts.get(label)
        return 0 if node is None else sum(node)

    def deepest_label(self, label: str) -> str:
        """Longest prefix of ``label`` that is a tree node."""
        d = 0
        while d < len(label) and label[: d + 1] in self.counts:
            d += 1
        return label[:d]

    def distribution_for_label(self, label: str) -> SymbolDistribution:
        """PPM conditional distribution given a reversed history label."""
        w = self.deepest_label(label)
        raw = [self._raw(i, w) for i in range(3)]
        total = raw[0] + raw[1] + raw[2]
        return SymbolDistribution(raw[0] / total, raw[1] / total, raw[2] / total)

    def _raw(self, xi: int, w: str) -> float:
        # Escape recursion: shorten the context from its oldest symbol
        # until the target symbol has been seen; unseen even with the
        # empty context yields the uniform floor.
        scale = 1.0
        while True:
            node = self.counts.get(w)
            total = 0 if node is None else sum(node)
            if total == 0:
                if not w:
                    return scale / 3.0
                w = w[:-1]
                continue
            seen = sum(1 for c in node if c > 0)
            if node[xi] > 0:
                return scale * node[xi] / (seen + total)
            scale *= seen / (seen + total)
            if not w:
                return scale / 3.0
            w = w[:-1]


def max_depth_for(total_symbols: int) -> int:
    """Depth rule: smallest D with 3**D >= total training symbols."""
    if total_symbols < 1:
        raise ValueError("no training data")
    return math.ceil(math.log(total_symbols) / math.log(3.0))


def build_tree(training: Iterable[DccString], depth: int | None = None) -> ContextTree:
    """Count every context of length 1..depth over the training contours.

    The depth defaults to the rule in :func:`max_depth_for` applied to the
    total relative-symbol count. Position ``i`` of each string contributes
    one count per context length only when at least ``depth`` symbols
    precede it, so all counted positions carry a full-depth history.
    """
    seqs = [x.rel for x in training]
    total = sum(len(s) for s in seqs)
    if total < 1:
        raise ValueError("no training data")
    if depth is None:
        depth = max_depth_for(total)
    counts: dict[str, list[int]] = {"": [0, 0, 0]}
    visits = 0
    for s in seqs:
        for i in range(depth, len(s)):
            xi = _IDX[s[i]]
            for k in range(1, depth + 1):
                u = s[i - k : i][::-1]
                node = counts.get(u)
                if node is None:
                    node = [0, 0, 0]
                    counts[u] = node
                node[xi] += 1
                visits += 1
    tree = ContextTree(counts, depth, training_symbols=total, training_strings=len(seqs))
    tree.build_visits = visits
    return tree


def ppm_probability(tree: ContextTree, history: Sequence[str]) -> SymbolDistribution:
    """Next-symbol distribution given the chronological symbol history."""
    label = "".join(reversed(history[-tree.depth :] if tree.depth else ""))
    return tree.distribution_for_label(label)


def estimate_rate(tree: ContextTree, x: DccString, start_index: int = 1) -> float:
    """Model bits for the symbols of ``x`` from edge position ``start_index`` on.

    Positions index edges of the contour; position 1 is the absolute first
    direction, which is header data and never modeled, so the sum runs over
    relative symbols only.
    """
    if start_index < 1:
        raise ValueError("start_index must be >= 1")
    bits = 0.0
    rel = x.rel
    for i in range(max(start_index, 2), len(x) + 1):
        j = i - 2  # relative-symbol index of edge position i
        label = rel[max(0, j - tree.depth) : j][::-1]
        p = tree.distribution_for_label(label)[_IDX[rel[j]]]
        bits -= math.log2(p)
    return bits


class TotalSuffixTree:
    """Closure of the context tree's labels under contiguous substrings.

    Keeping every substring of every context guarantees that truncating a
    history to its longest node prefix never loses a context that a later
    step would need, so DP memo keys can be shortened without changing any
    conditional probability.
    """

    def __init__(self, nodes: frozenset[str], depth: int):
        self.nodes = nodes
        self.depth = depth

    def __contains__(self, label: str) -> bool:
        return label in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def truncate_label(self, label: str) -> str:
        d = 0
        while d < len(label) and label[: d + 1] in self.nodes:
            d += 1
        return label[:d]


def build_tst(tree: ContextTree) -> TotalSuffixTree:
    nodes = {""}
    for u in tree.counts:
        for a in range(len(u)):
            for b in range(a + 1, len(u) + 1):
                nodes.add(u[a:b])
    return TotalSuffixTree(frozenset(nodes), tree.depth)


def truncate_history(tst: TotalSuffixTree, history: Sequence[str]) -> list[str]:
    """Most recent symbols of ``history`` that the suffix tree can still use."""
    label = "".join(reversed(history))
    kept = tst.truncate_label(label)
    return list(reversed(kept))


_MAGIC = b"JCTX"
_VERSION = 1


def serialize_tree(tree: ContextTree) -> bytes:
    """Tree file: magic, version u8, depth u16, node count u32, then
    depth-first records of (path length u8, path symbols, 3 x u32 counts),
    all big-endian."""
    out = bytearray()
    out += _MAGIC
    out += struct.pack(">BHI", _VERSION, tree.depth, len(tree.counts))
    stack = [""]
    while stack:
        label = stack.pop()
        node = tree.counts[label]
        out += struct.pack(">B", len(label))
        out += label.encode("ascii")
        out += struct.pack(">III", *node)
        for sym in reversed(SYMBOLS):  # pop order: l, s, r
            child = label + sym
            if child in tree.counts:
                stack.append(child)
    return bytes(out)


def deserialize_tree(data: bytes) -> ContextTree:
    if len(data) < 11:
        raise TreeFormatError("truncated header", offset=len(data))
    if data[:4] != _MAGIC:
        raise TreeFormatError("bad magic", offset=0)
    version, depth, count = struct.unpack(">BHI", data[4:11])
    if version != _VERSION:
        raise TreeFormatError(f"unsupported version {version}", offset=4)
    pos = 11
    counts: dict[str, list[int]] = {}
    for _ in range(count):
        if pos >= len(data):
            raise TreeFormatError("truncated record", offset=pos)
        plen = data[pos]
        pos += 1
        if pos + plen + 12 > len(data):
            raise TreeFormatError("truncated record", offset=pos)
        label = data[pos : pos + plen].decode("ascii", errors="replace")
        if set(label) - set(SYMBOLS):
            raise TreeFormatError(f"bad path symbols {label!r}", offset=pos)
        if plen > depth:
            raise TreeFormatError("path longer than declared depth", offset=pos)
        pos += plen
        counters = list(struct.unpack(">III", data[pos : pos + 12]))
        pos += 12
        if label in counts:
            raise TreeFormatError(f"duplicate node {label!r}", offset=pos)
        counts[label] = counters
    if pos != len(data):
        raise TreeFormatError("trailing bytes after last record", offset=pos)
    if "" not in counts:
        raise TreeFormatError("missing root record", offset=11)
    for label in counts:
        if label and label[:-1] not in counts:
            raise TreeFormatError(f"orphan node {label!r}", offset=11)
    return ContextTree(counts, depth)
