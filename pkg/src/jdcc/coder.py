"""Arithmetic coding of contour symbol strings under a context tree.

The payload is one continuous binary arithmetic code over the relative
symbols of every contour in order, each symbol coded with the PPM
conditional distribution of its within-contour history. Contour headers
(start point, first direction, closed flag, symbol count) are stored as
plain fields; probabilities are quantized to 16-bit frequency totals with
every symbol floored at one count, so any symbol stays decodable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .context import ContextTree, _IDX
from .contour import SYMBOLS, DccString, Direction
from .exceptions import BitstreamFormatError

_STATE_BITS = 32
_FULL = 1 << _STATE_BITS
_HALF = _FULL >> 1
_QUARTER = _FULL >> 2
_MASK = _FULL - 1
_FREQ_TOTAL = 1 << 16


class ContourMeta(NamedTuple):
    """Header fields for one contour: everything but its symbols."""

    start: tuple[int, int]
    first_dir: Direction
    closed: bool
    n_symbols: int


@dataclass(frozen=True)
class Bitstream:
    """Coded contour set: per-contour headers plus one arithmetic payload."""

    contours: tuple[ContourMeta, ...]
    payload: bytes

    @property
    def total_symbols(self) -> int:
        return sum(c.n_symbols for c in self.contours)

    @property
    def payload_bits(self) -> int:
        return 8 * len(self.payload)

    def to_bytes(self) -> bytes:
        out = bytearray(b"JDCC")
        out += struct.pack(">BI", 1, len(self.contours))
        for c in self.contours:
            m0, n0 = c.start
            if not (0 <= m0 < 65536 and 0 <= n0 < 65536):
                raise ValueError(f"start point {c.start} out of u16 range")
            flags = (int(c.first_dir) << 6) | (int(c.closed) << 5)
            out += struct.pack(">HHBI", m0, n0, flags, c.n_symbols)
        out += self.payload
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < 9:
            raise BitstreamFormatError("truncated header", offset=len(data))
        if data[:4] != b"JDCC":
            raise BitstreamFormatError("bad magic", offset=0)
        version, count = struct.unpack(">BI", data[4:9])
        if version != 1:
            raise BitstreamFormatError(f"unsupported version {version}", offset=4)
        pos = 9
        metas = []
        for _ in range(count):
            if pos + 9 > len(data):
                raise BitstreamFormatError("truncated contour header", offset=pos)
            m0, n0, flags, n_symbols = struct.unpack(">HHBI", data[pos : pos + 9])
            if flags & 0x1F:
                raise BitstreamFormatError("nonzero pad bits", offset=pos + 4)
            metas.append(
                ContourMeta((m0, n0), Direction(flags >> 6), bool(flags & 0x20), n_symbols)
            )
            pos += 9
        return cls(tuple(metas), data[pos:])


class _BitWriter:
    def __init__(self):
        self.buf = bytearray()
        self.acc = 0
        self.nbits = 0

    def write(self, bit: int):
        self.acc = (self.acc << 1) | bit
        self.nbits += 1
        if self.nbits == 8:
            self.buf.append(self.acc)
            self.acc = 0
            self.nbits = 0

    def flush(self) -> bytes:
        while self.nbits:
            self.write(0)
        return bytes(self.buf)


class _BitReader:
    """Reads bits from a byte string; exhaustion yields zero bits."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.acc = 0
        self.nbits = 0

    def read(self) -> int:
        if self.nbits == 0:
            if self.pos >= len(self.data):
                return 0
            self.acc = self.data[self.pos]
            self.pos += 1
            self.nbits = 8
        self.nbits -= 1
        return (self.acc >> self.nbits) & 1


class _Encoder:
    """Binary arithmetic encoder over a 32-bit low/high interval."""

    def __init__(self, out: _BitWriter):
        self.low = 0
        self.high = _MASK
        self.pending = 0
        self.out = out

    def encode(self, cumul: Sequence[int], symbol: int):
        total = cumul[-1]
        span = self.high - self.low + 1
        self.high = self.low + span * cumul[symbol + 1] // total - 1
        self.low = self.low + span * cumul[symbol] // total
        while True:
            if self.high < _HALF:
                self._emit(0)
            elif self.low >= _HALF:
                self._emit(1)
                self.low -= _HALF
                self.high -= _HALF
            elif self.low >= _QUARTER and self.high < 3 * _QUARTER:
                self.pending += 1
                self.low -= _QUARTER
                self.high -= _QUARTER
            else:
                break
            self.low = (self.low << 1) & _MASK
            self.high = ((self.high << 1) | 1) & _MASK

    def _emit(self, bit: int):
        self.out.write(bit)
        for _ in range(self.pending):
            self.out.write(bit ^ 1)
        self.pending = 0

    def finish(self):
        # one disambiguating bit; the decoder pads with zeros
        self.pending += 1
        self._emit(0 if self.low < _QUARTER else 1)


class _Decoder:
    def __init__(self, inp: _BitReader):
        self.low = 0
        self.high = _MASK
        self.code = 0
        self.inp = inp
        for _ in range(_STATE_BITS):
            self.code = (self.code << 1) | inp.read()

    def decode(self, cumul: Sequence[int]) -> int:
        total = cumul[-1]
        span = self.high - self.low + 1
        value = ((self.code - self.low + 1) * total - 1) // span
        symbol = 0
        while cumul[symbol + 1] <= value:
            symbol += 1
        self.high = self.low + span * cumul[symbol + 1] // total - 1
        self.low = self.low + span * cumul[symbol] // total
        while True:
            if self.high < _HALF:
                pass
            elif self.low >= _HALF:
                self.low -= _HALF
                self.high -= _HALF
                self.code -= _HALF
            elif self.low >= _QUARTER and self.high < 3 * _QUARTER:
                self.low -= _QUARTER
                self.high -= _QUARTER
                self.code -= _QUARTER
            else:
                break
            self.low = (self.low << 1) & _MASK
            self.high = ((self.high << 1) | 1) & _MASK
            self.code = ((self.code << 1) | self.inp.read()) & _MASK
        return symbol


def _quantize(dist) -> list[int]:
    """Cumulative 16-bit frequencies with a floor of one per symbol."""
    freqs = [max(1, int(p * (_FREQ_TOTAL - 3))) for p in dist]
    cumul = [0]
    for f in freqs:
        cumul.append(cumul[-1] + f)
    return cumul


def encode(contours: Sequence[DccString], tree: ContextTree) -> Bitstream:
    """Arithmetic-code the contours; the history resets at each contour."""
    writer = _BitWriter()
    enc = _Encoder(writer)
    metas = []
    depth = tree.depth
    for c in contours:
        metas.append(ContourMeta(c.start, c.first_dir, c.closed, len(c.rel)))
        rel = c.rel
        for j, sym in enumerate(rel):
            label = rel[max(0, j - depth) : j][::-1]
            cumul = _quantize(tree.distribution_for_label(label))
            enc.encode(cumul, _IDX[sym])
    enc.finish()
    return Bitstream(tuple(metas), writer.flush())


def decode(bits: Bitstream, tree: ContextTree) -> list[DccString]:
    """Exact inverse of :func:`encode` given the same tree."""
    dec = _Decoder(_BitReader(bits.payload))
    depth = tree.depth
    out = []
    for meta in bits.contours:
        rel = []
        for j in range(meta.n_symbols):
            label = "".join(rel[max(0, j - depth) : j][::-1])
            cumul = _quantize(tree.distribution_for_label(label))
            rel.append(SYMBOLS[dec.decode(cumul)])
        out.append(DccString(meta.start, meta.first_dir, "".join(rel), closed=meta.closed))
    return out


def measure_rate(bits: Bitstream) -> float:
    """Payload bits per coded symbol; headers are excluded."""
    n = bits.total_symbols
    if n == 0:
        raise ValueError("bitstream codes zero symbols")
    return bits.payload_bits / n
