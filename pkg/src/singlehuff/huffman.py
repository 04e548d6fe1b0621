"""Canonical Huffman codebooks: construction, bit-level encoding and decoding.

Only code lengths are kept from the Huffman tree; codewords are then
assigned canonically in (length, symbol) order. A codebook is therefore
fully described by its length array, which is also what gets serialized.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    CodeLengthOverflowError,
    CorruptPayloadError,
    CoverageError,
    EmptyHistogramError,
    InvalidConfigurationError,
    InvalidLengthsError,
    TruncationError,
)
from .stats import Histogram

__all__ = [
    "MAX_CODE_LENGTH",
    "NO_ID",
    "BitString",
    "Codebook",
    "huffman_lengths",
    "build_codebook",
    "canonicalize",
    "kraft_sum",
    "encode",
    "decode",
    "decode_with_position",
]

MAX_CODE_LENGTH = 32
NO_ID = 0xFFFF  # codebook id field value meaning "no registry id"

_CODEBOOK_HEADER = struct.Struct("<4sBBH")
CODEBOOK_MAGIC = b"HUFC"
CODEBOOK_VERSION = 1

_DECODE_CHUNK = 1 << 18


@dataclass(frozen=True)
class BitString:
    """Packed bits, MSB-first within each byte; bits past ``nbits`` are padding."""

    data: bytes
    nbits: int

    def __post_init__(self):
        if self.nbits < 0 or len(self.data) * 8 < self.nbits:
            raise TruncationError(f"{len(self.data)} bytes cannot hold {self.nbits} bits")

    def __len__(self) -> int:
        return self.nbits

    @classmethod
    def from_bits(cls, bits) -> "BitString":
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(np.packbits(bits).tobytes(), int(bits.size))

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.data, dtype=np.uint8), count=self.nbits)

    def __str__(self) -> str:
        return "".join(map(str, self.to_bits().tolist()))


def kraft_sum(lengths) -> float:
    lengths = np.asarray(lengths, dtype=np.int64)
    used = lengths[lengths > 0]
    return float(np.sum(np.ldexp(1.0, -used)))


def _kraft_ok(lengths: np.ndarray) -> bool:
    used = lengths[lengths > 0]
    # exact integer test: sum 2^(32 - len) <= 2^32
    return int(np.sum(np.left_shift(np.int64(1), MAX_CODE_LENGTH - used), dtype=np.int64)) <= 1 << MAX_CODE_LENGTH


def canonicalize(lengths) -> np.ndarray:
    """Canonical codewords for a length array (0 = unassigned symbol).

    Symbols are ordered by (length, symbol); the first gets code 0 and each
    subsequent code is the previous one plus one, shifted left by the
    length increase.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.size and (lengths.min() < 0 or lengths.max() > MAX_CODE_LENGTH):
        raise InvalidLengthsError(f"code lengths must lie in [0, {MAX_CODE_LENGTH}]")
    if not _kraft_ok(lengths):
        raise InvalidLengthsError(f"lengths violate the Kraft inequality (sum = {kraft_sum(lengths)})")
    codes = np.zeros(lengths.size, dtype=np.uint64)
    order = np.lexsort((np.arange(lengths.size), lengths))
    code = 0
    prev_len = 0
    for sym in order:
        length = int(lengths[sym])
        if length == 0:
            continue
        if prev_len:
            code = (code + 1) << (length - prev_len)
        prev_len = length
        codes[sym] = code
    return codes


@dataclass(frozen=True, eq=False)
class Codebook:
    """Immutable canonical code. ``lengths[s] == 0`` means ``s`` has no codeword."""

    symbol_width: int
    lengths: np.ndarray
    codes: np.ndarray
    id: Optional[int] = None

    @classmethod
    def from_lengths(cls, lengths, symbol_width: Optional[int] = None,
                     id: Optional[int] = None) -> "Codebook":
        lengths = np.array(lengths, dtype=np.uint8 if np.max(lengths, initial=0) < 256 else np.int64)
        if symbol_width is None:
            symbol_width = int(lengths.size).bit_length() - 1
        if lengths.size != 1 << symbol_width:
            raise InvalidConfigurationError(
                f"width {symbol_width} needs {1 << symbol_width} lengths, got {lengths.size}"
            )
        if id is not None and not 0 <= id < NO_ID:
            raise InvalidConfigurationError(f"codebook id must be in [0, {NO_ID}), got {id}")
        codes = canonicalize(lengths)
        lengths = lengths.astype(np.uint8)
        lengths.flags.writeable = False
        codes.flags.writeable = False
        return cls(symbol_width, lengths, codes, id)

    def with_id(self, id: Optional[int]) -> "Codebook":
        return Codebook.from_lengths(self.lengths, self.symbol_width, id)

    @property
    def assigned(self) -> np.ndarray:
        return np.flatnonzero(self.lengths)

    @property
    def max_length(self) -> int:
        return int(self.lengths.max(initial=0))

    def codeword(self, symbol: int) -> str:
        length = int(self.lengths[symbol])
        if not length:
            raise CoverageError(symbol)
        return format(int(self.codes[symbol]), f"0{length}b")

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        return (
            self.symbol_width == other.symbol_width
            and self.id == other.id
            and np.array_equal(self.lengths, other.lengths)
        )

    __hash__ = None

    # HUFC: magic, version u8, symbol_width u8, id u16, then one length byte per symbol
    def to_bytes(self) -> bytes:
        head = _CODEBOOK_HEADER.pack(
            CODEBOOK_MAGIC, CODEBOOK_VERSION, self.symbol_width, NO_ID if self.id is None else self.id
        )
        return head + self.lengths.astype(np.uint8).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Codebook":
        if len(data) < _CODEBOOK_HEADER.size:
            raise InvalidLengthsError("truncated codebook header")
        magic, version, width, cid = _CODEBOOK_HEADER.unpack_from(data)
        if magic != CODEBOOK_MAGIC or version != CODEBOOK_VERSION:
            raise InvalidLengthsError("not a version-1 HUFC codebook")
        if not 1 <= width <= 16:
            raise InvalidLengthsError(f"bad symbol width {width}")
        body = data[_CODEBOOK_HEADER.size:]
        if len(body) != 1 << width:
            raise InvalidLengthsError(f"expected {1 << width} length bytes, got {len(body)}")
        return cls.from_lengths(np.frombuffer(body, dtype=np.uint8), width, None if cid == NO_ID else cid)


def huffman_lengths(counts) -> np.ndarray:
    """Optimal prefix-code lengths for ``counts`` (zero counts get length 0).

    Ties between equal weights go to the node created first; leaves are
    created in symbol order before any internal node, so among leaves the
    lower symbol wins.
    """
    counts = np.asarray(counts, dtype=np.int64)
    lengths = np.zeros(counts.size, dtype=np.int64)
    live = np.flatnonzero(counts > 0)
    if live.size == 0:
        raise EmptyHistogramError("cannot build a Huffman code from an all-zero histogram")
    if live.size == 1:
        lengths[live[0]] = 1
        return lengths

    heap = [(int(counts[s]), order, [int(s)]) for order, s in enumerate(live)]
    heapq.heapify(heap)
    created = len(heap)
    while len(heap) > 1:
        w1, _, a = heapq.heappop(heap)
        w2, _, b = heapq.heappop(heap)
        for s in a:
            lengths[s] += 1
        for s in b:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, created, a + b))
        created += 1
    if lengths.max() > MAX_CODE_LENGTH:
        raise CodeLengthOverflowError(
            f"Huffman code needs {lengths.max()} bits, above the {MAX_CODE_LENGTH}-bit cap; smooth the histogram"
        )
    return lengths


def build_codebook(hist: Histogram, id: Optional[int] = None) -> Codebook:
    return Codebook.from_lengths(huffman_lengths(hist.counts), hist.symbol_width, id)


def encode(stream, codebook: Codebook) -> BitString:
    """Concatenate the codewords of ``stream``'s symbols, MSB-first."""
    symbols = np.asarray(getattr(stream, "symbols", stream), dtype=np.int64)
    width = getattr(stream, "symbol_width", codebook.symbol_width)
    if width != codebook.symbol_width:
        raise InvalidConfigurationError(
            f"stream width {width} does not match codebook width {codebook.symbol_width}"
        )
    if symbols.size == 0:
        return BitString(b"", 0)
    if symbols.min() < 0 or symbols.max() >= codebook.lengths.size:
        raise CoverageError(int(symbols[(symbols < 0) | (symbols >= codebook.lengths.size)][0]))
    lens = codebook.lengths.astype(np.int64)[symbols]
    if np.any(lens == 0):
        raise CoverageError(int(symbols[np.argmax(lens == 0)]))
    codes = codebook.codes[symbols]
    total = int(lens.sum())
    # bit j of codeword i sits at starts[i] + j and equals (code >> (len - 1 - j)) & 1
    starts = np.cumsum(lens) - lens
    owner = np.repeat(np.arange(symbols.size), lens)
    j = np.arange(total, dtype=np.int64) - starts[owner]
    shift = (lens[owner] - 1 - j).astype(np.uint64)
    bits = ((codes[owner] >> shift) & np.uint64(1)).astype(np.uint8)
    return BitString(np.packbits(bits).tobytes(), total)


class _DecodeTables:
    """Left-justified canonical codes: they sort in canonical order, so the
    symbol at a bit position is found by a binary search on the next
    ``max_length`` bits."""

    def __init__(self, codebook: Codebook):
        lengths = codebook.lengths.astype(np.int64)
        order = np.lexsort((np.arange(lengths.size), lengths))
        order = order[lengths[order] > 0]
        if order.size == 0:
            raise InvalidConfigurationError("codebook assigns no symbols")
        self.k = int(lengths.max())
        self.symbols = order
        self.lengths = lengths[order]
        self.codes = codebook.codes[order].astype(np.uint64)
        self.left = self.codes << (self.k - self.lengths).astype(np.uint64)

    def lookup(self, bits: np.ndarray, start: int, stop: int):
        """Symbol and code length for every start position in [start, stop); length 0 = no codeword."""
        k = self.k
        seg = bits[start: stop + k]
        if seg.size < stop - start + k:
            seg = np.concatenate([seg, np.zeros(stop - start + k - seg.size, dtype=np.uint8)])
        n = stop - start
        window = np.zeros(n, dtype=np.uint64)
        for i in range(k):
            window = (window << np.uint64(1)) | seg[i: i + n]
        idx = np.searchsorted(self.left, window, side="right") - 1
        safe = np.maximum(idx, 0)
        lens = self.lengths[safe]
        match = (idx >= 0) & ((window >> (k - lens).astype(np.uint64)) == self.codes[safe])
        return self.symbols[safe], np.where(match, lens, 0)


def decode_with_position(bits: BitString, codebook: Codebook, symbol_count: int):
    """Decode ``symbol_count`` symbols; returns ``(symbols, bits_consumed)``."""
    if symbol_count < 0:
        raise InvalidConfigurationError("symbol_count must be non-negative")
    dtype = np.uint8 if codebook.symbol_width <= 8 else np.uint16
    if symbol_count == 0:
        return np.zeros(0, dtype=dtype), 0
    nbits = bits.nbits
    if symbol_count > nbits:
        # every codeword is at least one bit long
        raise TruncationError(f"{nbits} bits cannot hold {symbol_count} symbols")
    tables = _DecodeTables(codebook)
    raw = bits.to_bits()

    out = []
    append = out.append
    pos = 0
    chunk_start = chunk_stop = 0
    sym_list = len_list = ()
    for _ in range(symbol_count):
        if pos >= chunk_stop:
            if pos >= nbits:
                raise TruncationError(f"bit stream exhausted after {len(out)} of {symbol_count} symbols")
            chunk_start, chunk_stop = pos, min(nbits, pos + _DECODE_CHUNK)
            syms, lens = tables.lookup(raw, chunk_start, chunk_stop)
            sym_list, len_list = syms.tolist(), lens.tolist()
        j = pos - chunk_start
        length = len_list[j]
        if length == 0:
            raise CorruptPayloadError(f"no codeword matches the bits at offset {pos}")
        if pos + length > nbits:
            raise TruncationError(f"codeword at offset {pos} runs past the end of the bit stream")
        append(sym_list[j])
        pos += length
    return np.asarray(out, dtype=dtype), pos


def decode(bits: BitString, codebook: Codebook, symbol_count: int) -> np.ndarray:
    """Inverse of :func:`encode`. Padding after the last codeword is ignored."""
    return decode_with_position(bits, codebook, symbol_count)[0]
