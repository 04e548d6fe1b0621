"""Wire frames for single-stage (fixed codebook) and three-stage encoding.

Frame layout, little-endian, 24-byte header::

    0   4  magic "HFR1"
    4   2  codebook id
    6   1  symbol width
    7   1  flags (reserved, must be 0)
    8   8  symbol count
    16  8  payload bit length
    24  .. payload, ceil(bit length / 8) bytes, zero-padded, MSB-first

A single-stage frame names a codebook the receiver already holds and
carries nothing else. The three-stage baseline uses the same header with
id 0xFFFF and ships the codebook's length array next to the frame.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import (
    CorruptFrameError,
    InvalidConfigurationError,
    TruncationError,
    UnknownCodebookError,
)
from .formats import Dtype
from .huffman import NO_ID, BitString, Codebook, build_codebook, decode_with_position, encode
from .registry import Registry
from .stats import histogram
from .symbolize import SymbolStream

__all__ = [
    "FRAME_MAGIC",
    "HEADER_SIZE",
    "INLINE_CODEBOOK_ID",
    "Frame",
    "encode_frame",
    "decode_frame",
    "frame_overhead_bits",
    "three_stage_overhead_bits",
    "encode_three_stage",
    "decode_three_stage",
    "iter_frames",
]

FRAME_MAGIC = b"HFR1"
_HEADER = struct.Struct("<4sHBBQQ")
HEADER_SIZE = _HEADER.size
INLINE_CODEBOOK_ID = NO_ID


@dataclass(frozen=True)
class Frame:
    codebook_id: int
    symbol_width: int
    symbol_count: int
    payload_bit_length: int
    payload: bytes

    def __post_init__(self):
        if len(self.payload) != (self.payload_bit_length + 7) // 8:
            raise CorruptFrameError(
                f"payload is {len(self.payload)} bytes, bit length {self.payload_bit_length} needs "
                f"{(self.payload_bit_length + 7) // 8}"
            )

    @property
    def bits(self) -> BitString:
        return BitString(self.payload, self.payload_bit_length)

    @property
    def nbytes(self) -> int:
        return HEADER_SIZE + len(self.payload)

    def to_bytes(self) -> bytes:
        return _HEADER.pack(
            FRAME_MAGIC, self.codebook_id, self.symbol_width, 0, self.symbol_count, self.payload_bit_length
        ) + self.payload

    @classmethod
    def parse(cls, data: bytes, offset: int = 0) -> tuple["Frame", int]:
        """Read one frame at ``offset``; returns the frame and the offset just past it."""
        if len(data) - offset < HEADER_SIZE:
            raise TruncationError(f"frame header needs {HEADER_SIZE} bytes, {len(data) - offset} available")
        magic, cid, width, flags, count, nbits = _HEADER.unpack_from(data, offset)
        if magic != FRAME_MAGIC:
            raise CorruptFrameError(f"bad frame magic {magic!r}")
        if flags:
            raise CorruptFrameError(f"reserved flags byte is {flags:#x}, must be 0")
        if not 1 <= width <= 16:
            raise CorruptFrameError(f"invalid symbol width {width}")
        start = offset + HEADER_SIZE
        end = start + (nbits + 7) // 8
        if end > len(data):
            raise TruncationError(f"payload needs {(nbits + 7) // 8} bytes, {len(data) - start} available")
        return cls(cid, width, count, nbits, bytes(data[start:end])), end

    @classmethod
    def from_bytes(cls, data: bytes) -> "Frame":
        frame, end = cls.parse(data)
        if end != len(data):
            raise CorruptFrameError(f"{len(data) - end} unexpected bytes after frame")
        return frame


def iter_frames(data: bytes) -> Iterator[Frame]:
    """Frames from a plain concatenation."""
    pos = 0
    while pos < len(data):
        frame, pos = Frame.parse(data, pos)
        yield frame


def frame_overhead_bits() -> int:
    return HEADER_SIZE * 8


def three_stage_overhead_bits(symbol_width: int) -> int:
    """Header plus one length byte per alphabet symbol."""
    return frame_overhead_bits() + (1 << symbol_width) * 8


def _frame_from_bits(codebook_id: int, stream: SymbolStream, bits: BitString) -> Frame:
    return Frame(codebook_id, stream.symbol_width, len(stream), bits.nbits, bits.data)


def encode_frame(stream: SymbolStream, registry: Registry,
                 candidate_ids: Optional[Sequence[int]] = None, *,
                 codebook_id: Optional[int] = None) -> Frame:
    """Encode with a pre-built registry codebook.

    By default the symbol histogram picks the best of ``candidate_ids``
    (every built codebook of the stream's dtype when omitted). Passing
    ``codebook_id`` skips selection and uses that codebook directly.
    The receiver learns the dtype from the codebook's kind, so it must match.
    """
    if codebook_id is None:
        if candidate_ids is None:
            candidate_ids = registry.built_ids(stream.symbol_width, stream.source_dtype)
            if not candidate_ids:
                raise UnknownCodebookError(f"registry has no built {stream.source_dtype} codebook")
        codebook_id, _ = registry.select_codebook(histogram(stream), candidate_ids)
    codebook = registry.codebook(codebook_id)
    kind = registry.kind(codebook_id)
    if kind.dtype is not stream.source_dtype:
        raise InvalidConfigurationError(
            f"codebook {codebook_id} belongs to {kind.dtype} kind {kind.name!r}, stream is {stream.source_dtype}"
        )
    if codebook.symbol_width != stream.symbol_width:
        raise InvalidConfigurationError(
            f"codebook {codebook_id} has width {codebook.symbol_width}, stream has {stream.symbol_width}"
        )
    return _frame_from_bits(codebook_id, stream, encode(stream, codebook))


def _decode_payload(frame: Frame, codebook: Codebook) -> np.ndarray:
    if codebook.symbol_width != frame.symbol_width:
        raise CorruptFrameError(
            f"frame width {frame.symbol_width} does not match codebook width {codebook.symbol_width}"
        )
    if frame.payload_bit_length % 8:
        pad = frame.payload[-1] & ((1 << (8 - frame.payload_bit_length % 8)) - 1)
        if pad:
            raise CorruptFrameError("padding bits after the payload must be zero")
    symbols, used = decode_with_position(frame.bits, codebook, frame.symbol_count)
    if used != frame.payload_bit_length:
        raise CorruptFrameError(
            f"decoded {frame.symbol_count} symbols from {used} bits, header says {frame.payload_bit_length}"
        )
    return symbols


def decode_frame(frame: Frame, registry: Registry, shard_id=None) -> SymbolStream:
    """Inverse of :func:`encode_frame` for any holder of the same registry."""
    if frame.codebook_id == INLINE_CODEBOOK_ID:
        raise UnknownCodebookError("frame carries an inline codebook; use decode_three_stage")
    codebook = registry.codebook(frame.codebook_id)
    kind = registry.kind(frame.codebook_id)
    symbols = _decode_payload(frame, codebook)
    return SymbolStream(symbols, frame.symbol_width, kind.dtype, shard_id)


def encode_three_stage(stream: SymbolStream) -> tuple[Frame, bytes]:
    """Baseline: count, build a per-stream code, encode; the lengths travel with the frame."""
    if len(stream) == 0:
        raise InvalidConfigurationError("three-stage encoding needs a non-empty stream")
    codebook = build_codebook(histogram(stream))
    frame = _frame_from_bits(INLINE_CODEBOOK_ID, stream, encode(stream, codebook))
    return frame, codebook.lengths.astype(np.uint8).tobytes()


def decode_three_stage(frame: Frame, lengths: bytes, source_dtype: Dtype, shard_id=None) -> SymbolStream:
    if len(lengths) != 1 << frame.symbol_width:
        raise CorruptFrameError(
            f"expected {1 << frame.symbol_width} code lengths, got {len(lengths)}"
        )
    try:
        codebook = Codebook.from_lengths(np.frombuffer(lengths, dtype=np.uint8), frame.symbol_width)
    except ValueError as exc:
        raise CorruptFrameError(f"inline codebook is invalid: {exc}") from None
    symbols = _decode_payload(frame, codebook)
    return SymbolStream(symbols, frame.symbol_width, source_dtype, shard_id)
