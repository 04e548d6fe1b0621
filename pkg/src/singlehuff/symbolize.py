"""Turning raw shard bytes into fixed-width symbol streams and back.

Raw layouts (the same ones used inside ``.shard`` files):

* bf16: little-endian 16-bit words; each word becomes two 8-bit symbols,
  low byte first, in one interleaved stream
* e4m3: one code per byte
* e3m2 / e2m3: one 6-bit code per byte, upper two bits zero
* e2m1: two 4-bit codes per byte, low nibble first
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidConfigurationError, MalformedInputError
from .formats import Dtype

__all__ = [
    "ShardId",
    "SymbolStream",
    "SYMBOL_WIDTHS",
    "default_symbol_width",
    "symbolize",
    "desymbolize",
    "symbols_to_elements",
]

SYMBOL_WIDTHS = (4, 6, 8)

_SHARD_ID_RE = re.compile(r"^(?P<kind>[^/]+)/L(?P<layer>\d+)/S(?P<shard>\d+)$")


@dataclass(frozen=True, order=True)
class ShardId:
    """Identifies a shard by tensor kind, layer and shard index."""

    kind: str
    layer: int
    shard: int

    def __str__(self) -> str:
        return f"{self.kind}/L{self.layer:02d}/S{self.shard:03d}"

    @classmethod
    def parse(cls, text: str) -> "ShardId":
        m = _SHARD_ID_RE.match(text)
        if not m:
            raise ValueError(f"not a shard id: {text!r}")
        return cls(m["kind"], int(m["layer"]), int(m["shard"]))


@dataclass(frozen=True, eq=False)
class SymbolStream:
    """Fixed-width symbols with their provenance.

    ``symbols`` is held as a read-only numpy array (uint8 for widths up to 8).
    """

    symbols: np.ndarray
    symbol_width: int
    source_dtype: Dtype
    shard_id: Optional[object] = field(default=None)

    def __post_init__(self):
        if not 1 <= self.symbol_width <= 16:
            raise InvalidConfigurationError(f"unsupported symbol width {self.symbol_width}")
        arr = np.asarray(self.symbols)
        if arr.ndim != 1:
            arr = arr.reshape(-1)
        if arr.size and (arr.dtype.kind not in "ui" or arr.min() < 0 or arr.max() >= 1 << self.symbol_width):
            raise InvalidConfigurationError(
                f"symbols must be integers in [0, {1 << self.symbol_width})"
            )
        arr = arr.astype(np.uint8 if self.symbol_width <= 8 else np.uint16)
        arr.flags.writeable = False
        object.__setattr__(self, "symbols", arr)
        object.__setattr__(self, "source_dtype", Dtype.parse(self.source_dtype))

    def __len__(self) -> int:
        return int(self.symbols.size)

    def __eq__(self, other):
        if not isinstance(other, SymbolStream):
            return NotImplemented
        return (
            self.symbol_width == other.symbol_width
            and self.source_dtype == other.source_dtype
            and self.shard_id == other.shard_id
            and np.array_equal(self.symbols, other.symbols)
        )

    __hash__ = None

    @property
    def element_count(self) -> int:
        if self.source_dtype is Dtype.BF16 and self.symbol_width == 8:
            return len(self) // 2
        return len(self)


def default_symbol_width(dtype: Dtype) -> int:
    dtype = Dtype.parse(dtype)
    return 8 if dtype is Dtype.BF16 else dtype.bit_width


def _check_width(dtype: Dtype, symbol_width: int) -> None:
    if symbol_width not in SYMBOL_WIDTHS:
        raise InvalidConfigurationError(f"symbol width must be one of {SYMBOL_WIDTHS}, got {symbol_width}")
    if symbol_width != default_symbol_width(dtype):
        raise InvalidConfigurationError(
            f"{dtype} data needs symbol width {default_symbol_width(dtype)}, got {symbol_width}"
        )


def symbolize(raw, dtype: Dtype, symbol_width: Optional[int] = None, *,
              element_count: Optional[int] = None, shard_id=None) -> SymbolStream:
    """Split raw shard bytes into a :class:`SymbolStream`.

    ``element_count`` only matters for e2m1, where a final half-used byte
    would otherwise be read as two codes; it defaults to two per byte.
    """
    dtype = Dtype.parse(dtype)
    if symbol_width is None:
        symbol_width = default_symbol_width(dtype)
    _check_width(dtype, symbol_width)
    buf = np.frombuffer(bytes(raw), dtype=np.uint8)

    if dtype is Dtype.BF16:
        if buf.size % 2:
            raise MalformedInputError(f"bf16 data must have an even byte count, got {buf.size}")
        symbols = buf
        if element_count is not None and element_count * 2 != buf.size:
            raise MalformedInputError("element count does not match bf16 byte count")
    elif dtype is Dtype.E4M3:
        symbols = buf
    elif symbol_width == 6:
        if np.any(buf >> 6):
            raise MalformedInputError("6-bit codes must leave the upper two bits of each byte zero")
        symbols = buf
    else:
        symbols = np.empty(buf.size * 2, dtype=np.uint8)
        symbols[0::2] = buf & 0x0F
        symbols[1::2] = buf >> 4
        if element_count is not None:
            if element_count not in (symbols.size, symbols.size - 1) or element_count < 0:
                raise MalformedInputError("element count does not match packed e2m1 byte count")
            if element_count < symbols.size and symbols[-1] != 0:
                raise MalformedInputError("unused trailing nibble must be zero")
            symbols = symbols[:element_count]

    if element_count is not None and dtype is not Dtype.BF16 and len(symbols) != element_count:
        raise MalformedInputError(f"expected {element_count} elements, found {symbols.size}")
    return SymbolStream(symbols.copy(), symbol_width, dtype, shard_id)


def desymbolize(stream: SymbolStream) -> bytes:
    """Inverse of :func:`symbolize`: rebuild the raw byte layout."""
    _check_width(stream.source_dtype, stream.symbol_width)
    s = stream.symbols
    if stream.source_dtype is Dtype.BF16:
        if s.size % 2:
            raise MalformedInputError("bf16 stream must hold an even number of byte symbols")
        return s.astype(np.uint8).tobytes()
    if stream.symbol_width in (6, 8):
        return s.astype(np.uint8).tobytes()
    padded = s.astype(np.uint8)
    if padded.size % 2:
        padded = np.append(padded, np.uint8(0))
    return (padded[0::2] | (padded[1::2] << 4)).astype(np.uint8).tobytes()


def symbols_to_elements(stream: SymbolStream) -> np.ndarray:
    """Element values as integer bit patterns (uint16 for bf16, uint8 otherwise)."""
    if stream.source_dtype is Dtype.BF16:
        return np.frombuffer(desymbolize(stream), dtype="<u2").astype(np.uint16)
    return stream.symbols.astype(np.uint8)
