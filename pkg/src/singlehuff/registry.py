"""Shared set of fixed codebooks, one per tensor kind.

Histograms of past shards are accumulated per kind; codebooks are built
from them off the critical path and identified by a stable 16-bit id. The
registry serializes (counts included) so every node can hold an identical
copy and accumulation can resume after a reload.

Thread-safety: one writer (``accumulate``, ``build``, ``build_all``) or any
number of concurrent readers, enforced by an internal readers-writer lock.
Codebooks handed out are immutable, so a rebuild never affects an encoder
that already holds one.
"""

from __future__ import annotations

import struct
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    CorruptRegistryError,
    InvalidConfigurationError,
    InvalidLengthsError,
    UnknownCodebookError,
)
from .formats import Dtype
from .huffman import NO_ID, Codebook, build_codebook
from .stats import Histogram
from .symbolize import default_symbol_width

__all__ = ["TensorKind", "RegistryEntry", "Registry", "COUNT_LIMIT"]

REGISTRY_MAGIC = b"HREG"
REGISTRY_VERSION = 1
COUNT_LIMIT = 1 << 62


@dataclass(frozen=True)
class TensorKind:
    name: str
    dtype: Dtype
    symbol_width: Optional[int] = None

    def __post_init__(self):
        if not self.name:
            raise InvalidConfigurationError("tensor kind name must be non-empty")
        if len(self.name.encode("utf-8")) > 255:
            raise InvalidConfigurationError("tensor kind name must fit in 255 UTF-8 bytes")
        dtype = Dtype.parse(self.dtype)
        object.__setattr__(self, "dtype", dtype)
        width = default_symbol_width(dtype) if self.symbol_width is None else self.symbol_width
        if width != default_symbol_width(dtype):
            raise InvalidConfigurationError(f"{dtype} needs symbol width {default_symbol_width(dtype)}")
        object.__setattr__(self, "symbol_width", width)


@dataclass
class RegistryEntry:
    kind: TensorKind
    counts: np.ndarray  # uint64 accumulator
    codebook: Optional[Codebook] = None

    @property
    def histogram(self) -> Histogram:
        return Histogram(self.counts.astype(np.int64), self.kind.symbol_width)


class _RWLock:
    def __init__(self):
        self._cond = threading.Condition(threading.Lock())
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


def _halve_until_fits(counts: np.ndarray) -> np.ndarray:
    # ceil-halving keeps every nonzero count >= 1
    while counts.max(initial=0) > COUNT_LIMIT:
        counts = (counts + np.uint64(1)) // np.uint64(2)
    return counts


class Registry:
    def __init__(self):
        self._entries: dict[int, RegistryEntry] = {}
        self._by_name: dict[str, int] = {}
        self._next_id = 0
        self._lock = _RWLock()

    # -- queries -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, codebook_id) -> bool:
        return codebook_id in self._entries

    @property
    def ids(self) -> list[int]:
        with self._lock.read():
            return sorted(self._entries)

    @property
    def next_id(self) -> int:
        return self._next_id

    def entry(self, codebook_id: int) -> RegistryEntry:
        with self._lock.read():
            try:
                e = self._entries[codebook_id]
            except KeyError:
                raise UnknownCodebookError(f"no registry entry with id {codebook_id}") from None
            return RegistryEntry(e.kind, e.counts.copy(), e.codebook)

    def kind(self, codebook_id: int) -> TensorKind:
        return self.entry(codebook_id).kind

    def id_for(self, kind) -> int:
        name = kind.name if isinstance(kind, TensorKind) else str(kind)
        with self._lock.read():
            try:
                return self._by_name[name]
            except KeyError:
                raise UnknownCodebookError(f"no registry entry for tensor kind {name!r}") from None

    def histogram(self, codebook_id: int) -> Histogram:
        return self.entry(codebook_id).histogram

    def codebook(self, codebook_id: int) -> Codebook:
        """The built codebook snapshot for ``codebook_id``."""
        with self._lock.read():
            e = self._entries.get(codebook_id)
            if e is None:
                raise UnknownCodebookError(f"no registry entry with id {codebook_id}")
            if e.codebook is None:
                raise UnknownCodebookError(f"codebook {codebook_id} has not been built")
            return e.codebook

    def built_ids(self, symbol_width: Optional[int] = None, dtype: Optional[Dtype] = None) -> list[int]:
        with self._lock.read():
            return sorted(
                i for i, e in self._entries.items()
                if e.codebook is not None
                and (symbol_width is None or e.kind.symbol_width == symbol_width)
                and (dtype is None or e.kind.dtype is Dtype.parse(dtype))
            )

    # -- writers -----------------------------------------------------------

    def accumulate(self, kind: TensorKind, hist: Histogram) -> "Registry":
        """Add ``hist`` into the kind's running histogram, creating the entry if needed."""
        if hist.symbol_width != kind.symbol_width:
            raise InvalidConfigurationError(
                f"histogram width {hist.symbol_width} does not match kind {kind.name!r} width {kind.symbol_width}"
            )
        with self._lock.write():
            cid = self._by_name.get(kind.name)
            if cid is None:
                if self._next_id >= NO_ID:
                    raise InvalidConfigurationError("registry is full")
                cid = self._next_id
                self._next_id += 1
                self._by_name[kind.name] = cid
                self._entries[cid] = RegistryEntry(kind, np.zeros(1 << kind.symbol_width, dtype=np.uint64))
            entry = self._entries[cid]
            if entry.kind != kind:
                raise InvalidConfigurationError(
                    f"tensor kind {kind.name!r} is registered with {entry.kind.dtype}, not {kind.dtype}"
                )
            incoming = _halve_until_fits(hist.counts.astype(np.uint64))
            base = _halve_until_fits(entry.counts)
            # both operands are <= 2^62, so the sum cannot wrap a uint64
            entry.counts = _halve_until_fits(base + incoming)
        return self

    def accumulate_many(self, kind: TensorKind, hists: Iterable[Histogram]) -> "Registry":
        for h in hists:
            self.accumulate(kind, h)
        return self

    def build(self, codebook_id: int) -> Codebook:
        """Build (or rebuild) the codebook from the add-one smoothed histogram."""
        with self._lock.write():
            entry = self._entries.get(codebook_id)
            if entry is None:
                raise UnknownCodebookError(f"no registry entry with id {codebook_id}")
            if not entry.counts.any():
                raise InvalidConfigurationError(f"entry {codebook_id} has no accumulated counts")
            smoothed = Histogram(entry.counts.astype(np.int64) + 1, entry.kind.symbol_width)
            codebook = build_codebook(smoothed, id=codebook_id)
            entry.codebook = codebook
            return codebook

    def build_all(self) -> list[Codebook]:
        return [self.build(i) for i in self.ids]

    # -- selection ---------------------------------------------------------

    def select_codebook(self, hist: Histogram, candidate_ids: Optional[Sequence[int]] = None):
        """Pick the candidate that encodes ``hist`` in the fewest bits.

        Returns ``(id, estimated_bits)``; ties go to the lowest id. With no
        candidates given, every built codebook of matching width competes.
        """
        if candidate_ids is None:
            candidate_ids = self.built_ids(hist.symbol_width)
        candidate_ids = list(candidate_ids)
        if not candidate_ids:
            raise InvalidConfigurationError("select_codebook needs at least one candidate")
        counts = [int(c) for c in hist.counts]
        best = None
        for cid in sorted(candidate_ids):
            cb = self.codebook(cid)
            if cb.symbol_width != hist.symbol_width:
                raise InvalidConfigurationError(
                    f"candidate {cid} has width {cb.symbol_width}, histogram has {hist.symbol_width}"
                )
            bits = sum(c * l for c, l in zip(counts, cb.lengths.tolist()) if c)
            if any(c and not l for c, l in zip(counts, cb.lengths.tolist())):
                continue  # cannot encode this data at all
            if best is None or bits < best[1]:
                best = (cid, bits)
        if best is None:
            raise InvalidConfigurationError("no candidate codebook covers every symbol in the histogram")
        return best

    # -- serialization -----------------------------------------------------

    def export(self) -> bytes:
        with self._lock.read():
            out = [REGISTRY_MAGIC, struct.pack("<BH", REGISTRY_VERSION, len(self._entries))]
            for cid in sorted(self._entries):
                e = self._entries[cid]
                name = e.kind.name.encode("utf-8")
                out.append(struct.pack("<HB", cid, len(name)))
                out.append(name)
                out.append(struct.pack("<BB", e.kind.dtype.value, e.kind.symbol_width))
                out.append(e.counts.astype("<u8").tobytes())
                lengths = e.codebook.lengths if e.codebook is not None else np.zeros(e.counts.size, np.uint8)
                out.append(lengths.astype(np.uint8).tobytes())
            return b"".join(out)

    @classmethod
    def import_(cls, data: bytes) -> "Registry":
        """Rebuild a registry from :meth:`export` output."""
        data = bytes(data)
        reg = cls()
        pos = 0

        def take(n: int) -> bytes:
            nonlocal pos
            if pos + n > len(data):
                raise CorruptRegistryError(f"registry truncated at byte {pos} (need {n} more)")
            chunk = data[pos: pos + n]
            pos += n
            return chunk

        if take(4) != REGISTRY_MAGIC:
            raise CorruptRegistryError("bad registry magic")
        version, count = struct.unpack("<BH", take(3))
        if version != REGISTRY_VERSION:
            raise CorruptRegistryError(f"unsupported registry version {version}")
        for _ in range(count):
            cid, name_len = struct.unpack("<HB", take(3))
            try:
                name = take(name_len).decode("utf-8")
                dtype_byte, width = struct.unpack("<BB", take(2))
                kind = TensorKind(name, Dtype(dtype_byte), width)
            except (UnicodeDecodeError, ValueError) as exc:
                raise CorruptRegistryError(f"bad entry {cid}: {exc}") from None
            if cid in reg._entries or name in reg._by_name or cid == NO_ID:
                raise CorruptRegistryError(f"duplicate or reserved entry id/name ({cid}, {name!r})")
            size = 1 << width
            counts = np.frombuffer(take(8 * size), dtype="<u8").astype(np.uint64)
            lengths = np.frombuffer(take(size), dtype=np.uint8)
            codebook = None
            if lengths.any():
                try:
                    codebook = Codebook.from_lengths(lengths, width, cid)
                except InvalidLengthsError as exc:
                    raise CorruptRegistryError(f"entry {cid}: {exc}") from None
            reg._entries[cid] = RegistryEntry(kind, counts, codebook)
            reg._by_name[name] = cid
        if pos != len(data):
            raise CorruptRegistryError(f"{len(data) - pos} trailing bytes after registry")
        reg._next_id = max(reg._entries, default=-1) + 1
        return reg

    def save(self, path) -> None:
        from pathlib import Path

        Path(path).write_bytes(self.export())

    @classmethod
    def load(cls, path) -> "Registry":
        from pathlib import Path

        return cls.import_(Path(path).read_bytes())

