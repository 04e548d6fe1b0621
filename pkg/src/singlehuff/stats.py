"""Histograms, PMFs and the information measures used to judge codebooks.

Everything is base 2 (bits). Zero-probability symbols are skipped in the
entropy sums, which is the usual 0 * log 0 = 0 convention.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    CoverageError,
    EmptyHistogramError,
    InvalidConfigurationError,
    SupportError,
)

__all__ = [
    "Histogram",
    "Pmf",
    "ShardReport",
    "histogram",
    "to_pmf",
    "shannon_entropy",
    "cross_entropy",
    "ideal_compressibility",
    "compressibility_from_length",
    "kl_divergence",
    "average_pmf",
    "expected_code_length",
    "compressibility",
    "encoded_bits",
    "reports_to_csv",
    "reports_from_csv",
    "pmf_to_json",
    "histogram_to_json",
]

PMF_TOLERANCE = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Histogram:
    counts: np.ndarray
    symbol_width: int

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True).reshape(-1)
        if counts.size != 1 << self.symbol_width:
            raise InvalidConfigurationError(
                f"histogram of width {self.symbol_width} needs {1 << self.symbol_width} bins, got {counts.size}"
            )
        if counts.size and counts.min() < 0:
            raise InvalidConfigurationError("counts must be non-negative")
        object.__setattr__(self, "counts", _freeze(counts))

    @classmethod
    def zeros(cls, symbol_width: int) -> "Histogram":
        return cls(np.zeros(1 << symbol_width, dtype=np.int64), symbol_width)

    @property
    def total(self) -> int:
        # exact even when registry-scale counts would overflow int64
        return int(self.counts.sum(dtype=object))

    @property
    def alphabet_size(self) -> int:
        return 1 << self.symbol_width

    def __add__(self, other: "Histogram") -> "Histogram":
        if not isinstance(other, Histogram):
            return NotImplemented
        if other.symbol_width != self.symbol_width:
            raise InvalidConfigurationError("cannot add histograms of different widths")
        return Histogram(self.counts + other.counts, self.symbol_width)

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.symbol_width == other.symbol_width and np.array_equal(self.counts, other.counts)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Pmf:
    probs: np.ndarray
    symbol_width: int

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64, copy=True).reshape(-1)
        if probs.size != 1 << self.symbol_width:
            raise InvalidConfigurationError(
                f"pmf of width {self.symbol_width} needs {1 << self.symbol_width} entries, got {probs.size}"
            )
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InvalidConfigurationError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > PMF_TOLERANCE:
            raise InvalidConfigurationError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", _freeze(probs))

    @classmethod
    def from_probs(cls, probs: Sequence[float]) -> "Pmf":
        """Build from a probability list, zero-padding up to a power-of-two alphabet."""
        probs = np.asarray(probs, dtype=np.float64)
        width = max(1, int(np.ceil(np.log2(max(probs.size, 2)))))
        padded = np.zeros(1 << width)
        padded[: probs.size] = probs
        return cls(padded, width)

    def __eq__(self, other):
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.symbol_width == other.symbol_width and np.array_equal(self.probs, other.probs)

    __hash__ = None


def histogram(stream) -> Histogram:
    """Symbol counts of a SymbolStream."""
    counts = np.bincount(stream.symbols, minlength=1 << stream.symbol_width)
    return Histogram(counts, stream.symbol_width)


def to_pmf(hist: Histogram) -> Pmf:
    total = hist.total
    if total == 0:
        raise EmptyHistogramError("cannot normalize an empty histogram")
    return Pmf(hist.counts / total, hist.symbol_width)


def _as_pmf(x) -> Pmf:
    return to_pmf(x) if isinstance(x, Histogram) else x


def shannon_entropy(pmf) -> float:
    """H(p) = -sum p log2 p, in bits per symbol."""
    p = _as_pmf(pmf).probs
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def cross_entropy(p, q) -> float:
    """H(p, q) = -sum p log2 q. Raises SupportError when q misses p's support."""
    p, q = _as_pmf(p), _as_pmf(q)
    _check_same_width(p, q)
    mask = p.probs > 0
    if np.any(q.probs[mask] == 0):
        raise SupportError("q assigns zero probability to a symbol that p uses")
    return float(-np.sum(p.probs[mask] * np.log2(q.probs[mask])))


def compressibility_from_length(bits_per_symbol: float, symbol_width: int) -> float:
    """Fraction of bits saved when symbols of ``symbol_width`` bits cost ``bits_per_symbol``."""
    return (symbol_width - bits_per_symbol) / symbol_width


def ideal_compressibility(pmf) -> float:
    """Entropy-limit saving, (width - H) / width."""
    pmf = _as_pmf(pmf)
    return compressibility_from_length(shannon_entropy(pmf), pmf.symbol_width)


def _check_same_width(p: Pmf, q: Pmf) -> None:
    if p.symbol_width != q.symbol_width:
        raise InvalidConfigurationError(
            f"width mismatch: {p.symbol_width} vs {q.symbol_width}"
        )


def kl_divergence(p, q) -> float:
    """D(p || q) in bits.

    Computed term by term as sum p * log2(p / q) rather than as a
    difference of entropies, so equal inputs give exactly zero.
    """
    p, q = _as_pmf(p), _as_pmf(q)
    _check_same_width(p, q)
    mask = p.probs > 0
    if np.any(q.probs[mask] == 0):
        raise SupportError("D(p||q) is infinite: q is zero where p is positive; smooth q first")
    pp, qq = p.probs[mask], q.probs[mask]
    return float(max(0.0, np.sum(pp * np.log2(pp / qq))))


def average_pmf(hists: Iterable[Histogram]) -> Pmf:
    """Count-weighted average: pool all counts, then normalize."""
    hists = list(hists)
    if not hists:
        raise InvalidConfigurationError("average_pmf needs at least one histogram")
    width = hists[0].symbol_width
    if any(h.symbol_width != width for h in hists):
        raise InvalidConfigurationError("all histograms must share one symbol width")
    pooled = np.sum([h.counts for h in hists], axis=0)
    return to_pmf(Histogram(pooled, width))


def _lengths_for(codebook, width: int, used: np.ndarray) -> np.ndarray:
    if codebook.symbol_width != width:
        raise InvalidConfigurationError(
            f"codebook width {codebook.symbol_width} does not match data width {width}"
        )
    lengths = np.asarray(codebook.lengths, dtype=np.int64)
    missing = np.flatnonzero(used & (lengths == 0))
    if missing.size:
        raise CoverageError(int(missing[0]))
    return lengths


def expected_code_length(pmf, codebook) -> float:
    """Average bits per symbol, sum p(s) * len(s), under ``codebook``."""
    pmf = _as_pmf(pmf)
    lengths = _lengths_for(codebook, pmf.symbol_width, pmf.probs > 0)
    return float(np.dot(pmf.probs, lengths))


def encoded_bits(hist: Histogram, codebook) -> int:
    """Exact payload size in bits: sum counts[s] * len(s)."""
    lengths = _lengths_for(codebook, hist.symbol_width, hist.counts > 0)
    return int(np.dot(hist.counts, lengths))


def compressibility(pmf_or_hist, codebook) -> float:
    """Fraction of bits saved by ``codebook``; negative when it expands the data."""
    pmf = _as_pmf(pmf_or_hist)
    return compressibility_from_length(expected_code_length(pmf, codebook), pmf.symbol_width)


# ---------------------------------------------------------------------------
# per-shard reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShardReport:
    shard_id: str
    entropy_bits: float
    ideal_compressibility: float
    huffman_compressibility: float
    fixed_codebook_compressibility: float
    kl_from_average: float

    @classmethod
    def compute(cls, shard_id, hist: Histogram, average: Pmf, fixed_codebook,
                own_codebook=None) -> "ShardReport":
        from .huffman import build_codebook

        pmf = to_pmf(hist)
        own = own_codebook if own_codebook is not None else build_codebook(hist)
        return cls(
            shard_id=str(shard_id),
            entropy_bits=shannon_entropy(pmf),
            ideal_compressibility=ideal_compressibility(pmf),
            huffman_compressibility=compressibility(pmf, own),
            fixed_codebook_compressibility=compressibility(pmf, fixed_codebook),
            kl_from_average=kl_divergence(pmf, average),
        )


_REPORT_FIELDS = [f.name for f in fields(ShardReport)]


def reports_to_csv(reports: Iterable[ShardReport], out: Optional[io.TextIOBase] = None,
                   summary: bool = False) -> str:
    """Write reports as CSV (optionally with a trailing ``mean`` row) and return the text."""
    reports = list(reports)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_REPORT_FIELDS)
    for r in reports:
        writer.writerow([r.shard_id] + [repr(float(getattr(r, k))) for k in _REPORT_FIELDS[1:]])
    if summary and reports:
        means = [float(np.mean([getattr(r, k) for r in reports])) for k in _REPORT_FIELDS[1:]]
        writer.writerow(["mean"] + [repr(m) for m in means])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def reports_from_csv(text: str) -> list[ShardReport]:
    rows = csv.DictReader(io.StringIO(text))
    return [
        ShardReport(row["shard_id"], *(float(row[k]) for k in _REPORT_FIELDS[1:]))
        for row in rows
        if row["shard_id"] != "mean"
    ]


def pmf_to_json(pmf: Pmf) -> str:
    return json.dumps({"symbol_width": pmf.symbol_width, "probs": pmf.probs.tolist()})


def histogram_to_json(hist: Histogram) -> str:
    return json.dumps({"symbol_width": hist.symbol_width, "counts": hist.counts.tolist()})
