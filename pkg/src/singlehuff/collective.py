"""In-memory ring AllGather that counts bytes on every link.

Three transfer modes move the same shards:

``raw``           the packed element bytes
``three_stage``   a per-shard Huffman frame plus its code-length array
``single_stage``  a frame coded with a registry codebook (id only, no codebook)

Shard metadata (dtype, element count, shard id) is treated as known to the
receivers, as it is for a real collective, and is not counted in any mode.
Each origin encodes its shards once; intermediate nodes forward the encoded
bytes unchanged and decode their own copy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidConfigurationError, SingleHuffError
from .framing import Frame, decode_frame, decode_three_stage, encode_frame, encode_three_stage
from .registry import Registry
from .symbolize import SymbolStream, desymbolize, symbolize

__all__ = ["MODES", "Node", "TrafficReport", "all_gather", "compare_modes", "format_table", "make_nodes"]

MODES = ("raw", "three_stage", "single_stage")


@dataclass
class Node:
    rank: int
    registry: Registry
    local_shards: list = field(default_factory=list)


@dataclass
class TrafficReport:
    mode: str
    total_bytes_sent: int
    per_link_bytes: np.ndarray  # [src, dst]
    raw_bytes_sent: int

    @property
    def compression_ratio(self) -> float:
        if self.mode == "raw":
            return 1.0
        return self.raw_bytes_sent / self.total_bytes_sent if self.total_bytes_sent else 1.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "total_bytes_sent": self.total_bytes_sent,
            "raw_bytes_sent": self.raw_bytes_sent,
            "compression_ratio": self.compression_ratio,
            "per_link_bytes": self.per_link_bytes.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def make_nodes(shards_per_node: Sequence[Sequence[SymbolStream]], registry: Registry) -> list[Node]:
    """One node per shard list, each with its own imported copy of ``registry``."""
    blob = registry.export()
    return [Node(rank, Registry.import_(blob), list(shards)) for rank, shards in enumerate(shards_per_node)]


def _check_nodes(nodes: Sequence[Node]) -> None:
    if len(nodes) < 2:
        raise InvalidConfigurationError("AllGather needs at least two nodes")
    if [n.rank for n in nodes] != list(range(len(nodes))):
        raise InvalidConfigurationError("node ranks must be 0..N-1 in order")
    reference = nodes[0].registry.export()
    for n in nodes[1:]:
        if n.registry.export() != reference:
            raise InvalidConfigurationError(f"node {n.rank} holds a different registry than node 0")


def _encode(shard: SymbolStream, node: Node, mode: str, candidate_ids) -> bytes:
    if mode == "raw":
        return desymbolize(shard)
    if mode == "three_stage":
        frame, lengths = encode_three_stage(shard)
        return frame.to_bytes() + lengths
    return encode_frame(shard, node.registry, candidate_ids).to_bytes()


def _decode(message: bytes, template: SymbolStream, node: Node, mode: str) -> bytes:
    if mode == "raw":
        stream = symbolize(message, template.source_dtype, template.symbol_width,
                           element_count=None if template.symbol_width == 8 else template.element_count)
    elif mode == "three_stage":
        frame, end = Frame.parse(message)
        stream = decode_three_stage(frame, message[end:], template.source_dtype)
    else:
        stream = decode_frame(Frame.from_bytes(message), node.registry)
    return desymbolize(stream)


def all_gather(nodes: Sequence[Node], mode: str, candidate_ids: Optional[Sequence[int]] = None):
    """Ring AllGather of every node's shards.

    Returns ``(gathered, report)`` where ``gathered[r][o]`` is the list of
    raw shard bytes that node ``r`` holds for origin ``o`` afterwards.
    """
    if mode not in MODES:
        raise InvalidConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    _check_nodes(nodes)
    n = len(nodes)

    messages = [[_encode(s, node, mode, candidate_ids) for s in node.local_shards] for node in nodes]
    raw_sizes = [sum(len(desymbolize(s)) for s in node.local_shards) for node in nodes]

    gathered = [[None] * n for _ in range(n)]
    for node in nodes:
        gathered[node.rank][node.rank] = [desymbolize(s) for s in node.local_shards]
    links = np.zeros((n, n), dtype=np.int64)
    raw_total = 0

    # step k: rank r forwards the block that originated at rank r - k
    for step in range(n - 1):
        for r in range(n):
            origin = (r - step) % n
            dst = (r + 1) % n
            block = messages[origin]
            links[r, dst] += sum(len(m) for m in block)
            raw_total += raw_sizes[origin]
            gathered[dst][origin] = [
                _decode(m, tmpl, nodes[dst], mode) for m, tmpl in zip(block, nodes[origin].local_shards)
            ]

    report = TrafficReport(mode, int(links.sum()), links, raw_total)
    return gathered, report


def compare_modes(nodes: Sequence[Node], candidate_ids: Optional[Sequence[int]] = None) -> dict:
    """Run every mode on the same nodes; all must deliver identical data."""
    reports = {}
    reference = None
    for mode in MODES:
        gathered, report = all_gather(nodes, mode, candidate_ids)
        if reference is None:
            reference = gathered
        elif gathered != reference:
            raise SingleHuffError(f"{mode} AllGather delivered different data than raw")
        reports[mode] = report
    return reports


def format_table(reports) -> str:
    rows = [f"{'mode':<14}{'bytes_sent':>14}{'raw_bytes':>14}{'ratio':>10}"]
    for r in (reports.values() if isinstance(reports, dict) else reports):
        rows.append(f"{r.mode:<14}{r.total_bytes_sent:>14}{r.raw_bytes_sent:>14}{r.compression_ratio:>10.4f}")
    return "\n".join(rows)
