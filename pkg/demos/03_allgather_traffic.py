"""Bytes on the wire for a ring AllGather in three transfer modes.

Large shards: both Huffman modes beat raw and the shared codebook edges
out the per-shard one because it skips the 256-byte length table.
Tiny shards: the length table alone outweighs the data.
"""

import numpy as np

from singlehuff import (
    Registry,
    ShardId,
    SymbolStream,
    SyntheticConfig,
    TensorKind,
    compare_modes,
    format_table,
    generate_synthetic_shards,
    histogram,
    make_nodes,
)

N = 8


def registry_from(shards, name):
    reg = Registry()
    for s in shards:
        reg.accumulate(TensorKind(name, s.source_dtype), histogram(s))
    reg.build_all()
    return reg


cfg = dict(layers=N, shards_per_layer=1, elements=32_768)
history = generate_synthetic_shards(SyntheticConfig(seed=100, **cfg))
current = generate_synthetic_shards(SyntheticConfig(seed=101, **cfg))
print(f"{N} nodes, one 64 KiB bf16 shard each")
print(format_table(compare_modes(make_nodes([[s] for s in current], registry_from(history, "ffn1_activation")))))

rng = np.random.default_rng(0)
p = np.array([0.5, 0.25, 0.125, 0.0625, 0.0625])


def tiny(n):
    return [SymbolStream(rng.choice(5, n, p=p), 8, "e4m3", ShardId("tiny", 0, i)) for i in range(N)]


reg = registry_from(tiny(4096), "tiny")
print(f"\n{N} nodes, one 64-symbol e4m3 shard each")
print(format_table(compare_modes(make_nodes([[s] for s in tiny(64)], reg))))
