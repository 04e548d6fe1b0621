import json
import math

import numpy as np
import pytest

from singlehuff.collective import MODES, Node, all_gather, compare_modes, format_table, make_nodes
from singlehuff.errors import InvalidConfigurationError
from singlehuff.formats import Dtype
from singlehuff.framing import HEADER_SIZE
from singlehuff.huffman import build_codebook
from singlehuff.registry import Registry, TensorKind
from singlehuff.stats import encoded_bits, histogram, shannon_entropy, to_pmf
from singlehuff.symbolize import ShardId, SymbolStream, desymbolize
from singlehuff.synthetic import SyntheticConfig, generate_synthetic_shards


def registry_for(shards, name="ffn1_activation"):
    reg = Registry()
    kind = TensorKind(name, shards[0].source_dtype, shards[0].symbol_width)
    for s in shards:
        reg.accumulate(kind, histogram(s))
    reg.build(0)
    return reg


def synthetic_nodes(n, elements, seed=0, per_node=1):
    base = dict(layers=n, shards_per_layer=per_node, elements=elements)
    history = generate_synthetic_shards(SyntheticConfig(seed=seed + 1, **base))
    current = generate_synthetic_shards(SyntheticConfig(seed=seed, **base))
    reg = registry_for(history)
    return make_nodes([current[r * per_node:(r + 1) * per_node] for r in range(n)], reg), reg


def concatenation_oracle(nodes):
    return [[desymbolize(s) for s in node.local_shards] for node in nodes]


def test_two_node_raw_counts_each_shard_once():
    nodes, _ = synthetic_nodes(2, 500)
    b = len(desymbolize(nodes[0].local_shards[0]))
    gathered, report = all_gather(nodes, "raw")
    assert report.total_bytes_sent == 2 * b
    assert report.compression_ratio == 1.0
    assert report.per_link_bytes.tolist() == [[0, b], [b, 0]]


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("n", [2, 3, 5])
def test_gathered_equals_concatenation_oracle(mode, n):
    nodes, _ = synthetic_nodes(n, 300, seed=n, per_node=2)
    gathered, report = all_gather(nodes, mode)
    expected = concatenation_oracle(nodes)
    assert all(g == expected for g in gathered)
    assert report.per_link_bytes.sum() == report.total_bytes_sent
    # ring: only r -> r+1 links carry traffic
    mask = np.zeros((n, n), dtype=bool)
    mask[np.arange(n), (np.arange(n) + 1) % n] = True
    assert not report.per_link_bytes[~mask].any()


def test_single_stage_ratio_matches_histogram_prediction():
    n = 8
    nodes, reg = synthetic_nodes(n, 32_768, seed=3)
    _, report = all_gather(nodes, "single_stage")
    cb = reg.codebook(0)
    raw = sum(2 * s.element_count for node in nodes for s in node.local_shards) * (n - 1)
    predicted_bytes = (n - 1) * sum(
        HEADER_SIZE + math.ceil(encoded_bits(histogram(s), cb) / 8) for node in nodes for s in node.local_shards
    )
    assert report.total_bytes_sent == predicted_bytes
    mean_len = np.mean([encoded_bits(histogram(s), cb) / len(s) for node in nodes for s in node.local_shards])
    assert abs(report.compression_ratio - 8 / mean_len) < 0.01
    assert report.compression_ratio == pytest.approx(raw / predicted_bytes, rel=1e-12)


def skewed_shards(n, symbols, seed):
    rng = np.random.default_rng(seed)
    p = 2.0 ** -np.arange(1, 9)
    p[-1] *= 2  # geometric, exactly normalized
    return [
        SymbolStream(rng.choice(8, symbols, p=p), 8, Dtype.E4M3, ShardId("skewed", 0, r)) for r in range(n)
    ]


def test_tiny_shards_three_stage_loses_single_stage_wins():
    n = 8
    shards = skewed_shards(n, 64, seed=0)
    history = skewed_shards(n, 4096, seed=1)
    nodes = make_nodes([[s] for s in shards], registry_for(history))
    reports = compare_modes(nodes)
    raw, three, single = (reports[m].total_bytes_sent for m in ("raw", "three_stage", "single_stage"))

    # arithmetic oracle from histograms alone
    cb = nodes[0].registry.codebook(0)
    exp_raw = (n - 1) * n * 64
    exp_single = (n - 1) * sum(HEADER_SIZE + math.ceil(encoded_bits(histogram(s), cb) / 8) for s in shards)
    exp_three = (n - 1) * sum(
        HEADER_SIZE + math.ceil(encoded_bits(histogram(s), build_codebook(histogram(s))) / 8) + 256 for s in shards
    )
    assert (raw, three, single) == (exp_raw, exp_three, exp_single)
    assert three > raw > single


def test_uniform_shards_are_incompressible():
    n = 4
    rng = np.random.default_rng(5)
    mk = lambda k: [SymbolStream(rng.integers(0, 256, 20_000), 8, Dtype.E4M3, ShardId("u", 0, r)) for r in range(k)]
    nodes = make_nodes([[s] for s in mk(n)], registry_for(mk(16)))
    assert (nodes[0].registry.codebook(0).lengths == 8).all()
    _, report = all_gather(nodes, "single_stage")
    raw = (n - 1) * n * 20_000
    assert report.total_bytes_sent == raw + (n - 1) * n * HEADER_SIZE
    assert 1 - report.compression_ratio < 2e-3


def test_dyadic_shards_approach_width_over_entropy():
    n = 4
    shards = skewed_shards(n, 200_000, seed=7)
    nodes = make_nodes([[s] for s in shards], registry_for(skewed_shards(n, 200_000, seed=8)))
    _, report = all_gather(nodes, "single_stage")
    cb = nodes[0].registry.codebook(0)
    p = 2.0 ** -np.arange(1, 9)
    p[-1] *= 2
    H = float(-(p * np.log2(p)).sum())
    L = float((p * cb.lengths[:8]).sum())  # closed-form expected length under the smoothed code
    assert L - H <= 1 / 8
    assert report.compression_ratio == pytest.approx(8 / L, rel=1e-3)
    assert report.compression_ratio == pytest.approx(8 / H, rel=0.06)


def test_realistic_shards_mode_ordering():
    nodes, _ = synthetic_nodes(4, 32_768, seed=9)  # 64 KiB bf16 shards
    reports = compare_modes(nodes)
    assert reports["single_stage"].total_bytes_sent <= reports["three_stage"].total_bytes_sent
    assert reports["three_stage"].total_bytes_sent < reports["raw"].total_bytes_sent


def test_registry_mismatch_rejected():
    nodes, reg = synthetic_nodes(3, 100)
    other = Registry.import_(reg.export())
    other.accumulate(TensorKind("extra", Dtype.E2M1), histogram(SymbolStream(np.arange(16), 4, Dtype.E2M1)))
    nodes[2] = Node(2, other, nodes[2].local_shards)
    with pytest.raises(InvalidConfigurationError):
        all_gather(nodes, "single_stage")


def test_needs_two_nodes_and_valid_mode():
    nodes, _ = synthetic_nodes(2, 100)
    with pytest.raises(InvalidConfigurationError):
        all_gather(nodes[:1], "raw")
    with pytest.raises(InvalidConfigurationError):
        all_gather(nodes, "zstd")


def test_report_json_and_table():
    nodes, _ = synthetic_nodes(3, 200)
    reports = compare_modes(nodes)
    d = json.loads(reports["raw"].to_json())
    assert d["mode"] == "raw" and d["compression_ratio"] == 1.0
    assert sum(map(sum, d["per_link_bytes"])) == d["total_bytes_sent"]
    table = format_table(reports)
    assert len(table.splitlines()) == 4
