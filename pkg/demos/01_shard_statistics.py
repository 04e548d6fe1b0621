"""How similar are the symbol distributions of different shards?

Generates a small synthetic bf16 corpus, pools every shard into an average
distribution and compares three ways of coding each shard: the entropy
limit, a Huffman code built for that shard alone, and one shared code
built from the pooled counts.
"""

import numpy as np

from singlehuff import Registry, ShardReport, SyntheticConfig, TensorKind, generate_synthetic_shards, histogram, to_pmf

shards = generate_synthetic_shards(SyntheticConfig(layers=4, shards_per_layer=16, elements=50_000, seed=7))
hists = [histogram(s) for s in shards]
print(f"{len(shards)} shards of {shards[0].element_count} bf16 values each")

# The shared code is an ordinary registry entry built from the pooled counts.
reg = Registry()
kind = TensorKind("ffn1_activation", "bf16")
for h in hists:
    reg.accumulate(kind, h)
shared = reg.build(0)
average = to_pmf(reg.histogram(0))

reports = [ShardReport.compute(s.shard_id, h, average, shared) for s, h in zip(shards, hists)]
col = lambda name: np.array([getattr(r, name) for r in reports])

print(f"entropy per byte symbol   {col('entropy_bits').mean():.3f} bits")
print(f"ideal compressibility     {col('ideal_compressibility').mean():.4f}")
print(f"per-shard Huffman         {col('huffman_compressibility').mean():.4f}")
print(f"shared codebook           {col('fixed_codebook_compressibility').mean():.4f}")
print(f"largest KL to the average {col('kl_from_average').max():.5f} bits")

loss = col("huffman_compressibility") - col("fixed_codebook_compressibility")
print(f"\nsharing one code costs {100 * loss.mean():.3f} percentage points on average "
      f"(worst shard {100 * loss.max():.3f})")
