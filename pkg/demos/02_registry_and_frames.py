"""Build codebooks from yesterday's data, compress today's shards with them.

The registry is built once from an earlier batch and copied to every
receiver. A frame then only names a codebook id, so nothing but the
24-byte header travels alongside the payload.
"""

from singlehuff import (
    Frame,
    Registry,
    SyntheticConfig,
    TensorKind,
    decode_frame,
    desymbolize,
    encode_frame,
    encode_three_stage,
    generate_synthetic_shards,
    histogram,
)

kinds = {
    "attn_output": dict(distribution="gaussian", scale=1.0),
    "ffn1_activation": dict(distribution="gelu", scale=4.0),
}

previous, today = Registry(), []
for name, shape in kinds.items():
    for s in generate_synthetic_shards(SyntheticConfig(layers=2, shards_per_layer=8, elements=20_000,
                                                       seed=1, kind=name, **shape)):
        previous.accumulate(TensorKind(name, "bf16"), histogram(s))
    today += generate_synthetic_shards(SyntheticConfig(layers=1, shards_per_layer=3, elements=20_000,
                                                       seed=2, kind=name, **shape))
previous.build_all()

blob = previous.export()
receiver = Registry.import_(blob)
print(f"registry: {len(blob)} bytes, ids {receiver.ids}\n")

print(f"{'shard':<26}{'raw':>8}{'1-stage':>9}{'3-stage':>9}  codebook")
for shard in today:
    frame = encode_frame(shard, previous)  # picks the cheapest codebook for this histogram
    wire = frame.to_bytes()
    restored = decode_frame(Frame.from_bytes(wire), receiver)
    assert desymbolize(restored) == desymbolize(shard)

    baseline, lengths = encode_three_stage(shard)
    raw = len(desymbolize(shard))
    print(f"{str(shard.shard_id):<26}{raw:>8}{len(wire):>9}{baseline.nbytes + len(lengths):>9}  "
          f"{receiver.kind(frame.codebook_id).name}")
