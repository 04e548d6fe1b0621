"""Single-stage Huffman coding for tensor shards with shared fixed codebooks.

Codebooks are built ahead of time from the average symbol distribution of
earlier shards and kept in a :class:`Registry` that every node holds. The
encoder then needs one pass and sends only a codebook id plus the payload.
"""

from .errors import *  # noqa: F401,F403
from .formats import Dtype, cast_bf16_to_exmy, exmy_to_float, float32_to_bf16_bits, bf16_bits_to_float
from .symbolize import ShardId, SymbolStream, symbolize, desymbolize
from .synthetic import SyntheticConfig, generate_synthetic_shards
from .stats import (
    Histogram,
    Pmf,
    ShardReport,
    average_pmf,
    compressibility,
    cross_entropy,
    expected_code_length,
    histogram,
    ideal_compressibility,
    kl_divergence,
    shannon_entropy,
    to_pmf,
)
from .huffman import BitString, Codebook, build_codebook, canonicalize, decode, encode
from .registry import Registry, TensorKind
from .framing import (
    Frame,
    decode_frame,
    decode_three_stage,
    encode_frame,
    encode_three_stage,
    frame_overhead_bits,
    three_stage_overhead_bits,
)
from .collective import Node, TrafficReport, all_gather, compare_modes, format_table, make_nodes

__version__ = "0.1.0"
