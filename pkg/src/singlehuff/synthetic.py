"""Synthetic stand-in for per-shard tensor data.

Each shard draws its values from a shared base distribution whose location
and scale are jittered per shard, so shard PMFs are close to each other but
not identical. Values are rounded to bfloat16 and optionally down-cast to
an ExMy format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigurationError
from .formats import Dtype, cast_bf16_to_exmy, float32_to_bf16_bits
from .symbolize import ShardId, SymbolStream, symbolize

__all__ = ["SyntheticConfig", "DISTRIBUTIONS", "generate_shard", "generate_synthetic_shards"]

DISTRIBUTIONS = ("gaussian", "gelu", "laplace")


@dataclass(frozen=True)
class SyntheticConfig:
    layers: int = 18
    shards_per_layer: int = 64
    elements: int = 100_000
    seed: int = 0
    distribution: str = "gaussian"
    jitter: float = 0.02  # relative per-shard perturbation of mean and scale
    scale: float = 1.0
    dtype: Dtype = Dtype.BF16
    kind: str = "ffn1_activation"

    def __post_init__(self):
        for name in ("layers", "shards_per_layer", "elements"):
            if getattr(self, name) <= 0:
                raise InvalidConfigurationError(f"{name} must be positive")
        if self.distribution not in DISTRIBUTIONS:
            raise InvalidConfigurationError(
                f"distribution must be one of {DISTRIBUTIONS}, got {self.distribution!r}"
            )
        if self.jitter < 0 or self.scale <= 0:
            raise InvalidConfigurationError("jitter must be >= 0 and scale > 0")
        object.__setattr__(self, "dtype", Dtype.parse(self.dtype))


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(0.7978845608028654 * (x + 0.044715 * x**3)))


def _draw(rng: np.random.Generator, cfg: SyntheticConfig) -> np.ndarray:
    mean = cfg.scale * cfg.jitter * rng.uniform(-1.0, 1.0)
    sigma = cfg.scale * (1.0 + cfg.jitter * rng.uniform(-1.0, 1.0))
    if cfg.distribution == "laplace":
        x = rng.laplace(mean, sigma / np.sqrt(2.0), cfg.elements)
    else:
        x = rng.normal(mean, sigma, cfg.elements)
    if cfg.distribution == "gelu":
        x = _gelu(x)
    return x.astype(np.float32)


def generate_shard(cfg: SyntheticConfig, layer: int, shard: int) -> SymbolStream:
    """One shard; independent of every other shard given (seed, layer, shard)."""
    rng = np.random.default_rng([cfg.seed, layer, shard])
    bits = float32_to_bf16_bits(_draw(rng, cfg))
    sid = ShardId(cfg.kind, layer, shard)
    if cfg.dtype is Dtype.BF16:
        return symbolize(bits.astype("<u2").tobytes(), Dtype.BF16, shard_id=sid)
    codes = cast_bf16_to_exmy(bits, cfg.dtype)
    return SymbolStream(codes, cfg.dtype.bit_width, cfg.dtype, sid)


def generate_synthetic_shards(cfg: SyntheticConfig) -> list[SymbolStream]:
    """``cfg.layers * cfg.shards_per_layer`` streams ordered by (layer, shard)."""
    return [
        generate_shard(cfg, layer, shard)
        for layer in range(cfg.layers)
        for shard in range(cfg.shards_per_layer)
    ]
