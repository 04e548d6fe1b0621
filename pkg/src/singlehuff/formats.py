"""Number formats: bfloat16 and the ExMy minifloats (e4m3, e3m2, e2m3, e2m1).

ExMy conventions used here:

* no infinities; out-of-range magnitudes saturate to the largest finite value
* formats with 3 or more exponent bits reserve "all-ones exponent, nonzero
  mantissa" as NaN; the mantissa-zero pattern of that binade stays finite
* e2m3 and e2m1 have no NaN encoding at all
* subnormals are representable; rounding is round-to-nearest-even
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import InvalidConfigurationError

__all__ = [
    "Dtype",
    "EXMY_DTYPES",
    "float32_to_bf16_bits",
    "bf16_bits_to_float",
    "cast_bf16_to_exmy",
    "exmy_to_float",
    "exmy_is_nan",
    "exmy_max_finite_code",
    "exmy_nan_code",
]


class Dtype(enum.Enum):
    """Element formats. The enum value is the on-disk dtype byte."""

    BF16 = 0
    E4M3 = 1
    E3M2 = 2
    E2M3 = 3
    E2M1 = 4

    @property
    def exponent_bits(self) -> int:
        return _LAYOUT[self][0]

    @property
    def mantissa_bits(self) -> int:
        return _LAYOUT[self][1]

    @property
    def bit_width(self) -> int:
        return 1 + self.exponent_bits + self.mantissa_bits

    @property
    def bias(self) -> int:
        return (1 << (self.exponent_bits - 1)) - 1

    @property
    def has_nan(self) -> bool:
        return self is Dtype.BF16 or self.exponent_bits >= 3

    @property
    def short_name(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, name: "str | Dtype") -> "Dtype":
        if isinstance(name, Dtype):
            return name
        key = str(name).strip().lower()
        if key in ("bfloat16", "bf16"):
            return cls.BF16
        for member in cls:
            if member.short_name == key:
                return member
        raise InvalidConfigurationError(f"unknown dtype {name!r}")

    def __str__(self) -> str:
        return self.short_name


_LAYOUT = {
    Dtype.BF16: (8, 7),
    Dtype.E4M3: (4, 3),
    Dtype.E3M2: (3, 2),
    Dtype.E2M3: (2, 3),
    Dtype.E2M1: (2, 1),
}

EXMY_DTYPES = (Dtype.E4M3, Dtype.E3M2, Dtype.E2M3, Dtype.E2M1)


def _require_exmy(dtype: Dtype) -> Dtype:
    dtype = Dtype.parse(dtype)
    if dtype not in EXMY_DTYPES:
        raise InvalidConfigurationError(f"{dtype} is not an ExMy target format")
    return dtype


# ---------------------------------------------------------------------------
# bfloat16
# ---------------------------------------------------------------------------

def float32_to_bf16_bits(values) -> np.ndarray:
    """Round float32 values to bfloat16 (nearest-even), returning uint16 bit patterns."""
    f = np.ascontiguousarray(values, dtype=np.float32)
    bits = f.view(np.uint32).astype(np.uint64)
    rounded = (bits + 0x7FFF + ((bits >> 16) & 1)) >> 16
    out = rounded.astype(np.uint16)
    nan = np.isnan(f)
    if nan.any():
        # keep NaNs quiet instead of letting the carry turn them into inf
        out[nan] = ((bits[nan] >> 16) | 0x40).astype(np.uint16)
    return out


def bf16_bits_to_float(bits) -> np.ndarray:
    """Widen bfloat16 bit patterns to float64 (exact)."""
    b = np.asarray(bits, dtype=np.uint32) << 16
    return b.astype(np.uint32).view(np.float32).astype(np.float64)


# ---------------------------------------------------------------------------
# ExMy
# ---------------------------------------------------------------------------

def exmy_max_finite_code(dtype: Dtype) -> int:
    """Unsigned code of the largest finite magnitude."""
    dtype = _require_exmy(dtype)
    m = dtype.mantissa_bits
    top = (1 << (dtype.exponent_bits + m)) - 1
    if dtype.has_nan:
        # all-ones exponent with zero mantissa is the largest finite value
        return top & ~((1 << m) - 1)
    return top


def exmy_nan_code(dtype: Dtype, sign: int = 0) -> int:
    """Canonical NaN pattern (all ones below the sign). Only valid for NaN-capable formats."""
    dtype = _require_exmy(dtype)
    if not dtype.has_nan:
        raise InvalidConfigurationError(f"{dtype} has no NaN encoding")
    return (sign << (dtype.bit_width - 1)) | ((1 << (dtype.bit_width - 1)) - 1)


def exmy_is_nan(codes, dtype: Dtype) -> np.ndarray:
    dtype = _require_exmy(dtype)
    c = np.asarray(codes, dtype=np.int64)
    if not dtype.has_nan:
        return np.zeros(c.shape, dtype=bool)
    m = dtype.mantissa_bits
    exp = (c >> m) & ((1 << dtype.exponent_bits) - 1)
    mant = c & ((1 << m) - 1)
    return (exp == (1 << dtype.exponent_bits) - 1) & (mant != 0)


def exmy_to_float(codes, dtype: Dtype) -> np.ndarray:
    """Decode ExMy bit patterns to float64; NaN patterns decode to nan."""
    dtype = _require_exmy(dtype)
    c = np.asarray(codes, dtype=np.int64)
    if np.any((c < 0) | (c >= 1 << dtype.bit_width)):
        raise InvalidConfigurationError(f"code out of range for {dtype}")
    m = dtype.mantissa_bits
    sign = (c >> (dtype.bit_width - 1)) & 1
    exp = (c >> m) & ((1 << dtype.exponent_bits) - 1)
    mant = (c & ((1 << m) - 1)).astype(np.float64)
    normal = exp > 0
    scale = np.where(normal, exp - dtype.bias, 1 - dtype.bias).astype(np.float64)
    frac = np.where(normal, 1.0 + mant / (1 << m), mant / (1 << m))
    value = np.ldexp(frac, scale.astype(np.int64))
    value = np.where(sign == 1, -value, value)
    return np.where(exmy_is_nan(c, dtype), np.nan, value)


def cast_bf16_to_exmy(bf16_bits, target: Dtype) -> np.ndarray:
    """Convert bfloat16 bit patterns to ExMy codes with round-to-nearest-even.

    Works directly on the integer fields: the bf16 significand is aligned to
    the target's quantum for the value's binade (clamped to the subnormal
    binade), rounded, and reassembled. Codes above the largest finite value
    are clamped to it, which gives saturation with the sign kept.
    """
    target = _require_exmy(target)
    b = np.asarray(bf16_bits)
    if b.dtype.kind == "f":
        raise InvalidConfigurationError("pass bf16 bit patterns (integers), not floats")
    b = b.astype(np.int64)
    if np.any((b < 0) | (b > 0xFFFF)):
        raise InvalidConfigurationError("bf16 bit patterns must lie in [0, 0xFFFF]")

    sign = (b >> 15) & 1
    exp = (b >> 7) & 0xFF
    mant = b & 0x7F
    is_nan = (exp == 0xFF) & (mant != 0)
    is_inf = (exp == 0xFF) & (mant == 0)

    # magnitude = sig * 2**e2 with sig < 256
    sig = np.where(exp > 0, mant | 0x80, mant)
    e2 = np.where(exp > 0, exp - 127 - 7, 1 - 127 - 7)
    # floor(log2(magnitude)); the value only matters for sig > 0
    top_bit = np.floor(np.log2(np.maximum(sig, 1))).astype(np.int64)
    binade = e2 + top_bit

    m = target.mantissa_bits
    min_binade = 1 - target.bias
    quantum = np.maximum(binade, min_binade) - m  # log2 of the target ulp

    shift = quantum - e2
    left = np.clip(-shift, 0, 62)
    right = np.clip(shift, 0, 40)
    q = np.where(shift <= 0, sig << left, sig >> right)
    rem = sig & ((1 << right) - 1)
    half = np.where(right > 0, 1 << np.maximum(right - 1, 0), 0)
    round_up = (right > 0) & ((rem > half) | ((rem == half) & ((q & 1) == 1)))
    q = q + round_up

    # q * 2**quantum is now exact; rebuild the code. A carry out of the
    # mantissa lands in the next binade by plain addition.
    subnormal = quantum == min_binade - m
    exp_field = quantum + m + target.bias
    code = np.where(
        subnormal & (q < (1 << m)),
        q,
        ((exp_field + (q >> m) - 1) << m) + (q & ((1 << m) - 1)),
    )
    code = np.where(sig == 0, 0, code)

    max_code = exmy_max_finite_code(target)
    code = np.minimum(code, max_code)
    code = np.where(is_inf, max_code, code)
    code = code | (sign << (target.bit_width - 1))

    if is_nan.any():
        if target.has_nan:
            nan_codes = exmy_nan_code(target) | (sign << (target.bit_width - 1))
        else:
            nan_codes = np.full_like(code, max_code)
        code = np.where(is_nan, nan_codes, code)
    return code.astype(np.uint8)
