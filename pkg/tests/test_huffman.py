import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from singlehuff.errors import (
    CodeLengthOverflowError,
    CorruptPayloadError,
    CoverageError,
    EmptyHistogramError,
    InvalidLengthsError,
    TruncationError,
)
from singlehuff.huffman import (
    BitString,
    Codebook,
    build_codebook,
    canonicalize,
    decode,
    decode_with_position,
    encode,
    kraft_sum,
)
from singlehuff.stats import Histogram, expected_code_length, shannon_entropy, to_pmf

import oracles


def lengths_of(counts, width):
    return build_codebook(Histogram(counts, width)).lengths.tolist()


def test_dyadic_lengths():
    assert lengths_of([8, 4, 2, 2], 2) == [1, 2, 3, 3]


def test_single_symbol_gets_one_bit():
    assert lengths_of([5] + [0] * 15, 4) == [1] + [0] * 15


def test_empty_histogram_rejected():
    with pytest.raises(EmptyHistogramError):
        build_codebook(Histogram.zeros(4))


def test_small_alphabets_match_brute_force_sample():
    # the acceptance suite enumerates everything; this is a quick slice
    for counts in itertools.product(range(3), repeat=4):
        if not any(counts):
            continue
        cb = build_codebook(Histogram(counts, 2))
        assert int(np.dot(counts, cb.lengths)) == oracles.min_prefix_code_cost(counts)


def test_canonical_examples():
    assert [format(int(c), f"0{l}b") for c, l in zip(canonicalize([1, 2, 3, 3]), [1, 2, 3, 3])] == \
        ["0", "10", "110", "111"]
    assert canonicalize([2, 2, 2, 2]).tolist() == [0, 1, 2, 3]


def test_canonical_skips_unassigned():
    cb = Codebook.from_lengths([0, 2, 1, 2])
    assert [cb.codeword(s) for s in (1, 2, 3)] == ["10", "0", "11"]
    with pytest.raises(CoverageError):
        cb.codeword(0)


def test_kraft_violation_rejected():
    with pytest.raises(InvalidLengthsError):
        canonicalize([1, 1, 1, 0])
    with pytest.raises(InvalidLengthsError):
        canonicalize([33, 1])


def random_kraft_exact_lengths(rng, n):
    # split leaves of a random full binary tree
    lengths = [1, 1]
    while len(lengths) < n:
        i = int(rng.integers(len(lengths)))
        l = lengths.pop(i)
        lengths += [l + 1, l + 1]
    rng.shuffle(lengths)
    return lengths


def test_random_kraft_exact_lengths_are_prefix_free(rng):
    for _ in range(100):
        n = int(rng.integers(2, 33))
        lengths = random_kraft_exact_lengths(rng, n)
        padded = lengths + [0] * (64 - n)
        cb = Codebook.from_lengths(padded, 6)
        assert kraft_sum(cb.lengths) == 1.0
        assert oracles.is_prefix_free([cb.codeword(s) for s in range(n)])


def test_encode_example():
    cb = Codebook.from_lengths([1, 2, 2, 0])
    bits = encode(np.array([0, 1, 0]), cb)
    assert str(bits) == "0100" and len(bits) == 4


def test_encode_empty():
    assert encode(np.array([], dtype=int), Codebook.from_lengths([1, 1])) == BitString(b"", 0)


def test_encode_coverage_error():
    cb = Codebook.from_lengths([1, 1, 0, 0])
    with pytest.raises(CoverageError) as info:
        encode(np.array([0, 1, 3]), cb)
    assert info.value.symbol == 3


@given(st.lists(st.integers(0, 63), min_size=1, max_size=400))
def test_encode_matches_string_oracle(symbols):
    h = Histogram(np.bincount(symbols, minlength=64), 6)
    cb = build_codebook(h)
    bits = encode(np.array(symbols), cb)
    assert str(bits) == oracles.bit_string(symbols, cb.lengths, cb.codes)
    assert len(bits) == int(np.dot(h.counts, cb.lengths))
    assert len(bits.data) == (len(bits) + 7) // 8


@given(st.lists(st.integers(0, 255), max_size=600), st.integers(0, 2**32 - 1))
def test_roundtrip(symbols, seed):
    rng = np.random.default_rng(seed)
    counts = np.bincount(symbols, minlength=256) + rng.integers(0, 3, 256)
    if not counts.any():
        counts[0] = 1
    cb = build_codebook(Histogram(counts, 8))
    symbols = [s for s in symbols if cb.lengths[s]]
    bits = encode(np.array(symbols, dtype=int), cb)
    out, used = decode_with_position(bits, cb, len(symbols))
    assert out.tolist() == symbols
    assert used == len(bits)


def test_decode_empty():
    assert decode(BitString(b"", 0), Codebook.from_lengths([1, 1]), 0).size == 0


def test_decode_ignores_padding():
    cb = Codebook.from_lengths([1, 2, 2, 0])
    assert decode(BitString(bytes([0b01000000]), 4), cb, 3).tolist() == [0, 1, 0]


def test_decode_truncation():
    cb = Codebook.from_lengths([1, 2, 2, 0])
    with pytest.raises(TruncationError):
        decode(BitString(bytes([0b01000000]), 4), cb, 4)
    with pytest.raises(TruncationError):
        decode(BitString(bytes([0b01000000]), 2), cb, 2)  # "01" then a cut codeword
    with pytest.raises(TruncationError):
        decode(BitString(b"\x00", 3), cb, 5)


def test_decode_corrupt_prefix():
    cb = Codebook.from_lengths([1, 0, 0, 0])  # only "0" is a codeword
    with pytest.raises(CorruptPayloadError):
        decode(BitString(bytes([0b01000000]), 2), cb, 2)


def test_decode_long_stream_crosses_chunks(rng):
    x = rng.integers(0, 256, 150_000) ** 2 // 256
    cb = build_codebook(Histogram(np.bincount(x, minlength=256), 8))
    assert np.array_equal(decode(encode(x, cb), cb, x.size), x)


def test_determinism(rng):
    h = Histogram(rng.integers(0, 5, 256), 8)
    a, b = build_codebook(h), build_codebook(Histogram(h.counts.copy(), 8))
    assert a == b and np.array_equal(a.codes, b.codes)


def test_tie_breaking_prefers_lower_symbols():
    # equal weights: the two earliest leaves (0 and 1) merge first, so they go deeper
    assert lengths_of([1, 1, 1, 0], 2) == [2, 2, 1, 0]


def test_length_cap():
    fib = [1, 1]
    while len(fib) < 40:
        fib.append(fib[-1] + fib[-2])
    with pytest.raises(CodeLengthOverflowError):
        build_codebook(Histogram(fib + [0] * 24, 6))


@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 6, 8]))
def test_shannon_bound_and_kraft_equality(seed, width):
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(int(rng.integers(2, 3000)), rng.dirichlet(np.full(1 << width, 0.3)))
    h = Histogram(counts, width)
    cb = build_codebook(h)
    if np.count_nonzero(counts) >= 2:
        p = to_pmf(h)
        assert shannon_entropy(p) - 1e-12 <= expected_code_length(p, cb) < shannon_entropy(p) + 1
        assert kraft_sum(cb.lengths) == 1.0


def test_codebook_serialization_roundtrip(rng):
    cb = build_codebook(Histogram(rng.integers(0, 100, 64), 6), id=7)
    blob = cb.to_bytes()
    assert blob[:4] == b"HUFC" and blob[5] == 6 and blob[6:8] == b"\x07\x00"
    assert len(blob) == 8 + 64
    assert Codebook.from_bytes(blob) == cb
    with pytest.raises(InvalidLengthsError):
        Codebook.from_bytes(blob[:-1])
