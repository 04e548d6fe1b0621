import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from singlehuff.errors import CoverageError, EmptyHistogramError, InvalidConfigurationError, SupportError
from singlehuff.formats import Dtype
from singlehuff.huffman import Codebook, build_codebook
from singlehuff.stats import (
    Histogram,
    Pmf,
    ShardReport,
    average_pmf,
    compressibility,
    compressibility_from_length,
    cross_entropy,
    encoded_bits,
    expected_code_length,
    histogram,
    ideal_compressibility,
    kl_divergence,
    reports_from_csv,
    reports_to_csv,
    shannon_entropy,
    to_pmf,
)
from singlehuff.symbolize import SymbolStream

import oracles


def stream(symbols, width=8):
    return SymbolStream(np.asarray(symbols, dtype=np.int64), width, Dtype.E4M3 if width == 8 else Dtype.E2M1)


def dyadic_h625() -> Pmf:
    # 48 symbols at 2^-6 and 32 at 2^-7: H = 6 * 0.75 + 7 * 0.25 = 6.25 exactly
    p = np.zeros(256)
    p[:48] = 2.0**-6
    p[48:80] = 2.0**-7
    return Pmf(p, 8)


def random_hist(rng, width, total=None):
    alpha = rng.uniform(0.05, 2.0)
    p = rng.dirichlet(np.full(1 << width, alpha))
    n = total or int(rng.integers(1, 5000))
    return Histogram(rng.multinomial(n, p), width)


def test_histogram_counts():
    h = histogram(stream([0, 0, 1]))
    assert h.counts[0] == 2 and h.counts[1] == 1 and h.total == 3
    assert h.counts.size == 256


def test_histogram_empty():
    h = histogram(stream([]))
    assert h.total == 0 and not h.counts.any()


def test_histogram_uniform_binomial_bound(rng):
    n = 10**6
    h = histogram(stream(rng.integers(0, 256, n)))
    mean, sigma = n / 256, math.sqrt(n * (1 / 256) * (255 / 256))
    assert np.all(np.abs(h.counts - mean) <= 5 * sigma)


def test_histogram_addition_is_associative_and_commutative(rng):
    a, b, c = (random_hist(rng, 6) for _ in range(3))
    assert (a + b) + c == a + (b + c) == (c + a) + b


def test_to_pmf_examples():
    assert to_pmf(Histogram([1, 1, 0, 0], 2)).probs.tolist() == [0.5, 0.5, 0, 0]
    assert to_pmf(Histogram([3, 1, 0, 0], 2)).probs.tolist() == [0.75, 0.25, 0, 0]
    with pytest.raises(EmptyHistogramError):
        to_pmf(Histogram.zeros(4))


@given(st.lists(st.integers(0, 10**9), min_size=16, max_size=16).filter(any))
def test_pmf_normalized(counts):
    p = to_pmf(Histogram(counts, 4))
    assert abs(p.probs.sum() - 1.0) <= 1e-9
    assert (p.probs >= 0).all()


def test_entropy_examples():
    assert shannon_entropy(Pmf(np.full(256, 1 / 256), 8)) == 8.0
    single = np.zeros(256)
    single[7] = 1
    assert shannon_entropy(Pmf(single, 8)) == 0.0
    assert shannon_entropy(Pmf([0.5, 0.25, 0.125, 0.125], 2)) == 1.75
    assert shannon_entropy(dyadic_h625()) == 6.25


def test_ideal_compressibility_examples():
    assert ideal_compressibility(dyadic_h625()) == 0.21875
    assert compressibility_from_length(6.25, 8) == 0.21875
    assert ideal_compressibility(Pmf(np.full(16, 1 / 16), 4)) == 0.0
    single = np.zeros(64)
    single[0] = 1
    assert ideal_compressibility(Pmf(single, 6)) == 1.0


@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 6, 8]))
def test_entropy_bounds(seed, width):
    h = random_hist(np.random.default_rng(seed), width)
    H = shannon_entropy(h)
    assert 0.0 <= H <= width + 1e-12
    assert H == pytest.approx(oracles.entropy(to_pmf(h).probs), abs=1e-9)


def test_kl_examples():
    p = Pmf([0.1, 0.2, 0.3, 0.4], 2)
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence(Pmf([1, 0], 1), Pmf([0.5, 0.5], 1)) == 1.0
    with pytest.raises(SupportError):
        kl_divergence(Pmf([0.5, 0.5], 1), Pmf([1, 0], 1))
    with pytest.raises(InvalidConfigurationError):
        kl_divergence(Pmf([0.5, 0.5], 1), Pmf([0.25] * 4, 2))


def test_kl_self_is_tiny(rng):
    for _ in range(50):
        p = to_pmf(random_hist(rng, 8))
        assert kl_divergence(p, p) <= 1e-12


def test_kl_cross_entropy_decomposition(rng):
    for _ in range(200):
        width = int(rng.choice([4, 6, 8]))
        p = rng.dirichlet(np.full(1 << width, 0.5))
        q = rng.dirichlet(np.full(1 << width, 0.5))
        hpq = oracles.cross_entropy(p, q)
        assert abs(hpq - oracles.entropy(p) - kl_divergence(Pmf(p, width), Pmf(q, width))) < 1e-9
        assert cross_entropy(Pmf(p, width), Pmf(q, width)) == pytest.approx(hpq, abs=1e-9)


def test_average_pmf_examples():
    h = Histogram([3, 1, 0, 4], 2)
    assert average_pmf([h, h]) == to_pmf(h)
    assert average_pmf([Histogram([1, 0], 1), Histogram([0, 1], 1)]).probs.tolist() == [0.5, 0.5]
    with pytest.raises(EmptyHistogramError):
        average_pmf([Histogram.zeros(2), Histogram.zeros(2)])
    with pytest.raises(InvalidConfigurationError):
        average_pmf([])


def test_average_pmf_equals_pooled_stream(rng):
    streams = [rng.integers(0, 64, int(rng.integers(1, 500))) ** 2 // 64 for _ in range(20)]
    pooled = to_pmf(histogram(stream(np.concatenate(streams), 6)))
    assert average_pmf([histogram(stream(s, 6)) for s in streams]) == pooled


def test_expected_length_examples():
    p = Pmf([0.5, 0.25, 0.125, 0.125], 2)
    cb = build_codebook(Histogram([8, 4, 2, 2], 2))
    assert expected_code_length(p, cb) == 1.75 == shannon_entropy(p)
    fixed = Codebook.from_lengths(np.full(256, 8))
    assert expected_code_length(Pmf(np.full(256, 1 / 256), 8), fixed) == 8.0
    assert compressibility(Pmf(np.full(256, 1 / 256), 8), fixed) == 0.0


def test_expected_length_coverage_error():
    cb = Codebook.from_lengths([1, 1, 0, 0])
    with pytest.raises(CoverageError) as info:
        expected_code_length(Pmf([0.5, 0, 0.5, 0], 2), cb)
    assert info.value.symbol == 2


def test_compressibility_of_known_huffman_length():
    assert compressibility_from_length(6.27, 8) == pytest.approx(0.216, abs=5e-4)


def test_foreign_codebook_within_cross_entropy_bound(rng):
    for _ in range(200):
        width = int(rng.choice([4, 6, 8]))
        hp = random_hist(rng, width)
        hq = Histogram(random_hist(rng, width).counts + 1, width)
        cb = build_codebook(hq)
        p, q = to_pmf(hp), to_pmf(hq)
        L = expected_code_length(p, cb)
        assert shannon_entropy(p) - 1e-12 <= L < oracles.cross_entropy(p.probs, q.probs) + 1


def test_encoded_bits_is_dot_product(rng):
    h = random_hist(rng, 8)
    cb = build_codebook(h)
    assert encoded_bits(h, cb) == sum(int(c) * int(l) for c, l in zip(h.counts, cb.lengths))


def test_shard_report_and_csv(rng):
    hists = [random_hist(rng, 8, 4000) for _ in range(5)]
    avg = average_pmf(hists)
    fixed = build_codebook(Histogram(sum(h.counts for h in hists) + 1, 8))
    reports = [ShardReport.compute(f"s{i}", h, avg, fixed) for i, h in enumerate(hists)]
    for r in reports:
        assert r.fixed_codebook_compressibility <= r.huffman_compressibility <= r.ideal_compressibility + 1 / 8
        assert r.kl_from_average >= 0
    text = reports_to_csv(reports, summary=True)
    lines = text.strip().splitlines()
    assert lines[0] == ("shard_id,entropy_bits,ideal_compressibility,huffman_compressibility,"
                        "fixed_codebook_compressibility,kl_from_average")
    assert len(lines) == 7 and lines[-1].startswith("mean,")
    assert reports_from_csv(text) == reports
