import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wireless_dsgd.compression import (ErrorAccumulator, compress, max_sparsity_level,
                                       position_bits, top_select, update_error)
from wireless_dsgd.errors import NumericError


def scan_oracle(B, d, b):
    """Largest l with log2 C(d, l) + b l <= B, by exact integer arithmetic."""
    best = 0
    for l in range(d + 1):
        room = B - b * l
        if room >= 0 and math.comb(d, l) <= 2 ** room:
            best = l
    return best


def test_top_select_examples():
    assert list(top_select([1, -5, 3], 1)) == [1]
    assert list(top_select([2, -2, 0], 1)) == [0]
    assert top_select([1, 2, 3], 0).size == 0


def test_sparsity_examples():
    assert max_sparsity_level(20, 10, 4) == 3
    assert max_sparsity_level(7, 10, 4) == 0
    assert max_sparsity_level(0, 10, 4) == 0
    assert max_sparsity_level(0, 1, 1) == 0


def test_sparsity_matches_scan_grid():
    for d in range(1, 51):
        for b in (1, 2, 3, 4, 8, 16):
            for B in range(0, 8 * d + 60, 3):
                assert max_sparsity_level(B, d, b) == scan_oracle(B, d, b), (B, d, b)


def test_sparsity_large_dimension():
    d, b = 7850, 16
    l = max_sparsity_level(50000, d, b)
    assert position_bits(d, l) + b * l <= 50000
    assert position_bits(d, l + 1) + b * (l + 1) > 50000


def test_single_survivor_exact():
    v = np.zeros(50)
    v[17] = -3.25
    sent = compress(v, position_bits(50, 1) + 16, 16)
    assert sent.l == 1
    out = sent.decompress()
    np.testing.assert_array_equal(out, v)


def test_quantizer_step_bound():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(100)
    sent = compress(v, 10**6, 16)
    lo, hi = sent.range_header
    out = sent.decompress()
    assert np.all(np.abs(out[sent.support] - v[sent.support]) <= (hi - lo) / 2**16 / 2 + 1e-15)
    assert np.all((out[sent.support] >= lo) & (out[sent.support] <= hi))


def test_zero_budget():
    assert not np.any(compress(np.arange(10.0), 0, 16).decompress())


def test_constant_survivors():
    v = np.array([0, 2.0, 2.0, 0.1])
    sent = compress(v, position_bits(4, 2) + 32, 16)
    assert sent.l == 2
    np.testing.assert_array_equal(sent.decompress(), [0, 2, 2, 0])


def test_non_finite_rejected():
    with pytest.raises(NumericError):
        compress([1.0, np.nan], 100, 8)


def test_header_charge():
    v = np.arange(1.0, 11.0)
    assert compress(v, 100, 4, charge_header=True).l == max_sparsity_level(36, 10, 4)


@given(v=arrays(float, st.integers(1, 60), elements=st.floats(-1e3, 1e3)),
       B=st.integers(0, 2000), b=st.integers(1, 16))
@settings(max_examples=300, deadline=None)
def test_bit_accounting_and_determinism(v, B, b):
    sent = compress(v, B, b)
    assert math.ceil(math.log2(math.comb(v.size, sent.l))) + b * sent.l <= B
    assert sent.payload_bits() <= B
    again = compress(v, B, b)
    np.testing.assert_array_equal(sent.support, again.support)
    np.testing.assert_array_equal(sent.codes, again.codes)
    mags = np.abs(v)
    if 0 < sent.l < v.size:
        dropped = np.setdiff1d(np.arange(v.size), sent.support)
        assert mags[sent.support].min() >= mags[dropped].max()


def test_random_transmissions_fit_budget():
    rng = np.random.default_rng(1)
    for _ in range(10**4):
        d = int(rng.integers(1, 300))
        B = int(rng.integers(0, 40 * d))
        b = int(rng.integers(1, 17))
        l = max_sparsity_level(B, d, b)
        assert position_bits(d, l) + b * l <= B


class TestErrorFeedback:
    def test_lossless_zero_error(self):
        theta = np.array([1.0, -2.0, 3.0])
        acc = update_error(ErrorAccumulator.zeros(3), theta, theta.copy())
        np.testing.assert_array_equal(acc.e, 0)

    def test_full_deferral(self):
        theta = np.array([1.0, -2.0, 3.0])
        acc = update_error(ErrorAccumulator.zeros(3), theta, np.zeros(3))
        np.testing.assert_array_equal(acc.e, theta)

    def test_dimension_mismatch(self):
        with pytest.raises(NumericError):
            update_error(ErrorAccumulator.zeros(3), np.zeros(4), np.zeros(4))

    def test_recursion_identity_and_boundedness(self):
        rng = np.random.default_rng(7)
        acc = ErrorAccumulator.zeros(200)
        norms = []
        for _ in range(100):
            theta = rng.uniform(-1, 1, 200)
            prev = acc.e.copy()
            sent = compress(theta + prev, 400, 8)
            acc = update_error(acc, theta, sent)
            np.testing.assert_allclose(acc.e - prev, theta - sent.decompress(), atol=1e-12)
            norms.append(np.linalg.norm(acc.e))
        assert acc.updates == 100
        # bounded: late norms do not keep growing
        assert max(norms[50:]) < 2.0 * max(norms[:50])
