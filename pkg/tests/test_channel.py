import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wireless_dsgd.channel import (BlockChannelState, ChannelParams, dbm_to_watt, digital_bits,
                                   receive_snr_db, sample_block_fading)
from wireless_dsgd.errors import ScheduleError
from wireless_dsgd.topology import from_edges


def complete(K):
    return from_edges(K, itertools.combinations(range(K), 2))


def unit_params(**kw):
    base = dict(A0=1.0, d0=1.0, gamma_pl=2.0, N0=1.0, P_bar=1.0, N=100)
    base.update(kw)
    return ChannelParams(**base)


def fixed_state(K, h, positions=None):
    g = from_edges(K, h.keys(), positions)
    return BlockChannelState(g, dict(h))


def test_unit_second_moment():
    g = complete(1415)  # ~10^6 edges
    state = sample_block_fading(1, 0, g)
    h = np.array(list(state.h.values()))
    assert h.size >= 10**6
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) <= 0.005


def test_deterministic():
    g = complete(8)
    assert sample_block_fading(5, 3, g).h == sample_block_fading(5, 3, g).h


def test_blocks_independent():
    g = complete(142)
    a = np.abs(np.array(list(sample_block_fading(5, 3, g).h.values()))) ** 2
    b = np.abs(np.array(list(sample_block_fading(5, 4, g).h.values()))) ** 2
    assert a.size >= 10**4
    assert abs(np.corrcoef(a, b)[0, 1]) <= 0.03


def test_reciprocity():
    state = sample_block_fading(0, 0, complete(5))
    p = ChannelParams()
    for i, j in itertools.permutations(range(5), 2):
        assert state.gain(i, j, p) == state.gain(j, i, p)


def test_bits_direct_evaluation():
    # floor(N/M) = 100 and (P M / N0) * g = 3 -> 100 * log2(4)
    state = fixed_state(2, {(0, 1): 1.0 + 0j})
    assert digital_bits(0, state, unit_params(A0=3.0), M=1) == 200


def test_bits_zero_gain():
    state = fixed_state(2, {(0, 1): 0j})
    assert digital_bits(0, state, unit_params(), M=1) == 0


def test_bits_use_weakest_neighbor():
    # unit-distance links with gains 3 and 12; the weaker one sets 100 * log2(4)
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    state = fixed_state(3, {(0, 1): 1 + 0j, (0, 2): 2 + 0j}, pos)
    assert digital_bits(0, state, unit_params(A0=3.0), M=1) == 200


def test_bits_need_neighbors():
    state = fixed_state(3, {(0, 1): 1 + 0j})
    with pytest.raises(ScheduleError):
        digital_bits(2, state, unit_params(), M=1)


@given(scale=st.floats(1.0, 100.0), pbar=st.floats(1e-4, 1e-2), seed=st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_bits_monotone(scale, pbar, seed):
    g = complete(4)
    state = sample_block_fading(seed, 0, g)
    boosted = BlockChannelState(g, {e: h * math.sqrt(scale) for e, h in state.h.items()})
    p = ChannelParams(P_bar=pbar, N=1000)
    for i in range(4):
        base = digital_bits(i, state, p, 3)
        assert digital_bits(i, boosted, p, 3) >= base
        assert digital_bits(i, state, ChannelParams(P_bar=pbar * scale, N=1000), 3) >= base


def test_unit_conversion():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    p = ChannelParams.from_db(n0_dbm=-169.0, pbar_mw=1.0)
    assert p.N0 == pytest.approx(10 ** -19.9)
    assert p.P_bar == pytest.approx(1e-3)
    assert p.A0 == pytest.approx(10 ** -3.35)


def test_snr_metric_closed_form():
    # one link at 10 m with A0=1, gamma=2: gain = 0.01 |h|^2
    pos = np.array([[0.0, 0.0], [10.0, 0.0]])
    g = from_edges(2, [(0, 1)], pos)
    p = ChannelParams(A0=1.0, d0=1.0, gamma_pl=2.0, N0=1e-6, P_bar=1.0, N=10)
    blocks = 20000
    snr = receive_snr_db(g, p, seed=3, blocks=blocks)
    # E|h|^2 = 1 so the linear mean SNR is 1e4 -> 40 dB
    assert snr == pytest.approx(40.0, abs=0.1)
