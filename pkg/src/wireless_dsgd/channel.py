"""Block-fading D2D links: path loss, Rayleigh fading and digital bit budgets."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ScheduleError
from .topology import ConnectivityGraph, Edge

# stream tags keep fading and noise draws independent for the same (seed, block)
FADING_STREAM = 1
NOISE_STREAM = 2


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt * 1000.0)


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget constants, all in linear units (W, m)."""

    A0: float = 10.0 ** -3.35
    d0: float = 1.0
    gamma_pl: float = 3.76
    N0: float = dbm_to_watt(-169.0)
    P_bar: float = 1e-3
    N: int = 30000

    def __post_init__(self):
        for name in ("A0", "d0", "gamma_pl", "P_bar"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"channel parameter {name} must be > 0")
        if self.N0 < 0:
            raise ConfigurationError("N0 must be >= 0 (0 disables noise)")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError("N must be a positive integer")

    @classmethod
    def from_db(cls, a0_db=-33.5, d0_m=1.0, pathloss_exp=3.76, n0_dbm=-169.0,
                pbar_mw=1.0, channel_uses_per_block=30000):
        n0 = 0.0 if n0_dbm is None or n0_dbm == float("-inf") else dbm_to_watt(n0_dbm)
        return cls(A0=10.0 ** (a0_db / 10.0), d0=d0_m, gamma_pl=pathloss_exp, N0=n0,
                   P_bar=pbar_mw / 1000.0, N=int(channel_uses_per_block))

    def path_gain(self, distance: float) -> float:
        return self.A0 * (self.d0 / distance) ** self.gamma_pl


@dataclass(frozen=True)
class BlockChannelState:
    """Fading coefficients of one communication block.

    ``h`` maps each unordered edge to a complex CN(0, 1) draw shared by both
    directions (reciprocity).
    """

    graph: ConnectivityGraph
    h: dict

    def coefficient(self, i: int, j: int) -> complex:
        return self.h[(i, j) if i < j else (j, i)]

    def effective(self, i: int, j: int, params: ChannelParams) -> complex:
        """Complex effective channel including path loss."""
        amp = math.sqrt(params.path_gain(self.graph.distance(i, j)))
        return amp * self.coefficient(i, j)

    def gain(self, i: int, j: int, params: ChannelParams) -> float:
        """Effective power gain ``A0 (d0/d)^gamma |h|^2``."""
        return params.path_gain(self.graph.distance(i, j)) * abs(self.coefficient(i, j)) ** 2

    def gains(self, params: ChannelParams) -> dict[Edge, float]:
        return {e: self.gain(*e, params) for e in self.graph.sorted_edges()}


def block_rng(seed, t: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(t), int(stream)])


def sample_block_fading(seed, t: int, graph: ConnectivityGraph) -> BlockChannelState:
    edges = graph.sorted_edges()
    rng = block_rng(seed, t, FADING_STREAM)
    z = rng.standard_normal((len(edges), 2)) / math.sqrt(2.0)
    h = {e: complex(re, im) for e, (re, im) in zip(edges, z)}
    return BlockChannelState(graph, h)


def digital_bits(i: int, state: BlockChannelState, params: ChannelParams, M: int) -> float:
    """Bits device ``i`` can deliver to all neighbors in its slot.

    Returns ``inf`` when noise is disabled.
    """
    if M < 1:
        raise ConfigurationError("slot count must be >= 1")
    nbrs = state.graph.neighbors(i)
    if not nbrs:
        raise ScheduleError(f"device {i} has no neighbors and cannot be scheduled")
    uses = params.N // M
    g_min = min(state.gain(i, j, params) for j in nbrs)
    if params.N0 == 0:
        return math.inf if g_min > 0 and uses > 0 else 0.0
    return float(math.floor(uses * math.log2(1.0 + params.P_bar * M / params.N0 * g_min)))


def receive_snr_db(graph: ConnectivityGraph, params: ChannelParams, seed, blocks: int = 1) -> float:
    """Device-average receive SNR in dB.

    Each device's SNR is ``P_bar * g / N0`` averaged (linearly) over its
    incoming links and over ``blocks`` fading realizations; the result is the
    mean of the per-device dB values.
    """
    per_device = np.zeros(graph.node_count)
    counts = np.zeros(graph.node_count)
    for t in range(blocks):
        state = sample_block_fading(seed, t, graph)
        for (i, j), g in state.gains(params).items():
            snr = params.P_bar * g / params.N0
            per_device[i] += snr
            per_device[j] += snr
            counts[i] += 1
            counts[j] += 1
    mask = counts > 0
    return float(np.mean(10.0 * np.log10(per_device[mask] / counts[mask])))
