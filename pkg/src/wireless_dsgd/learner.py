"""DSGD engine: softmax regression, local SGD and the consensus updates.

All consensus variants share one update rule

    theta_i <- w_ii * theta_i + alpha * (sum of neighbor payloads) - eta * grad_i

and differ only in how the neighbor payload sum reaches device ``i``:
exactly (ideal), through quantized digital packets, or through analog
over-the-air reception plus sparse recovery. Gradients are taken at the
pre-consensus parameters and every update reads only pre-update state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import aircomp, channel
from .compression import ErrorAccumulator, compress, sparsify, update_error
from .data import Dataset
from .errors import NumericError
from .scheduler import AnalogSchedule, DigitalSchedule
from .topology import MixingMatrix


def param_dim(num_features: int, num_classes: int) -> int:
    return (num_features + 1) * num_classes


def split_params(theta: np.ndarray, num_features: int, num_classes: int):
    weights = theta[: num_features * num_classes].reshape(num_features, num_classes)
    bias = theta[num_features * num_classes:]
    return weights, bias


def logits(theta, X, num_classes: int) -> np.ndarray:
    weights, bias = split_params(np.asarray(theta, float), X.shape[1], num_classes)
    return X @ weights + bias


def loss_and_grad(theta, X, y, num_classes: int):
    """Mean cross-entropy of a softmax-regression model and its exact gradient."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite features in batch")
    z = logits(theta, X, num_classes)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(X.shape[0])
    loss = float(np.mean(log_norm - z[rows, y]))
    probs = np.exp(z - log_norm[:, None])
    probs[rows, y] -= 1.0
    probs /= X.shape[0]
    grad = np.concatenate([(X.T @ probs).ravel(), probs.sum(axis=0)])
    return loss, grad


TIE_TOL = 1e-9


def predict(theta, X, num_classes: int) -> np.ndarray:
    """Top-1 class; logits within ``TIE_TOL`` (relative) of the best count as tied.

    Classes a device never saw keep identical parameters, so exact ties are
    common and plain argmax would settle them by rounding noise. Ties go to
    the lowest class index.
    """
    z = logits(theta, X, num_classes)
    top = z.max(axis=1, keepdims=True)
    return np.argmax(z >= top - TIE_TOL * (1.0 + np.abs(top)), axis=1)


def accuracy(theta, data: Dataset) -> float:
    return float(np.mean(predict(theta, data.features, data.num_classes) == data.labels))


@dataclass
class LearningConfig:
    eta0: float = 0.05
    decay_iters: float = 500.0
    tau: int = 10
    batch_size: int = 32
    total_blocks: int = 100

    def __post_init__(self):
        if self.tau < 1 or self.batch_size < 1:
            raise ValueError("tau and batch_size must be >= 1")

    def eta(self, t: int) -> float:
        return self.eta0 / (1.0 + t / self.decay_iters)

    @property
    def total_iterations(self) -> int:
        return self.total_blocks * self.tau


@dataclass
class DeviceState:
    id: int
    theta: np.ndarray
    shard: Dataset
    rng: np.random.Generator
    error: ErrorAccumulator = None

    def __post_init__(self):
        if len(self.shard) == 0:
            raise ValueError(f"device {self.id} has an empty shard")
        if self.error is None:
            self.error = ErrorAccumulator.zeros(self.theta.size)


def make_devices(shards, d: int, seed, init_scale: float = 0.0) -> list[DeviceState]:
    """One device per shard with its own mini-batch stream.

    ``init_scale > 0`` draws each device's initial parameters from
    N(0, init_scale^2); otherwise every device starts at zero.
    """
    streams = np.random.SeedSequence([int(seed), 0xDE5]).spawn(len(shards))
    devices = []
    for i, (shard, ss) in enumerate(zip(shards, streams)):
        rng = np.random.default_rng(ss)
        theta = init_scale * rng.standard_normal(d) if init_scale > 0 else np.zeros(d)
        devices.append(DeviceState(i, theta, shard, rng))
    return devices


def stochastic_gradient(device: DeviceState, batch_size: int) -> np.ndarray:
    n = len(device.shard)
    if batch_size >= n:
        idx = np.arange(n)
    else:
        idx = device.rng.choice(n, size=batch_size, replace=False)
    _, grad = loss_and_grad(device.theta, device.shard.features[idx], device.shard.labels[idx],
                            device.shard.num_classes)
    return grad


def local_step(device: DeviceState, t: int, cfg: LearningConfig) -> DeviceState:
    grad = stochastic_gradient(device, cfg.batch_size)
    device.theta = device.theta - cfg.eta(t) * grad
    return device


def _apply_consensus(devices, W: MixingMatrix, neighbor_sums, grads, eta: float):
    new = [W.self_weight(i) * dev.theta + W.alpha * neighbor_sums[i] - eta * grads[i]
           for i, dev in enumerate(devices)]
    for dev, theta in zip(devices, new):
        dev.theta = theta
    return devices


def _neighbors(W: MixingMatrix) -> list[list[int]]:
    K = W.weights.shape[0]
    return [[j for j in range(K) if j != i and W.weights[i, j] != 0.0] for i in range(K)]


def ideal_consensus(devices, W: MixingMatrix, t: int, cfg: LearningConfig):
    grads = [stochastic_gradient(dev, cfg.batch_size) for dev in devices]
    sums = []
    for i, nbrs in enumerate(_neighbors(W)):
        acc = np.zeros_like(devices[i].theta)
        for j in nbrs:
            acc = acc + devices[j].theta
        sums.append(acc)
    return _apply_consensus(devices, W, sums, grads, cfg.eta(t))


@dataclass
class DigitalConfig:
    quant_bits: int = 16
    charge_header_bits: bool = False
    lossless: bool = False


def digital_consensus(devices, W: MixingMatrix, schedule: DigitalSchedule,
                      channels: channel.BlockChannelState, params: channel.ChannelParams,
                      cfg: LearningConfig, t: int, dcfg: DigitalConfig | None = None,
                      stats: dict | None = None):
    """Consensus over quantized, error-compensated digital packets.

    Devices with a zero bit budget send nothing; receivers count their
    contribution as zero and the sender keeps it in its error accumulator.
    """
    dcfg = dcfg or DigitalConfig()
    grads = [stochastic_gradient(dev, cfg.batch_size) for dev in devices]
    graph = channels.graph
    received = {}
    for dev in devices:
        i = dev.id
        if not graph.neighbors(i):
            continue
        budget = channel.digital_bits(i, channels, params, schedule.num_slots)
        sent = compress(dev.theta + dev.error.e, budget, dcfg.quant_bits,
                        charge_header=dcfg.charge_header_bits, lossless=dcfg.lossless)
        if not dcfg.lossless:
            used = sent.payload_bits()
            if used > budget:
                raise NumericError(f"device {i} sent {used} bits over a {budget}-bit budget")
        received[i] = sent.decompress()
        dev.error = update_error(dev.error, dev.theta, received[i])
        if stats is not None:
            stats.setdefault("bits", []).append(budget)
            stats.setdefault("sparsity", []).append(sent.l)
    sums = []
    for i, nbrs in enumerate(_neighbors(W)):
        acc = np.zeros_like(devices[i].theta)
        for j in nbrs:
            acc = acc + received[j]
        sums.append(acc)
    return _apply_consensus(devices, W, sums, grads, cfg.eta(t))


def default_sparsity(d: int, K: int) -> int:
    """Per-device sparsity ``floor(d * (1 - 0.4**(1/K)))``."""
    return int(math.floor(d * (1.0 - 0.4 ** (1.0 / K))))


@dataclass
class AnalogConfig:
    sparsity_k: int | None = None
    lasso_lambda_scale: float = 1.0
    lasso_iters: int = 200
    deep_fade_threshold: float = 1e-2


def analog_consensus(devices, W: MixingMatrix, schedule: AnalogSchedule,
                     matrix: aircomp.CompressionMatrix, channels: channel.BlockChannelState,
                     params: channel.ChannelParams, cfg: LearningConfig, t: int,
                     acfg: AnalogConfig | None = None,
                     noise_rng: np.random.Generator | None = None,
                     stats: dict | None = None):
    """Consensus over AirComp rounds.

    A center recovers the sum of its round's transmitters from one AirComp
    slot; each of those transmitters recovers the center's payload from the
    broadcast slot. Every edge therefore contributes once per block.
    """
    acfg = acfg or AnalogConfig()
    K = len(devices)
    d = devices[0].theta.size
    k = acfg.sparsity_k if acfg.sparsity_k is not None else default_sparsity(d, K)
    grads = [stochastic_gradient(dev, cfg.batch_size) for dev in devices]

    payloads = [sparsify(dev.theta + dev.error.e, k) for dev in devices]
    phis = [matrix.entries @ s for s in payloads]
    gains = list(channels.gains(params).values())
    floor = acfg.deep_fade_threshold * float(np.median(gains)) if gains else 0.0
    excluded = aircomp.deep_faded_links(schedule, channels, params, floor)
    scaling = aircomp.compute_power_scaling(
        schedule, [float(phi @ phi) for phi in phis], channels, params, excluded)

    energy = np.zeros(K)
    observations, noise_stds, owners = [], [], []
    for rnd in schedule.rounds:
        for c in sorted(rnd.centers):
            tx = rnd.transmitters_of(c)
            if not tx:
                continue
            y = aircomp.aircomp_receive(c, rnd, {j: phis[j] for j in tx}, scaling, channels,
                                        params, noise_rng, excluded, energy)
            observations.append(y)
            noise_stds.append(aircomp.noise_std_aircomp(params, scaling))
            owners.append(c)
            energy[c] += aircomp.broadcast_energy(c, phis[c], scaling)
            for j in tx:
                y = aircomp.broadcast_receive(j, c, phis[c], scaling, channels, params,
                                              noise_rng, floor)
                if y is None:
                    continue
                observations.append(y)
                noise_stds.append(aircomp.noise_std_broadcast(
                    params, scaling, channels.gain(j, c, params), c))
                owners.append(j)

    sums = [np.zeros(d) for _ in range(K)]
    if observations:
        Y = np.column_stack(observations)
        lam = aircomp.default_lambda(Y, matrix, noise_stds, acfg.lasso_lambda_scale)
        X = aircomp.sparse_recover(Y, matrix, lam, acfg.lasso_iters)
        for col, i in enumerate(owners):
            sums[i] = sums[i] + X[:, col]

    n_c, n_b = schedule.role_counts()
    for dev in devices:
        if n_c[dev.id] + n_b[dev.id] > 0:
            dev.error = update_error(dev.error, dev.theta, payloads[dev.id])

    if stats is not None:
        budget = params.P_bar * params.N
        stats.setdefault("energy", []).append(energy.copy())
        stats["power_violations"] = stats.get("power_violations", 0) + int(
            np.sum(energy > budget * (1.0 + 1e-9)))
        stats.setdefault("excluded_links", []).append(len(excluded))
        stats.setdefault("gamma", []).append(scaling.gamma)
    return _apply_consensus(devices, W, sums, grads, cfg.eta(t))
