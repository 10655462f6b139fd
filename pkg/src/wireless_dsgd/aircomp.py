"""Analog over-the-air computation: precoding, reception and sparse recovery.

Every transmitted block is ``phi = A @ s`` where ``s`` is a sparse
parameter vector and ``A`` a shared Gaussian compression matrix. AirComp
transmitters invert their channel toward the star center so the center
observes the sum of the ``phi`` vectors; centers then broadcast their own
``phi`` and each neighbor equalizes it with its local channel knowledge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel import BlockChannelState, ChannelParams
from .errors import ConfigurationError, NumericError
from .scheduler import AnalogRound, AnalogSchedule


@dataclass(frozen=True)
class CompressionMatrix:
    """``m x d`` Gaussian matrix with N(0, 1/m) entries, shared by all devices."""

    entries: np.ndarray
    seed: int

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def d(self) -> int:
        return self.entries.shape[1]

    @cached_property
    def lipschitz(self) -> float:
        return spectral_norm_sq(self.entries)


def build_compression_matrix(session_seed, m: int, d: int, *,
                             allow_overdetermined: bool = False) -> CompressionMatrix:
    """Draw the session's compression matrix.

    ``m >= d`` is rejected unless ``allow_overdetermined`` is set; that mode
    exists only for lossless diagnostic runs.
    """
    if m < 1:
        raise ConfigurationError(f"need at least one channel use per slot, got m={m}")
    if m >= d and not allow_overdetermined:
        raise ConfigurationError(
            f"m={m} >= d={d}: no compression needed, analog mode expects m < d")
    rng = np.random.default_rng([int(session_seed), 0xA1C])
    entries = rng.standard_normal((m, d)) / math.sqrt(m)
    return CompressionMatrix(entries, int(session_seed))


def spectral_norm_sq(A: np.ndarray, iters: int = 2000, tol: float = 1e-6) -> float:
    """Largest eigenvalue of ``A.T @ A`` by power iteration."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        lam_new = float(np.linalg.norm(w))
        if not np.isfinite(lam_new):
            raise NumericError("power iteration diverged")
        if lam_new == 0.0:
            return 0.0
        v = w / lam_new
        if abs(lam_new - lam) <= tol * lam_new:
            # the estimate approaches from below; pad it so 1/L stays a safe step
            return lam_new * 1.01
        lam = lam_new
    raise NumericError("power iteration did not converge")


@dataclass(frozen=True)
class PowerScaling:
    gamma: float
    beta: dict = field(default_factory=dict)


def transmit_links(schedule: AnalogSchedule):
    """Yield ``(round_index, transmitter, center)`` for every AirComp link."""
    for r, rnd in enumerate(schedule.rounds):
        for c in sorted(rnd.centers):
            for j in rnd.transmitters_of(c):
                yield r, j, c


def deep_faded_links(schedule: AnalogSchedule, channels: BlockChannelState,
                     params: ChannelParams, gain_floor: float) -> set:
    """AirComp links ``(transmitter, center)`` whose gain is below ``gain_floor``."""
    return {(j, c) for _, j, c in transmit_links(schedule)
            if channels.gain(j, c, params) < gain_floor}


def compute_power_scaling(schedule: AnalogSchedule, payload_sqnorms,
                          channels: BlockChannelState, params: ChannelParams,
                          excluded=frozenset()) -> PowerScaling:
    """Common AirComp scale (global minimum over devices) and broadcast amplitudes.

    Each device splits its block energy ``P_bar * N`` equally over its
    ``n_c + n_b`` transmissions. ``gamma`` is the largest value that keeps
    every device's AirComp share within budget. A device with a zero payload
    puts no constraint on ``gamma``.
    """
    n_c, n_b = schedule.role_counts()
    energy = params.P_bar * params.N
    inv_gain_sum = np.zeros(schedule.node_count)
    for _, j, c in transmit_links(schedule):
        if (j, c) not in excluded:
            inv_gain_sum[j] += 1.0 / channels.gain(j, c, params)
    gamma = math.inf
    beta = {}
    for j in range(schedule.node_count):
        sq = float(payload_sqnorms[j])
        share = n_c[j] + n_b[j]
        if n_c[j] >= 1 and sq > 0 and inv_gain_sum[j] > 0:
            gamma = min(gamma, energy * n_c[j] / share / (sq * inv_gain_sum[j]))
        if n_b[j] == 1:
            beta[j] = math.sqrt(energy / (share * sq)) if sq > 0 else 0.0
    return PowerScaling(gamma, beta)


def complex_noise(rng: np.random.Generator | None, size: int, N0: float) -> np.ndarray:
    if rng is None or N0 == 0:
        return np.zeros(size, dtype=complex)
    z = rng.standard_normal((2, size))
    return math.sqrt(N0 / 2.0) * (z[0] + 1j * z[1])


def aircomp_receive(center: int, rnd: AnalogRound, phis: dict, scaling: PowerScaling,
                    channels: BlockChannelState, params: ChannelParams,
                    noise_rng: np.random.Generator | None = None, excluded=frozenset(),
                    energy: np.ndarray | None = None) -> np.ndarray:
    """Superposition received at ``center``, rescaled by ``1/sqrt(gamma)``.

    ``phis`` maps transmitters to their ``A @ s`` blocks. Excluded
    (deep-faded) links stay silent. Transmit energy is added into ``energy``
    when given.
    """
    m = next(iter(phis.values())).size if phis else 0
    y = complex_noise(noise_rng, m, params.N0)
    if not math.isfinite(scaling.gamma):
        # every payload is zero, nothing is transmitted and the noise vanishes after scaling
        return np.zeros(m)
    root = math.sqrt(scaling.gamma)
    for j in rnd.transmitters_of(center):
        if (j, center) in excluded:
            continue
        h = channels.effective(j, center, params)
        x = (root / h) * phis[j]
        if energy is not None:
            energy[j] += float(np.vdot(x, x).real)
        y = y + h * x
    return y.real / root


def broadcast_receive(receiver: int, center: int, phi: np.ndarray, scaling: PowerScaling,
                      channels: BlockChannelState, params: ChannelParams,
                      noise_rng: np.random.Generator | None = None,
                      gain_floor: float = 0.0) -> np.ndarray | None:
    """Equalized broadcast from ``center``; ``None`` marks a deep-fade erasure.

    The center's transmit energy is accounted separately (one broadcast per
    round, see :func:`broadcast_energy`).
    """
    if channels.gain(receiver, center, params) < gain_floor:
        return None
    beta = scaling.beta.get(center, 0.0)
    if beta == 0.0:
        return np.zeros(phi.size)
    h = channels.effective(center, receiver, params)
    y = h * (beta * phi) + complex_noise(noise_rng, phi.size, params.N0)
    return (y / h).real / beta


def broadcast_energy(center: int, phi: np.ndarray, scaling: PowerScaling) -> float:
    beta = scaling.beta.get(center, 0.0)
    return float(beta * beta * np.dot(phi, phi))


def noise_std_aircomp(params: ChannelParams, scaling: PowerScaling) -> float:
    """Per-coordinate std of the real noise after ``1/sqrt(gamma)`` scaling."""
    if not math.isfinite(scaling.gamma) or scaling.gamma == 0:
        return 0.0
    return math.sqrt(params.N0 / (2.0 * scaling.gamma))


def noise_std_broadcast(params: ChannelParams, scaling: PowerScaling, gain: float,
                        center: int) -> float:
    beta = scaling.beta.get(center, 0.0)
    if beta == 0.0 or gain == 0.0:
        return 0.0
    return math.sqrt(params.N0 / (2.0 * gain)) / beta


def default_lambda(y, A: CompressionMatrix, noise_std, scale: float = 1.0,
                   rel_floor: float = 1e-3) -> np.ndarray:
    """Universal threshold ``scale * sigma * sqrt(2 log d)``.

    A floor of ``rel_floor * max|A^T y|`` keeps noise-free problems sparse.
    """
    y = np.asarray(y, dtype=float)
    corr = np.abs(A.entries.T @ y).max(axis=0)
    universal = np.asarray(noise_std, dtype=float) * math.sqrt(2.0 * math.log(A.d))
    return scale * np.maximum(universal, rel_floor * corr)


def soft_threshold(x, thresh):
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def sparse_recover(y, A, lam=None, iters: int = 200, *, debias: bool = True) -> np.ndarray:
    """Approximate ``argmin 0.5*||y - A x||^2 + lam*||x||_1`` by FISTA.

    ``y`` may hold several observations as columns (``lam`` then broadcasts
    per column). The LASSO estimate is refit by least squares on its
    support when that support has at most ``m`` entries. When ``m >= d`` the
    system is overdetermined and the plain least-squares solution is returned.
    """
    mat = A if isinstance(A, CompressionMatrix) else CompressionMatrix(np.asarray(A, float), 0)
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = y[:, None] if single else y
    m, d = mat.entries.shape
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if m >= d:
        X = np.linalg.lstsq(mat.entries, Y, rcond=None)[0]
        return X[:, 0] if single else X
    if lam is None:
        lam = default_lambda(Y, mat, 0.0)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (Y.shape[1],))
    if np.any(lam < 0):
        raise ValueError("lambda must be >= 0")

    M = mat.entries
    L = mat.lipschitz
    if L == 0.0:
        X = np.zeros((d, Y.shape[1]))
        return X[:, 0] if single else X
    step = 1.0 / L
    x = np.zeros((d, Y.shape[1]))
    z = x.copy()
    t = 1.0
    Aty = M.T @ Y
    gram = M.T @ M
    # continuation: shrink lambda geometrically from max|A^T y| to its target
    # over the first half of the iterations; small targets converge far faster
    ramp = max(iters // 2, 1)
    start = np.maximum(np.abs(Aty).max(axis=0), lam)
    ratio = np.where(start > 0, lam / np.where(start > 0, start, 1.0), 1.0)
    for it in range(iters):
        frac = min(it / ramp, 1.0)
        lam_it = start * ratio ** frac if it < ramp else lam
        x_new = soft_threshold(z - step * (gram @ z - Aty), step * lam_it)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new

    if debias:
        for col in range(x.shape[1]):
            support = np.flatnonzero(x[:, col])
            if 0 < support.size <= m:
                x[support, col] = np.linalg.lstsq(M[:, support], Y[:, col], rcond=None)[0]
    return x[:, 0] if single else x
