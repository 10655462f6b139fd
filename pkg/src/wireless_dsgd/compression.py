"""Top-l sparsification, b-bit quantization and error feedback for digital links."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import NumericError

HEADER_BITS = 64


def top_select(v, l: int) -> np.ndarray:
    """Indices of the ``l`` largest-magnitude entries, ties to the lower index.

    The result is sorted ascending.
    """
    v = np.asarray(v, dtype=float)
    if not 0 <= l <= v.size:
        raise ValueError(f"l={l} outside [0, {v.size}]")
    if l == 0:
        return np.empty(0, dtype=np.int64)
    # stable sort on -|v| keeps lower indices first among equal magnitudes
    order = np.argsort(-np.abs(v), kind="stable")
    return np.sort(order[:l])


def sparsify(v, k: int) -> np.ndarray:
    """Zero all but the ``k`` largest-magnitude entries."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    idx = top_select(v, k)
    out[idx] = v[idx]
    return out


def log2_binomial(d: int, l) -> np.ndarray:
    l = np.asarray(l, dtype=float)
    return (gammaln(d + 1.0) - gammaln(l + 1.0) - gammaln(d - l + 1.0)) / math.log(2.0)


def position_bits(d: int, l: int) -> int:
    """Integer bits needed to index one ``l``-subset of ``d`` positions."""
    return (math.comb(d, l) - 1).bit_length()


def max_sparsity_level(B, d: int, b: int, header_bits: int = 0) -> int:
    """Largest ``l`` in ``[0, d]`` with ``log2 C(d, l) + b*l (+ header) <= B``.

    The cost is not monotone in ``l`` (it falls again near ``l = d`` when
    ``b`` is small), so every ``l`` is checked. Borderline cases are settled
    with exact integer binomials.
    """
    if d < 1 or b < 1:
        raise ValueError("need d >= 1 and b >= 1")
    if B is None or math.isinf(B):
        return d
    B = math.floor(B) - header_bits
    if B < 0:
        return 0
    ls = np.arange(d + 1)
    slack = (B - b * ls) - log2_binomial(d, ls)
    for l in np.flatnonzero(slack > -1e-6)[::-1]:
        l = int(l)
        if slack[l] > 1e-6:
            return l
        room = B - b * l
        if room >= 0 and math.comb(d, l) <= 2 ** room:
            return l
    return 0


@dataclass(frozen=True)
class CompressedVector:
    """A sparse payload: support positions plus b-bit codes over ``[lo, hi]``."""

    length: int
    support: np.ndarray
    codes: np.ndarray
    lo: float
    hi: float
    bits_per_value: int
    lossless_values: np.ndarray | None = None

    @property
    def l(self) -> int:
        return int(self.support.size)

    @property
    def range_header(self) -> tuple[float, float]:
        return self.lo, self.hi

    def values(self) -> np.ndarray:
        if self.lossless_values is not None:
            return self.lossless_values
        if self.hi == self.lo:
            return np.full(self.l, self.lo)
        step = (self.hi - self.lo) / 2.0 ** self.bits_per_value
        return self.lo + (self.codes + 0.5) * step

    def payload_bits(self) -> int:
        return position_bits(self.length, self.l) + self.bits_per_value * self.l

    def decompress(self) -> np.ndarray:
        out = np.zeros(self.length)
        out[self.support] = self.values()
        return out


def quantize(values: np.ndarray, b: int):
    """Uniform mid-rise quantizer over the range of ``values``.

    Returns ``(codes, lo, hi)``; reconstruction is the cell midpoint.
    """
    if values.size == 0:
        return np.empty(0, dtype=np.int64), 0.0, 0.0
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros(values.size, dtype=np.int64), lo, hi
    levels = 2 ** b
    step = (hi - lo) / levels
    codes = np.floor((values - lo) / step).astype(np.int64)
    return np.clip(codes, 0, levels - 1), lo, hi


def compress(v, B, b: int = 16, *, charge_header: bool = False,
             lossless: bool = False) -> CompressedVector:
    """Sparsify ``v`` to the budget ``B`` and quantize survivors to ``b`` bits.

    ``lossless=True`` bypasses both steps (diagnostic identity channel).
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NumericError("cannot compress non-finite values")
    d = v.size
    if lossless:
        support = np.arange(d)
        return CompressedVector(d, support, np.zeros(d, dtype=np.int64), 0.0, 0.0, b,
                                lossless_values=v.copy())
    l = max_sparsity_level(B, d, b, HEADER_BITS if charge_header else 0)
    support = top_select(v, l)
    codes, lo, hi = quantize(v[support], b)
    return CompressedVector(d, support, codes, lo, hi, b)


@dataclass
class ErrorAccumulator:
    """Residual memory fed back into the next transmission (starts at zero)."""

    e: np.ndarray
    updates: int = 0

    @classmethod
    def zeros(cls, d: int) -> "ErrorAccumulator":
        return cls(np.zeros(d))


def update_error(acc: ErrorAccumulator, theta, sent) -> ErrorAccumulator:
    """``e <- e + theta - sent`` where ``sent`` was built from ``theta + e``."""
    theta = np.asarray(theta, dtype=float)
    sent_vec = sent.decompress() if isinstance(sent, CompressedVector) else np.asarray(sent, float)
    if theta.shape != acc.e.shape or sent_vec.shape != acc.e.shape:
        raise NumericError(
            f"dimension mismatch: e{acc.e.shape}, theta{theta.shape}, sent{sent_vec.shape}")
    return ErrorAccumulator(acc.e + (theta - sent_vec), acc.updates + 1)
