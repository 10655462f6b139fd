"""
How many coordinates fit through a fading digital link
======================================================

Each block the weakest outgoing link fixes a device's bit budget. The
budget then decides how many of the largest parameters survive top-l
sparsification with 16-bit quantization. Whatever is cut is remembered
and sent later.
"""
import numpy as np

from wireless_dsgd.channel import ChannelParams, digital_bits, sample_block_fading
from wireless_dsgd.compression import ErrorAccumulator, compress, max_sparsity_level, update_error
from wireless_dsgd.topology import generate_star_extended

params = ChannelParams(N=800)
g = generate_star_extended(seed=1, K=8, p=0.1)
M = 6  # slots in the block

for t in range(3):
    state = sample_block_fading(seed=1, t=t, graph=g)
    budgets = [digital_bits(i, state, params, M) for i in range(8)]
    print(f"block {t}: bits per device", [int(b) for b in budgets])

# budget -> sparsity for a d = 210 model
d = 210
for B in (200, 1000, 3000, 6000):
    print(f"B={B:5d} bits -> l={max_sparsity_level(B, d, 16)} of {d} entries")

# error feedback keeps what the channel dropped
rng = np.random.default_rng(0)
acc = ErrorAccumulator.zeros(d)
for t in range(5):
    theta = rng.standard_normal(d)
    sent = compress(theta + acc.e, 1500, 16)
    acc = update_error(acc, theta, sent)
    print(f"round {t}: sent {sent.l} entries, residual norm {np.linalg.norm(acc.e):.2f}")
