"""
Over-the-air sums and sparse recovery
=====================================

Leaves invert their channel so the center receives A @ (s1 + s2 + ...)
directly. The center then runs LASSO to get the sum back in full
dimension. Fewer channel uses m means fewer measurements and a worse
estimate.
"""
import numpy as np

from wireless_dsgd.aircomp import build_compression_matrix, sparse_recover
from wireless_dsgd.compression import sparsify

rng = np.random.default_rng(4)
d, k, leaves = 210, 8, 4
payloads = [sparsify(rng.standard_normal(d), k) for _ in range(leaves)]
total = np.sum(payloads, axis=0)
print("nonzeros in the sum:", np.count_nonzero(total))

for m in (150, 100, 60, 30):
    A = build_compression_matrix(0, m, d)
    y = A.entries @ total                   # the noise-free superposition
    y_noisy = y + 1e-3 * rng.standard_normal(m)
    exact = sparse_recover(y, A)
    noisy = sparse_recover(y_noisy, A, lam=1e-3 * np.sqrt(2 * np.log(d)))
    rel = lambda x: np.linalg.norm(x - total) / np.linalg.norm(total)
    print(f"m={m:3d}: relative error noise-free {rel(exact):.1e}, noisy {rel(noisy):.1e}")
