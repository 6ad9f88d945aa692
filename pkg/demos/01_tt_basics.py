"""Tensor Train basics: cores, element access, reconstruction, TT-SVD.

A d-way tensor is stored as a chain of 3-way cores; each element is the
product of one matrix slice per mode.  This script builds a TT by hand,
checks it against the dense tensor, and shows how TT-SVD trades rank for
reconstruction error.
"""

import numpy as np

from ttconv import random_tt, tt_element, tt_full, tt_param_count, tt_svd

rng = np.random.default_rng(0)

# ----------------------------------------------------------------------
# A random TT with mode sizes (4, 5, 6) and interior ranks (2, 3)
# ----------------------------------------------------------------------
tt = random_tt((4, 5, 6), (2, 3), rng)
print("mode sizes:", tt.mode_sizes)
print("ranks:     ", tt.ranks)
print("parameters:", tt_param_count(tt), "vs dense", 4 * 5 * 6)

dense = tt_full(tt)
print("element [1,2,3] from chain:", tt_element(tt, (1, 2, 3)))
print("element [1,2,3] from dense:", dense[1, 2, 3])

# ----------------------------------------------------------------------
# TT-SVD recovers the tensor at its true ranks
# ----------------------------------------------------------------------
recovered = tt_svd(dense, max_ranks=(2, 3))
err = np.linalg.norm(tt_full(recovered) - dense) / np.linalg.norm(dense)
print(f"\nTT-SVD at the true ranks: relative error {err:.2e}")

# ----------------------------------------------------------------------
# Rank sweep on a noisy low-rank tensor: parameters vs error
# ----------------------------------------------------------------------
noisy = dense + 0.01 * rng.standard_normal(dense.shape)
print("\nrank cap | parameters | relative error")
for r in (1, 2, 3, 4):
    approx = tt_svd(noisy, max_ranks=(r, r))
    err = np.linalg.norm(tt_full(approx) - noisy) / np.linalg.norm(noisy)
    print(f"{r:8d} | {tt_param_count(approx):10d} | {err:.3e}")

# The tolerance mode picks ranks automatically for an error budget.
budget = tt_svd(noisy, tol=0.02)
err = np.linalg.norm(tt_full(budget) - noisy) / np.linalg.norm(noisy)
print(f"\ntol=0.02 chose ranks {budget.ranks} with error {err:.3e}")
