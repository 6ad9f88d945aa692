"""Tensor Train (TT) format: cores, element access, reconstruction, TT-SVD.

A d-dimensional tensor ``A`` with mode sizes ``(n_1, ..., n_d)`` is stored as a
chain of cores ``G_k`` of shape ``(r_{k-1}, n_k, r_k)`` with ``r_0 = r_d = 1``,
so that ``A[j_1, ..., j_d] = G_1[:, j_1, :] @ ... @ G_d[:, j_d, :]`` collapses
to a scalar.  All indices in this package are 0-based; dense arrays use numpy's
C order (last index fastest).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError, SizeError

# Materialization cap for tt_full (number of elements).
FULL_ELEMENT_CAP = 10**8

# Singular values closer than this (relative to the largest one) are treated
# as tied at a truncation boundary; the tied value is kept.
_TIE_RTOL = 1e-12


class TTTensor:
    """Immutable tensor in TT format.

    Parameters
    ----------
    cores : sequence of ndarray
        Core ``k`` has shape ``(r_{k-1}, n_k, r_k)``; boundary ranks must be 1
        and adjacent ranks must chain.
    """

    __slots__ = ("cores",)

    def __init__(self, cores):
        if len(cores) == 0:
            raise ShapeError("TT tensor needs at least one core")
        frozen = []
        for k, core in enumerate(cores):
            arr = np.array(core, dtype=np.float64)
            if arr.ndim != 3:
                raise ShapeError(f"core {k} must be 3-dimensional, got shape {arr.shape}")
            frozen.append(arr)
        if frozen[0].shape[0] != 1 or frozen[-1].shape[2] != 1:
            raise ShapeError("boundary TT-ranks must equal 1")
        for k in range(len(frozen) - 1):
            if frozen[k].shape[2] != frozen[k + 1].shape[0]:
                raise ShapeError(
                    f"rank mismatch between cores {k} and {k + 1}: "
                    f"{frozen[k].shape[2]} vs {frozen[k + 1].shape[0]}"
                )
        for arr in frozen:
            arr.flags.writeable = False
        self.cores = tuple(frozen)

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def mode_sizes(self) -> tuple:
        return tuple(core.shape[1] for core in self.cores)

    @property
    def ranks(self) -> tuple:
        return (1,) + tuple(core.shape[2] for core in self.cores)

    def __repr__(self):
        return f"TTTensor(mode_sizes={self.mode_sizes}, ranks={self.ranks})"


def tt_element(tt: TTTensor, index) -> float:
    """Single element ``G_1[j_1] @ ... @ G_d[j_d]``, evaluated left to right."""
    index = tuple(index)
    if len(index) != tt.ndim:
        raise IndexError(f"expected {tt.ndim} indices, got {len(index)}")
    for k, (j, n) in enumerate(zip(index, tt.mode_sizes)):
        if not 0 <= j < n:
            raise IndexError(f"index {j} out of range for mode {k} of size {n}")
    v = tt.cores[0][:, index[0], :]
    for k in range(1, tt.ndim):
        v = v @ tt.cores[k][:, index[k], :]
    return float(v[0, 0])


def tt_full(tt: TTTensor) -> np.ndarray:
    """Materialize the full dense tensor (shape = mode_sizes)."""
    n_elements = math.prod(tt.mode_sizes)
    if n_elements > FULL_ELEMENT_CAP:
        raise SizeError(
            f"refusing to materialize {n_elements} elements (cap {FULL_ELEMENT_CAP})"
        )
    full = tt.cores[0].reshape(tt.mode_sizes[0], -1)
    for core in tt.cores[1:]:
        r_prev, n_k, r_k = core.shape
        full = full.reshape(-1, r_prev) @ core.reshape(r_prev, n_k * r_k)
    return full.reshape(tt.mode_sizes)


def tt_param_count(tt: TTTensor) -> int:
    """Total number of core entries: sum over k of n_k * r_{k-1} * r_k."""
    return sum(core.size for core in tt.cores)


def _truncation_rank(s: np.ndarray, budget: float) -> int:
    """Smallest kept rank whose discarded tail satisfies sum(s_i^2) <= budget^2.

    Ties at the cutoff (values equal within _TIE_RTOL of s[0]) keep the extra
    value; sub-noise values never extend the rank.
    """
    tail = np.cumsum(s[::-1] ** 2)[::-1]
    keep = np.nonzero(tail > budget**2)[0]
    r = int(keep[-1]) + 1 if keep.size else 1
    while r < len(s) and s[r] > _TIE_RTOL * s[0] and s[r - 1] - s[r] <= _TIE_RTOL * s[0]:
        r += 1
    return r


def tt_svd(a, max_ranks=None, tol: float | None = None) -> TTTensor:
    """Decompose a dense tensor into TT format by a sequential SVD sweep.

    Exactly one of ``max_ranks`` (interior rank caps, length d-1) and ``tol``
    (relative Frobenius error budget in (0, 1)) must be given.  With ``tol``,
    each of the d-1 unfoldings is truncated at threshold
    ``tol * ||a||_F / sqrt(d-1)``, which bounds the total relative error by
    ``tol``.  A zero tensor returns an all-ranks-1 TT with zero cores.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.size == 0:
        raise ShapeError("cannot decompose an empty tensor")
    if (max_ranks is None) == (tol is None):
        raise ValueError("exactly one of max_ranks and tol must be supplied")
    d = a.ndim
    shape = a.shape
    if max_ranks is not None:
        max_ranks = tuple(int(r) for r in max_ranks)
        if len(max_ranks) != d - 1:
            raise ValueError(f"max_ranks must have length {d - 1}, got {len(max_ranks)}")
        if any(r < 1 for r in max_ranks):
            raise ValueError("rank caps must be positive")
    else:
        if not 0.0 < tol < 1.0:
            raise ValueError(f"tol must lie in (0, 1), got {tol}")

    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return TTTensor([np.zeros((1, n, 1)) for n in shape])

    budget = tol * norm / math.sqrt(d - 1) if (tol is not None and d > 1) else 0.0

    cores = []
    r_prev = 1
    rest = a
    for k in range(d - 1):
        mat = rest.reshape(r_prev * shape[k], -1)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        if max_ranks is not None:
            r = min(max_ranks[k], int(np.count_nonzero(s)))
        else:
            r = _truncation_rank(s, budget)
        r = max(r, 1)
        cores.append(u[:, :r].reshape(r_prev, shape[k], r))
        rest = s[:r, None] * vt[:r]
        r_prev = r
    cores.append(rest.reshape(r_prev, shape[-1], 1))
    return TTTensor(cores)


def random_tt(mode_sizes, ranks, rng) -> TTTensor:
    """TT tensor with i.i.d. standard normal core entries at the given ranks.

    ``ranks`` lists the d-1 interior ranks; boundary ranks are fixed to 1.
    """
    mode_sizes = tuple(int(n) for n in mode_sizes)
    full_ranks = (1,) + tuple(int(r) for r in ranks) + (1,)
    if len(full_ranks) != len(mode_sizes) + 1:
        raise ShapeError("need one interior rank per adjacent mode pair")
    cores = [
        rng.standard_normal((full_ranks[k], mode_sizes[k], full_ranks[k + 1]))
        for k in range(len(mode_sizes))
    ]
    return TTTensor(cores)
