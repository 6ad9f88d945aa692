"""TT-convolutional kernels: the reshaped higher-order decomposition and the
naive direct decomposition of a 4-way convolution kernel.

The proposed form flattens an ``l x l x C x S`` kernel to its ``(l*l*C, S)``
matrix, factorizes channels as ``C = prod(C_k)`` and ``S = prod(S_k)`` (padding
with zero channels when needed), reshapes the matrix into a (d+1)-mode tensor
with mode 0 of size ``l*l`` and mode k of size ``C_k * S_k``, and runs TT-SVD.
Chain entries reconstruct the kernel as

    K[x, y, c', s'] = G0[x, y] @ G1[c_1, s_1] @ ... @ Gd[c_d, s_d]

where ``c'`` and ``s'`` are little-endian mixed-radix flattenings of the digit
vectors and the spatial slice index is ``x + l * y``.  The compound slice
index within mode k is ``c_k * S_k + s_k``, matching the matrix-TT convention.

The naive baseline applies TT-SVD to the raw ``(l, l, C, S)`` tensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conv import conv2d_direct, kernel_to_matrix, matrix_to_kernel
from .errors import ShapeError
from .tt import TTTensor, tt_full, tt_param_count, tt_svd
from .ttmatrix import TTMatrix, from_compound_tensor, to_compound_tensor


@dataclass(frozen=True)
class ChannelFactorization:
    """Factorizations of the (padded) input/output channel counts."""

    c_factors: tuple
    s_factors: tuple
    pad_c: int = 0
    pad_s: int = 0

    def __post_init__(self):
        object.__setattr__(self, "c_factors", tuple(int(f) for f in self.c_factors))
        object.__setattr__(self, "s_factors", tuple(int(f) for f in self.s_factors))
        if len(self.c_factors) != len(self.s_factors) or not self.c_factors:
            raise ShapeError("c_factors and s_factors must have equal nonzero length")
        if any(f < 1 for f in self.c_factors + self.s_factors):
            raise ShapeError("channel factors must be >= 1")
        if self.pad_c < 0 or self.pad_s < 0:
            raise ShapeError("channel padding cannot be negative")
        if self.pad_c >= self.c_padded or self.pad_s >= self.s_padded:
            raise ShapeError("padding must leave at least one real channel")

    @property
    def depth(self) -> int:
        return len(self.c_factors)

    @property
    def c_padded(self) -> int:
        return math.prod(self.c_factors)

    @property
    def s_padded(self) -> int:
        return math.prod(self.s_factors)

    @property
    def channels_in(self) -> int:
        return self.c_padded - self.pad_c

    @property
    def channels_out(self) -> int:
        return self.s_padded - self.pad_s


def _prime_multiplicity(n: int) -> int:
    count = 0
    p = 2
    while p * p <= n:
        while n % p == 0:
            n //= p
            count += 1
        p += 1
    return count + (1 if n > 1 else 0)


def _divisor_chains(n: int, d: int, cap: int):
    """Non-increasing tuples of d divisors >= 2 with product n."""
    if d == 1:
        if 2 <= n <= cap:
            yield (n,)
        return
    for f in range(2, min(cap, n) + 1):
        if n % f == 0:
            for rest in _divisor_chains(n // f, d - 1, f):
                yield (f,) + rest


def _balanced_factors(n: int, d: int) -> tuple:
    if n == 1:
        return (1,) * d
    best = None
    for chain in _divisor_chains(n, d, n):
        key = (chain[0] / chain[-1], chain)  # max/min spread, then lexicographic
        if best is None or key < best[0]:
            best = (key, chain)
    if best is None:
        raise ShapeError(f"{n} has no factorization into {d} factors >= 2")
    return best[1]


def _padded_size(value: int, d: int) -> int:
    if value == 1:
        return 1
    if _prime_multiplicity(value) >= d:
        return value
    exp = max(d, math.ceil(math.log2(value)))
    return 2**exp


def fit_factorization(fact: ChannelFactorization, channels_in: int, channels_out: int) -> ChannelFactorization:
    """Recompute dummy-channel padding for concrete channel counts."""
    pad_c = fact.c_padded - channels_in
    pad_s = fact.s_padded - channels_out
    if pad_c < 0 or pad_s < 0:
        raise ShapeError(
            f"factor products ({fact.c_padded}, {fact.s_padded}) cannot cover "
            f"({channels_in}, {channels_out}) channels"
        )
    return ChannelFactorization(fact.c_factors, fact.s_factors, pad_c, pad_s)


def factorize_channels(channels_in: int, channels_out: int, d: int) -> ChannelFactorization:
    """Balanced d-level factorization of both channel counts.

    Counts whose prime multiplicity is below d are padded up to the next power
    of two (with exponent at least d) by appending zero-filled dummy channels;
    among all divisor chains of the padded count the one with the smallest
    max/min ratio is chosen, reported in descending order.
    """
    if channels_in < 1 or channels_out < 1 or d < 1:
        raise ValueError("channel counts and depth must be positive")
    if d == 1:
        return ChannelFactorization((channels_in,), (channels_out,), 0, 0)
    cp = _padded_size(channels_in, d)
    sp = _padded_size(channels_out, d)
    return ChannelFactorization(
        _balanced_factors(cp, d),
        _balanced_factors(sp, d),
        cp - channels_in,
        sp - channels_out,
    )


class TTConvKernel:
    """Convolution kernel stored as a spatial core plus d channel cores.

    ``g0`` has shape (l, l, r1); channel core k has shape
    (r_k, C_k, S_k, r_{k+1}) with r_{d+1} = 1.
    """

    __slots__ = ("ell", "fact", "g0", "cores")

    def __init__(self, ell: int, fact: ChannelFactorization, g0, cores):
        g0 = np.array(g0, dtype=np.float64)
        cores = [np.array(c, dtype=np.float64) for c in cores]
        if g0.ndim != 3 or g0.shape[0] != g0.shape[1] or g0.shape[0] != ell:
            raise ShapeError(f"spatial core must be {ell} x {ell} x r1, got {g0.shape}")
        if len(cores) != fact.depth:
            raise ShapeError(f"expected {fact.depth} channel cores, got {len(cores)}")
        r_prev = g0.shape[2]
        for k, core in enumerate(cores):
            ck, sk = fact.c_factors[k], fact.s_factors[k]
            if core.ndim != 4 or core.shape[:3] != (r_prev, ck, sk):
                raise ShapeError(
                    f"channel core {k} must be ({r_prev}, {ck}, {sk}, r), got {core.shape}"
                )
            r_prev = core.shape[3]
        if r_prev != 1:
            raise ShapeError("final TT-rank must equal 1")
        g0.flags.writeable = False
        for core in cores:
            core.flags.writeable = False
        self.ell = ell
        self.fact = fact
        self.g0 = g0
        self.cores = tuple(cores)

    @property
    def ranks(self) -> tuple:
        return (1, self.g0.shape[2]) + tuple(c.shape[3] for c in self.cores)

    @property
    def param_count(self) -> int:
        r1 = self.g0.shape[2]
        total = self.ell * self.ell * r1
        for core in self.cores:
            total += core.size
        return total

    def as_tt(self) -> TTTensor:
        """The underlying TT over modes (l*l, C_1*S_1, ..., C_d*S_d)."""
        ell, r1 = self.ell, self.g0.shape[2]
        core0 = self.g0.transpose(1, 0, 2).reshape(1, ell * ell, r1)
        chain = [core0]
        for core in self.cores:
            r_in, ck, sk, r_out = core.shape
            chain.append(core.reshape(r_in, ck * sk, r_out))
        return TTTensor(chain)

    def __repr__(self):
        return (
            f"TTConvKernel(ell={self.ell}, c_factors={self.fact.c_factors}, "
            f"s_factors={self.fact.s_factors}, ranks={self.ranks})"
        )


def _pad_kernel_channels(kernel: np.ndarray, fact: ChannelFactorization) -> np.ndarray:
    ell = kernel.shape[0]
    padded = np.zeros((ell, ell, fact.c_padded, fact.s_padded))
    padded[:, :, : kernel.shape[2], : kernel.shape[3]] = kernel
    return padded


def ttconv_from_dense(kernel, fact: ChannelFactorization, max_ranks=None, tol=None) -> TTConvKernel:
    """Decompose a dense l x l x C x S kernel into the proposed TT form."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[1]:
        raise ShapeError(f"kernel must be l x l x C x S, got shape {kernel.shape}")
    if kernel.shape[2] != fact.channels_in or kernel.shape[3] != fact.channels_out:
        raise ShapeError(
            f"kernel channels {kernel.shape[2:]} do not match factorization "
            f"({fact.channels_in}, {fact.channels_out})"
        )
    ell = kernel.shape[0]
    mat = kernel_to_matrix(_pad_kernel_channels(kernel, fact))
    tensor = to_compound_tensor(
        mat, (ell * ell,) + fact.c_factors, (1,) + fact.s_factors
    )
    tt = tt_svd(tensor, max_ranks=max_ranks, tol=tol)
    r1 = tt.ranks[1]
    g0 = tt.cores[0].reshape(ell, ell, r1).transpose(1, 0, 2)
    cores = [
        core.reshape(core.shape[0], ck, sk, core.shape[2])
        for core, ck, sk in zip(tt.cores[1:], fact.c_factors, fact.s_factors)
    ]
    return TTConvKernel(ell, fact, g0, cores)


def ttconv_to_dense(tk: TTConvKernel) -> np.ndarray:
    """Materialize the dense kernel and strip dummy channels."""
    fact = tk.fact
    tensor = tt_full(tk.as_tt())
    mat = from_compound_tensor(
        tensor, (tk.ell * tk.ell,) + fact.c_factors, (1,) + fact.s_factors
    )
    kernel = matrix_to_kernel(mat, tk.ell, fact.c_padded)
    return kernel[:, :, : fact.channels_in, : fact.channels_out]


def ttconv_forward_batch(xb, ell, fact, g0, cores, keep_cache=False):
    """Batched forward contraction; never materializes the dense kernel.

    xb has shape (B, W, H, C) with C <= C_padded.  The sweep applies the
    spatial core to image patches first, then absorbs one channel core at a
    time, carrying an intermediate laid out as
    (pixels, remaining input digits, rank, produced output digits).
    Returns (yb, cache); cache is None unless keep_cache.
    """
    xb = np.asarray(xb, dtype=np.float64)
    if xb.ndim != 4:
        raise ShapeError(f"batch input must be B x W x H x C, got {xb.ndim} dims")
    b, w, h, c_in = xb.shape
    if c_in > fact.c_padded:
        raise ShapeError(f"input has {c_in} channels, factorization caps at {fact.c_padded}")
    if ell > min(w, h):
        raise ShapeError(f"filter size {ell} exceeds input dims ({w}, {h})")
    cp = fact.c_padded
    if c_in < cp:
        xp = np.zeros((b, w, h, cp))
        xp[..., :c_in] = xb
    else:
        xp = xb
    wo, ho = w - ell + 1, h - ell + 1
    n = b * wo * ho
    r1 = g0.shape[2]

    t = np.zeros((b, wo, ho, cp, r1))
    for i in range(ell):
        for j in range(ell):
            t += xp[:, i : i + wo, j : j + ho, :, None] * g0[i, j]
    t = t.reshape(n, cp, r1)[..., None]

    saved = [] if keep_cache else None
    for core in cores:
        r_in, ck, sk, r_out = core.shape
        c_rest2 = t.shape[1] // ck
        s_prod = t.shape[3]
        if keep_cache:
            saved.append(t)
        tr = t.reshape(n, c_rest2, ck, r_in, s_prod)
        r = np.tensordot(tr, core, axes=[(2, 3), (1, 0)])
        t = np.ascontiguousarray(r.transpose(0, 1, 4, 3, 2)).reshape(
            n, c_rest2, r_out, sk * s_prod
        )

    s_real = fact.channels_out
    yb = t.reshape(b, wo, ho, fact.s_padded)[..., :s_real]
    cache = None
    if keep_cache:
        cache = {
            "xp": xp,
            "x_channels": c_in,
            "saved": saved,
            "shape": (b, w, h, wo, ho),
            "ell": ell,
            "fact": fact,
            "g0": g0,
            "cores": cores,
        }
    return yb, cache


def ttconv_backward_batch(cache, dyb):
    """Gradients of the batched contraction: (dxb, dg0, dcores)."""
    fact = cache["fact"]
    g0, cores = cache["g0"], cache["cores"]
    ell = cache["ell"]
    b, w, h, wo, ho = cache["shape"]
    n = b * wo * ho
    dyb = np.asarray(dyb, dtype=np.float64)

    dt = np.zeros((b, wo, ho, fact.s_padded))
    dt[..., : fact.channels_out] = dyb
    dt = dt.reshape(n, 1, 1, fact.s_padded)

    dcores = [None] * len(cores)
    for k in range(len(cores) - 1, -1, -1):
        core = cores[k]
        r_in, ck, sk, r_out = core.shape
        t_prev = cache["saved"][k]
        c_rest2 = t_prev.shape[1] // ck
        s_prod = t_prev.shape[3]
        dr = np.ascontiguousarray(
            dt.reshape(n, c_rest2, r_out, sk, s_prod).transpose(0, 1, 4, 3, 2)
        )
        tr = t_prev.reshape(n, c_rest2, ck, r_in, s_prod)
        dcore = np.tensordot(tr, dr, axes=[(0, 1, 4), (0, 1, 2)])
        dcores[k] = np.ascontiguousarray(dcore.transpose(1, 0, 2, 3))
        dtr = np.tensordot(dr, core, axes=[(3, 4), (2, 3)])
        dt = np.ascontiguousarray(dtr.transpose(0, 1, 4, 3, 2)).reshape(t_prev.shape)

    dt1 = dt.reshape(b, wo, ho, fact.c_padded, g0.shape[2])
    xp = cache["xp"]
    dg0 = np.zeros_like(g0)
    dxp = np.zeros_like(xp)
    for i in range(ell):
        for j in range(ell):
            win = xp[:, i : i + wo, j : j + ho]
            dg0[i, j] = np.tensordot(win, dt1, axes=[(0, 1, 2, 3), (0, 1, 2, 3)])
            dxp[:, i : i + wo, j : j + ho] += dt1 @ g0[i, j]
    return dxp[..., : cache["x_channels"]], dg0, dcores


def ttconv_forward(x, tk: TTConvKernel) -> np.ndarray:
    """Forward convolution of a single W x H x C input with a TT kernel."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"input must be W x H x C, got {x.ndim} dimensions")
    yb, _ = ttconv_forward_batch(x[None], tk.ell, tk.fact, tk.g0, tk.cores)
    return yb[0]


def ttconv_to_ttmatrix(tk: TTConvKernel) -> TTMatrix:
    """The per-pixel linear map of a 1x1 TT kernel as a matrix in TT format.

    Returns the (S_padded x C_padded) matrix mapping input channels to output
    channels, with the spatial core absorbed into the first channel core.
    """
    if tk.ell != 1:
        raise ShapeError("per-pixel matrix form requires a 1x1 kernel")
    v = tk.g0[0, 0]
    first = np.tensordot(v, tk.cores[0], axes=(0, 0))  # (C1, S1, r2)
    chain = [first.transpose(1, 0, 2).reshape(1, -1, tk.cores[0].shape[3])]
    for core in tk.cores[1:]:
        r_in, ck, sk, r_out = core.shape
        chain.append(core.transpose(0, 2, 1, 3).reshape(r_in, sk * ck, r_out))
    return TTMatrix(TTTensor(chain), tk.fact.s_factors, tk.fact.c_factors)


def random_ttconv_kernel(ell: int, fact: ChannelFactorization, ranks, rng) -> TTConvKernel:
    """TT kernel with standard normal cores at the given interior ranks.

    ``ranks`` lists (r_1, ..., r_d); the boundary ranks are 1.
    """
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != fact.depth:
        raise ShapeError(f"expected {fact.depth} interior ranks, got {len(ranks)}")
    chain = ranks + (1,)
    g0 = rng.standard_normal((ell, ell, chain[0]))
    cores = [
        rng.standard_normal((chain[k], fact.c_factors[k], fact.s_factors[k], chain[k + 1]))
        for k in range(fact.depth)
    ]
    return TTConvKernel(ell, fact, g0, cores)


class NaiveTTConvKernel:
    """TT decomposition applied to the raw (l, l, C, S) kernel tensor."""

    __slots__ = ("tt",)

    def __init__(self, tt: TTTensor):
        if tt.ndim != 4:
            raise ShapeError(f"naive kernel TT must have 4 modes, got {tt.ndim}")
        if tt.mode_sizes[0] != tt.mode_sizes[1]:
            raise ShapeError("filter must be square")
        self.tt = tt

    @property
    def ell(self) -> int:
        return self.tt.mode_sizes[0]

    @property
    def param_count(self) -> int:
        return tt_param_count(self.tt)

    def __repr__(self):
        return f"NaiveTTConvKernel(mode_sizes={self.tt.mode_sizes}, ranks={self.tt.ranks})"


def naive_ttconv_from_dense(kernel, max_ranks=None, tol=None) -> NaiveTTConvKernel:
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[1]:
        raise ShapeError(f"kernel must be l x l x C x S, got shape {kernel.shape}")
    return NaiveTTConvKernel(tt_svd(kernel, max_ranks=max_ranks, tol=tol))


def naive_ttconv_to_dense(nk: NaiveTTConvKernel) -> np.ndarray:
    return tt_full(nk.tt)


def naive_ttconv_forward(x, nk: NaiveTTConvKernel) -> np.ndarray:
    """Dense convolution with the reconstructed kernel (desk-scale sizes)."""
    return conv2d_direct(x, tt_full(nk.tt))


def compression_ratio(dense_params: int, compressed_params: int) -> float:
    """Network-level ratio: uncompressed / compressed parameter count."""
    if dense_params <= 0 or compressed_params <= 0:
        raise ValueError("parameter counts must be positive")
    return dense_params / compressed_params
