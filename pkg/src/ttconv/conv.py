"""Dense 2-D convolution and its im2col/GEMM matrix reformulation.

Inputs are W x H x C arrays, kernels l x l x C x S, outputs W' x H' x S with
W' = W - l + 1 and H' = H - l + 1 (valid convolution, stride 1).  The matrix
reformulation flattens pixel (x, y) to row ``x + W' * y`` and patch offset
(i, j, c) to column ``i + l * j + l * l * c`` (all 0-based, first index
fastest), so that convolution becomes ``Y_mat = X_mat @ K_mat``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError


def _check_conv_shapes(x: np.ndarray, k: np.ndarray):
    if x.ndim != 3:
        raise ShapeError(f"input must be W x H x C, got {x.ndim} dimensions")
    if k.ndim != 4:
        raise ShapeError(f"kernel must be l x l x C x S, got {k.ndim} dimensions")
    if k.shape[0] != k.shape[1]:
        raise ShapeError(f"filter must be square, got {k.shape[:2]}")
    if k.shape[2] != x.shape[2]:
        raise ShapeError(f"channel mismatch: input {x.shape[2]}, kernel {k.shape[2]}")
    ell = k.shape[0]
    if ell > min(x.shape[0], x.shape[1]):
        raise ShapeError(f"filter size {ell} exceeds input dims {x.shape[:2]}")


def conv2d_direct(x, k) -> np.ndarray:
    """Valid convolution by summing over kernel offsets.

    Y[x, y, s] = sum_{i,j,c} K[i, j, c, s] * X[x+i, y+j, c].
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    _check_conv_shapes(x, k)
    ell = k.shape[0]
    wo = x.shape[0] - ell + 1
    ho = x.shape[1] - ell + 1
    out = np.zeros((wo, ho, k.shape[3]))
    for i in range(ell):
        for j in range(ell):
            # (wo, ho, C) x (C, S) contraction for this offset
            out += np.tensordot(x[i : i + wo, j : j + ho], k[i, j], axes=(2, 0))
    return out


def im2col(x, ell: int) -> np.ndarray:
    """Patch matrix of shape (W'H', l*l*C); row k holds the patch for pixel k."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"input must be W x H x C, got {x.ndim} dimensions")
    if ell > min(x.shape[0], x.shape[1]):
        raise ShapeError(f"filter size {ell} exceeds input dims {x.shape[:2]}")
    wo = x.shape[0] - ell + 1
    ho = x.shape[1] - ell + 1
    c = x.shape[2]
    patches = sliding_window_view(x, (ell, ell), axis=(0, 1))  # (wo, ho, c, i, j)
    # row = x + wo*y (x fastest), col = i + l*j + l*l*c (i fastest)
    return np.ascontiguousarray(patches.transpose(1, 0, 2, 4, 3)).reshape(
        wo * ho, ell * ell * c
    )


def kernel_to_matrix(k) -> np.ndarray:
    """Kernel as an (l*l*C, S) matrix: row i + l*j + l*l*c holds K[i, j, c, :]."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 4 or k.shape[0] != k.shape[1]:
        raise ShapeError(f"kernel must be l x l x C x S, got shape {k.shape}")
    ell, _, c, s = k.shape
    return np.ascontiguousarray(k.transpose(2, 1, 0, 3)).reshape(ell * ell * c, s)


def matrix_to_kernel(mat, ell: int, channels: int) -> np.ndarray:
    """Inverse of kernel_to_matrix."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != ell * ell * channels:
        raise ShapeError(
            f"matrix with {mat.shape[0]} rows does not match l={ell}, C={channels}"
        )
    s = mat.shape[1]
    return np.ascontiguousarray(
        mat.reshape(channels, ell, ell, s).transpose(2, 1, 0, 3)
    )


def conv2d_gemm(x, k) -> np.ndarray:
    """Convolution as one matrix product: im2col(x) @ kernel_to_matrix(k)."""
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    _check_conv_shapes(x, k)
    ell = k.shape[0]
    wo = x.shape[0] - ell + 1
    ho = x.shape[1] - ell + 1
    y_mat = im2col(x, ell) @ kernel_to_matrix(k)
    # row = x + wo*y: C-order (ho, wo, S) puts x fastest within each y block
    return y_mat.reshape(ho, wo, k.shape[3]).transpose(1, 0, 2)
