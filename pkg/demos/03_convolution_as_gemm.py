"""Valid convolution and its im2col reformulation as one matrix product.

Convolving a W x H x C image with an l x l x C x S kernel equals
``im2col(X) @ kernel_matrix``: each patch becomes a row, each filter a
column.  The matrix view is what the TT-convolution kernels build on.
"""

import numpy as np

from ttconv import conv2d_direct, conv2d_gemm, im2col, kernel_to_matrix

rng = np.random.default_rng(2)

x = rng.standard_normal((6, 5, 3))
k = rng.standard_normal((3, 3, 3, 4))

y_direct = conv2d_direct(x, k)
y_gemm = conv2d_gemm(x, k)
print("output shape:", y_direct.shape)  # (W-l+1, H-l+1, S)
print("max |direct - gemm|:", np.max(np.abs(y_direct - y_gemm)))

# ----------------------------------------------------------------------
# The patch matrix for a small single-channel image
# ----------------------------------------------------------------------
small = np.arange(9, dtype=float).reshape(3, 3, 1)
print("\nimage (x indexes rows):")
print(small[:, :, 0])
patches = im2col(small, 2)
print("im2col rows (one 2x2 patch per output pixel, first spatial index fastest):")
print(patches)

kmat = kernel_to_matrix(k)
print("\nkernel matrix shape:", kmat.shape, "= (l*l*C, S)")
