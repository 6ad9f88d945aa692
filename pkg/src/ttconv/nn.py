"""Sequential networks with hand-written reverse-mode gradients.

Layers operate on batches: images are (B, W, H, C) arrays, flat features
(B, F).  Every layer owns its parameter arrays and matching gradient buffers;
``backward`` must be called right after ``forward`` on the same batch.  TT
layers keep their cores as the parameters and never materialize the dense
kernel in the forward pass.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .conv import kernel_to_matrix, matrix_to_kernel
from .errors import ShapeError, TrainingDiverged
from .kernels import (
    factorize_channels,
    fit_factorization,
    ttconv_backward_batch,
    ttconv_forward_batch,
)

__all__ = [
    "Layer",
    "Conv2D",
    "TTConv",
    "NaiveTTConv",
    "Dense",
    "TTDense",
    "ReLU",
    "MaxPool",
    "AvgPool",
    "BatchNorm",
    "ZeroPad",
    "SoftmaxCrossEntropy",
    "Network",
    "SGDMomentum",
    "Dataset",
    "gradcheck",
    "train",
    "evaluate",
]


class Layer:
    """Base layer: parameter/gradient bookkeeping and the forward contract."""

    kind = "base"

    def __init__(self):
        self.params = []
        self.grads = []
        self.frozen = False
        self._cache = None

    def build(self, in_shape, rng):
        """Allocate parameters for the given input shape; return the output shape."""
        return in_shape

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def _require_cache(self):
        if self._cache is None:
            raise RuntimeError(f"{self.kind}: backward called before forward")
        return self._cache

    @property
    def param_count(self):
        return sum(p.size for p in self.params)

    @property
    def dense_param_count(self):
        """Parameter count of the dense layer this one stands in for."""
        return self.param_count

    def zero_grads(self):
        for g in self.grads:
            g[...] = 0.0

    def _register(self, *arrays):
        self.params = [np.ascontiguousarray(a, dtype=np.float64) for a in arrays]
        self.grads = [np.zeros_like(p) for p in self.params]
        return self.params


def _check_image(x, kind):
    if x.ndim != 4:
        raise ShapeError(f"{kind} expects (B, W, H, C) input, got {x.ndim} dims")


def _im2col_batch(xb, ell):
    b, w, h, c = xb.shape
    wo, ho = w - ell + 1, h - ell + 1
    wins = sliding_window_view(xb, (ell, ell), axis=(1, 2))  # (B, wo, ho, C, i, j)
    cols = np.ascontiguousarray(wins.transpose(0, 1, 2, 3, 5, 4))
    return cols.reshape(b * wo * ho, ell * ell * c), (b, wo, ho)


def _col2im_batch(dmat, ell, in_shape):
    b, w, h, c = in_shape
    wo, ho = w - ell + 1, h - ell + 1
    dwin = dmat.reshape(b, wo, ho, c, ell, ell)  # (..., j, i)
    dx = np.zeros(in_shape)
    for i in range(ell):
        for j in range(ell):
            dx[:, i : i + wo, j : j + ho, :] += dwin[:, :, :, :, j, i]
    return dx


class Conv2D(Layer):
    """Dense convolution, computed as one GEMM over image patches."""

    kind = "dense-conv"

    def __init__(self, ell, out_channels, bias=True):
        super().__init__()
        self.ell = ell
        self.out_channels = out_channels
        self.with_bias = bias

    def build(self, in_shape, rng):
        w, h, c = in_shape
        if self.ell > min(w, h):
            raise ShapeError(f"filter {self.ell} exceeds input dims ({w}, {h})")
        std = math.sqrt(2.0 / (self.ell * self.ell * c))
        kernel = std * rng.standard_normal((self.ell, self.ell, c, self.out_channels))
        if self.with_bias:
            self._register(kernel, np.zeros(self.out_channels))
        else:
            self._register(kernel)
        return (w - self.ell + 1, h - self.ell + 1, self.out_channels)

    def forward(self, x, train=False):
        _check_image(x, self.kind)
        kernel = self.params[0]
        x_mat, (b, wo, ho) = _im2col_batch(x, self.ell)
        y = (x_mat @ kernel_to_matrix(kernel)).reshape(b, wo, ho, self.out_channels)
        if self.with_bias:
            y += self.params[1]
        self._cache = (x_mat, x.shape) if train else None
        return y

    def backward(self, dy):
        x_mat, in_shape = self._require_cache()
        dy_mat = dy.reshape(-1, self.out_channels)
        dk_mat = x_mat.T @ dy_mat
        self.grads[0][...] = matrix_to_kernel(dk_mat, self.ell, in_shape[3])
        if self.with_bias:
            self.grads[1][...] = dy_mat.sum(axis=0)
        dx_mat = dy_mat @ kernel_to_matrix(self.params[0]).T
        return _col2im_batch(dx_mat, self.ell, in_shape)


def _chain_path_count(ranks):
    total = 1
    for r in ranks[1:-1]:
        total *= r
    return total


def _scaled_tt_init(rng, shapes, fan_in, path_count):
    """Gaussian cores at per-core variance 2/size, rescaled so the
    reconstructed kernel matches He initialization elementwise."""
    arrays = []
    var = 1.0
    for shape in shapes:
        std = math.sqrt(2.0 / math.prod(shape))
        arrays.append(std * rng.standard_normal(shape))
        var *= std * std
    implied = var * path_count
    target = 2.0 / fan_in
    fix = (target / implied) ** (1.0 / (2 * len(shapes)))
    return [fix * a for a in arrays]


class TTConv(Layer):
    """Convolution whose kernel lives in the proposed TT form.

    The parameters are the spatial core, the channel cores, and (optionally) a
    bias; the forward pass contracts them against the input directly.
    """

    kind = "tt-conv"

    def __init__(self, ell, out_channels, ranks, d=2, factors=None, bias=True):
        super().__init__()
        self.ell = ell
        self.out_channels = out_channels
        self.ranks = tuple(int(r) for r in ranks)
        self.d = d if factors is None else factors.depth
        self.factors = factors
        self.with_bias = bias
        self.fact = None

    def build(self, in_shape, rng):
        w, h, c = in_shape
        if self.ell > min(w, h):
            raise ShapeError(f"filter {self.ell} exceeds input dims ({w}, {h})")
        if self.factors is not None:
            fact = fit_factorization(self.factors, c, self.out_channels)
        else:
            fact = factorize_channels(c, self.out_channels, self.d)
        if len(self.ranks) != fact.depth:
            raise ShapeError(f"need {fact.depth} interior ranks, got {len(self.ranks)}")
        self.fact = fact
        chain = self.ranks + (1,)
        shapes = [(self.ell, self.ell, chain[0])]
        for k in range(fact.depth):
            shapes.append((chain[k], fact.c_factors[k], fact.s_factors[k], chain[k + 1]))
        cores = _scaled_tt_init(
            rng, shapes, self.ell * self.ell * c, _chain_path_count((1,) + self.ranks + (1,))
        )
        if self.with_bias:
            self._register(*cores, np.zeros(self.out_channels))
        else:
            self._register(*cores)
        return (w - self.ell + 1, h - self.ell + 1, self.out_channels)

    def _split_params(self):
        end = len(self.params) - (1 if self.with_bias else 0)
        return self.params[0], self.params[1:end]

    def forward(self, x, train=False):
        _check_image(x, self.kind)
        g0, cores = self._split_params()
        y, cache = ttconv_forward_batch(
            x, self.ell, self.fact, g0, cores, keep_cache=train
        )
        if self.with_bias:
            y = y + self.params[len(self.params) - 1]
        self._cache = cache
        return y

    def backward(self, dy):
        cache = self._require_cache()
        dx, dg0, dcores = ttconv_backward_batch(cache, dy)
        self.grads[0][...] = dg0
        for k, dc in enumerate(dcores):
            self.grads[1 + k][...] = dc
        if self.with_bias:
            self.grads[len(self.grads) - 1][...] = dy.reshape(-1, self.out_channels).sum(axis=0)
        return dx

    @property
    def dense_param_count(self):
        dense = self.ell * self.ell * self.fact.channels_in * self.out_channels
        return dense + (self.out_channels if self.with_bias else 0)


class NaiveTTConv(Layer):
    """Convolution with the raw 4-mode TT kernel (the baseline variant).

    Forward reconstructs the dense kernel from the chain (cheap at these
    sizes) and convolves; gradients flow back through the reconstruction.
    """

    kind = "naive-tt-conv"

    def __init__(self, ell, out_channels, ranks, bias=True):
        super().__init__()
        self.ell = ell
        self.out_channels = out_channels
        self.ranks = tuple(int(r) for r in ranks)
        self.with_bias = bias
        self.in_channels = None

    def build(self, in_shape, rng):
        w, h, c = in_shape
        if self.ell > min(w, h):
            raise ShapeError(f"filter {self.ell} exceeds input dims ({w}, {h})")
        if len(self.ranks) != 3:
            raise ShapeError("naive TT kernel has 4 modes and needs 3 interior ranks")
        self.in_channels = c
        modes = (self.ell, self.ell, c, self.out_channels)
        chain = (1,) + self.ranks + (1,)
        shapes = [(chain[k], modes[k], chain[k + 1]) for k in range(4)]
        cores = _scaled_tt_init(
            rng, shapes, self.ell * self.ell * c, _chain_path_count(chain)
        )
        if self.with_bias:
            self._register(*cores, np.zeros(self.out_channels))
        else:
            self._register(*cores)
        return (w - self.ell + 1, h - self.ell + 1, self.out_channels)

    def _cores(self):
        end = len(self.params) - (1 if self.with_bias else 0)
        return self.params[:end]

    def _reconstruct(self):
        """Dense kernel plus the prefix/suffix chain products for backward."""
        cores = self._cores()
        prefixes = [np.ones((1, 1))]
        for core in cores:
            r_in, n, r_out = core.shape
            m = prefixes[-1] @ core.reshape(r_in, n * r_out)
            prefixes.append(m.reshape(-1, r_out))
        suffixes = [np.ones((1, 1))]
        for core in reversed(cores):
            r_in, n, r_out = core.shape
            m = core.reshape(r_in * n, r_out) @ suffixes[0]
            suffixes.insert(0, m.reshape(r_in, -1))
        kernel = prefixes[-1].reshape(self.ell, self.ell, self.in_channels, self.out_channels)
        return kernel, prefixes, suffixes

    def forward(self, x, train=False):
        _check_image(x, self.kind)
        kernel, prefixes, suffixes = self._reconstruct()
        x_mat, (b, wo, ho) = _im2col_batch(x, self.ell)
        y = (x_mat @ kernel_to_matrix(kernel)).reshape(b, wo, ho, self.out_channels)
        if self.with_bias:
            y += self.params[len(self.params) - 1]
        self._cache = (x_mat, x.shape, kernel, prefixes, suffixes) if train else None
        return y

    def backward(self, dy):
        x_mat, in_shape, kernel, prefixes, suffixes = self._require_cache()
        dy_mat = dy.reshape(-1, self.out_channels)
        dk_mat = x_mat.T @ dy_mat
        dkernel = matrix_to_kernel(dk_mat, self.ell, self.in_channels)
        cores = self._cores()
        dflat = dkernel.reshape(-1)
        for k, core in enumerate(cores):
            r_in, n, r_out = core.shape
            left = prefixes[k]  # (prod n_{<k}, r_in)
            right = suffixes[k + 1]  # (r_out, prod n_{>k})
            df = dflat.reshape(left.shape[0], n, right.shape[1])
            tmp = np.tensordot(left, df, axes=(0, 0))  # (r_in, n, rest)
            self.grads[k][...] = np.tensordot(tmp, right, axes=(2, 1))
        if self.with_bias:
            self.grads[len(self.grads) - 1][...] = dy_mat.sum(axis=0)
        dx_mat = dy_mat @ kernel_to_matrix(kernel).T
        return _col2im_batch(dx_mat, self.ell, in_shape)

    @property
    def dense_param_count(self):
        dense = self.ell * self.ell * self.in_channels * self.out_channels
        return dense + (self.out_channels if self.with_bias else 0)


class Dense(Layer):
    """Fully-connected layer; flattens trailing input axes."""

    kind = "dense-fc"

    def __init__(self, out_features, bias=True):
        super().__init__()
        self.out_features = out_features
        self.with_bias = bias

    def build(self, in_shape, rng):
        in_features = math.prod(in_shape)
        std = math.sqrt(2.0 / in_features)
        w = std * rng.standard_normal((in_features, self.out_features))
        if self.with_bias:
            self._register(w, np.zeros(self.out_features))
        else:
            self._register(w)
        return (self.out_features,)

    def forward(self, x, train=False):
        flat = x.reshape(x.shape[0], -1)
        y = flat @ self.params[0]
        if self.with_bias:
            y += self.params[1]
        self._cache = (flat, x.shape) if train else None
        return y

    def backward(self, dy):
        flat, in_shape = self._require_cache()
        self.grads[0][...] = flat.T @ dy
        if self.with_bias:
            self.grads[1][...] = dy.sum(axis=0)
        return (dy @ self.params[0].T).reshape(in_shape)


class TTDense(Layer):
    """Fully-connected layer with the weight matrix in TT form.

    Internally a 1x1 TT convolution applied to a single-pixel image, which is
    exactly the matrix-TT product.
    """

    kind = "tt-fc"

    def __init__(self, out_features, ranks, d=2, factors=None, bias=True):
        super().__init__()
        self.out_features = out_features
        self.ranks = tuple(int(r) for r in ranks)
        self.d = d if factors is None else factors.depth
        self.factors = factors
        self.with_bias = bias
        self.fact = None
        self.in_features = None

    def build(self, in_shape, rng):
        in_features = math.prod(in_shape)
        self.in_features = in_features
        if self.factors is not None:
            fact = fit_factorization(self.factors, in_features, self.out_features)
        else:
            fact = factorize_channels(in_features, self.out_features, self.d)
        if len(self.ranks) != fact.depth:
            raise ShapeError(f"need {fact.depth} interior ranks, got {len(self.ranks)}")
        self.fact = fact
        chain = self.ranks + (1,)
        shapes = [(1, 1, chain[0])]
        for k in range(fact.depth):
            shapes.append((chain[k], fact.c_factors[k], fact.s_factors[k], chain[k + 1]))
        cores = _scaled_tt_init(
            rng, shapes, in_features, _chain_path_count((1,) + self.ranks + (1,))
        )
        if self.with_bias:
            self._register(*cores, np.zeros(self.out_features))
        else:
            self._register(*cores)
        return (self.out_features,)

    def forward(self, x, train=False):
        flat = x.reshape(x.shape[0], 1, 1, -1)
        end = len(self.params) - (1 if self.with_bias else 0)
        y, cache = ttconv_forward_batch(
            flat, 1, self.fact, self.params[0], self.params[1:end], keep_cache=train
        )
        y = y.reshape(x.shape[0], self.out_features)
        if self.with_bias:
            y = y + self.params[len(self.params) - 1]
        self._cache = (cache, x.shape) if train else None
        return y

    def backward(self, dy):
        cache, in_shape = self._require_cache()
        dx, dg0, dcores = ttconv_backward_batch(cache, dy[:, None, None, :])
        self.grads[0][...] = dg0
        for k, dc in enumerate(dcores):
            self.grads[1 + k][...] = dc
        if self.with_bias:
            self.grads[len(self.grads) - 1][...] = dy.sum(axis=0)
        return dx.reshape(in_shape)

    @property
    def dense_param_count(self):
        return self.in_features * self.out_features + (
            self.out_features if self.with_bias else 0
        )


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train=False):
        mask = x > 0
        self._cache = mask if train else None
        return np.where(mask, x, 0.0)

    def backward(self, dy):
        return dy * self._require_cache()


class MaxPool(Layer):
    """3x3 max pooling with stride 2; ties resolve to the first window slot."""

    kind = "max-pool"

    size = 3
    stride = 2

    def build(self, in_shape, rng):
        w, h, c = in_shape
        if w < self.size or h < self.size:
            raise ShapeError(f"input ({w}, {h}) smaller than {self.size}x{self.size} pool")
        return ((w - self.size) // self.stride + 1, (h - self.size) // self.stride + 1, c)

    def forward(self, x, train=False):
        _check_image(x, self.kind)
        wins = sliding_window_view(x, (self.size, self.size), axis=(1, 2))
        wins = wins[:, :: self.stride, :: self.stride]  # (B, nx, ny, C, 3, 3)
        flat = wins.reshape(wins.shape[:4] + (self.size * self.size,))
        arg = flat.argmax(axis=-1)
        y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        self._cache = (arg, x.shape) if train else None
        return y

    def backward(self, dy):
        arg, in_shape = self._require_cache()
        dx = np.zeros(in_shape)
        bi, xi, yi, ci = np.indices(arg.shape, sparse=True)
        px = self.stride * xi + arg // self.size
        py = self.stride * yi + arg % self.size
        np.add.at(dx, (np.broadcast_to(bi, arg.shape), px, py, np.broadcast_to(ci, arg.shape)), dy)
        return dx


class AvgPool(Layer):
    """Non-overlapping k x k average pooling (stride k)."""

    kind = "avg-pool"

    def __init__(self, size):
        super().__init__()
        self.size = size

    def build(self, in_shape, rng):
        w, h, c = in_shape
        if w % self.size or h % self.size:
            raise ShapeError(f"input ({w}, {h}) not divisible by pool size {self.size}")
        return (w // self.size, h // self.size, c)

    def forward(self, x, train=False):
        b, w, h, c = x.shape
        k = self.size
        y = x.reshape(b, w // k, k, h // k, k, c).mean(axis=(2, 4))
        self._cache = x.shape if train else None
        return y

    def backward(self, dy):
        in_shape = self._require_cache()
        k = self.size
        scaled = dy / (k * k)
        return np.repeat(np.repeat(scaled, k, axis=1), k, axis=2).reshape(in_shape)


class BatchNorm(Layer):
    """Batch normalization over all axes but the channel one.

    Training uses batch statistics; evaluation uses running averages kept with
    momentum 0.9.  Epsilon is 1e-5.
    """

    kind = "batch-norm"

    def __init__(self, momentum=0.9, eps=1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.running_mean = None
        self.running_var = None

    def build(self, in_shape, rng):
        c = in_shape[-1]
        self._register(np.ones(c), np.zeros(c))
        self.running_mean = np.zeros(c)
        self.running_var = np.ones(c)
        return in_shape

    def forward(self, x, train=False):
        axes = tuple(range(x.ndim - 1))
        gamma, beta = self.params
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, axes) if train else None
        return gamma * xhat + beta

    def backward(self, dy):
        xhat, inv_std, axes = self._require_cache()
        gamma = self.params[0]
        n = math.prod(dy.shape[a] for a in axes)
        self.grads[0][...] = (dy * xhat).sum(axis=axes)
        self.grads[1][...] = dy.sum(axis=axes)
        dxhat = dy * gamma
        return inv_std * (
            dxhat
            - dxhat.mean(axis=axes)
            - xhat * (dxhat * xhat).sum(axis=axes) / n
        )


class ZeroPad(Layer):
    """Symmetric spatial zero padding."""

    kind = "zero-pad"

    def __init__(self, pad):
        super().__init__()
        self.pad = pad

    def build(self, in_shape, rng):
        w, h, c = in_shape
        return (w + 2 * self.pad, h + 2 * self.pad, c)

    def forward(self, x, train=False):
        p = self.pad
        self._cache = x.shape if train else None
        return np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))

    def backward(self, dy):
        self._require_cache()
        p = self.pad
        return dy[:, p:-p, p:-p, :] if p else dy


class SoftmaxCrossEntropy(Layer):
    """Softmax cross-entropy with mean reduction; the terminal loss node."""

    kind = "softmax-cross-entropy"

    def forward(self, logits, targets, train=False):
        z = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
        log_probs = z - log_norm
        b = logits.shape[0]
        loss = -log_probs[np.arange(b), targets].mean()
        self._cache = (np.exp(log_probs), targets) if train else None
        return loss

    def backward(self, dy=1.0):
        probs, targets = self._require_cache()
        b = probs.shape[0]
        grad = probs.copy()
        grad[np.arange(b), targets] -= 1.0
        return dy * grad / b


class Network:
    """Sequential stack of layers followed by a softmax cross-entropy head."""

    def __init__(self, layers, loss=None):
        self.layers = list(layers)
        self.loss = loss or SoftmaxCrossEntropy()
        self.input_shape = None

    def build(self, input_shape, rng):
        shape = tuple(input_shape)
        self.input_shape = shape
        for idx, layer in enumerate(self.layers):
            try:
                shape = layer.build(shape, rng)
            except ShapeError as e:
                raise ShapeError(f"layer {idx} ({layer.kind}): {e}") from e
        return shape

    def forward(self, x, train=False):
        out = np.asarray(x, dtype=np.float64)
        for idx, layer in enumerate(self.layers):
            try:
                out = layer.forward(out, train=train)
            except ShapeError as e:
                raise ShapeError(f"layer {idx} ({layer.kind}): {e}") from e
        return out

    def forward_loss(self, x, targets, train=False):
        logits = self.forward(x, train=train)
        return logits, self.loss.forward(logits, targets, train=train)

    def backward(self):
        grad = self.loss.backward()
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    # -- flat parameter/gradient views (gradcheck, reporting) ----------------

    def parameter_blocks(self):
        return [(idx, layer) for idx, layer in enumerate(self.layers) if layer.params]

    def get_params(self):
        chunks = [p.ravel() for _, layer in self.parameter_blocks() for p in layer.params]
        return np.concatenate(chunks) if chunks else np.zeros(0)

    def set_params(self, flat):
        offset = 0
        for _, layer in self.parameter_blocks():
            for p in layer.params:
                p[...] = flat[offset : offset + p.size].reshape(p.shape)
                offset += p.size
        if offset != flat.size:
            raise ShapeError(f"parameter vector length {flat.size}, expected {offset}")

    def get_grads(self):
        chunks = [g.ravel() for _, layer in self.parameter_blocks() for g in layer.grads]
        return np.concatenate(chunks) if chunks else np.zeros(0)

    @property
    def param_count(self):
        return sum(layer.param_count for layer in self.layers)

    @property
    def dense_param_count(self):
        return sum(layer.dense_param_count for layer in self.layers)

    @property
    def compression(self):
        return self.dense_param_count / self.param_count


class SGDMomentum:
    """Classical momentum: v <- m*v - lr*g; p <- p + v.

    The learning rate is divided by ``decay_factor`` after every
    ``decay_every`` epochs.  Frozen layers are skipped entirely, leaving their
    parameters bitwise unchanged.
    """

    def __init__(self, lr, momentum=0.9, decay_every=None, decay_factor=10.0):
        if lr < 0:
            raise ValueError("learning rate cannot be negative")
        self.initial_lr = lr
        self.lr = lr
        self.momentum = momentum
        self.decay_every = decay_every
        self.decay_factor = decay_factor
        self._velocity = {}

    def set_epoch(self, epoch):
        if self.decay_every:
            self.lr = self.initial_lr / self.decay_factor ** (epoch // self.decay_every)

    def step(self, net: Network):
        for idx, layer in net.parameter_blocks():
            if layer.frozen:
                continue
            for j, (p, g) in enumerate(zip(layer.params, layer.grads)):
                key = (idx, j)
                v = self._velocity.get(key)
                if v is None:
                    v = np.zeros_like(p)
                    self._velocity[key] = v
                v *= self.momentum
                v -= self.lr * g
                p += v


def gradcheck(net: Network, x, targets, h=1e-6, tol=1e-5, corrupt=False):
    """Central-difference check of every parameter gradient, per layer.

    Entries with analytic gradient below 1e-8 in magnitude are compared
    absolutely.  ``corrupt`` deliberately offsets one analytic gradient entry
    (a negative control: the report must flag it).  Returns a list of dicts
    with keys layer, kind, params, max_rel_err, ok.
    """
    x = np.asarray(x, dtype=np.float64)
    net.forward_loss(x, targets, train=True)
    net.backward()
    analytic = net.get_grads()
    if corrupt and analytic.size:
        analytic = analytic.copy()
        analytic[0] += 1.0

    base = net.get_params()
    flat = base.copy()

    def loss_at(vec):
        net.set_params(vec)
        _, loss = net.forward_loss(x, targets, train=True)
        return loss

    report = []
    offset = 0
    for idx, layer in net.parameter_blocks():
        worst = 0.0
        count = sum(p.size for p in layer.params)
        for i in range(offset, offset + count):
            flat[i] = base[i] + h
            fp = loss_at(flat)
            flat[i] = base[i] - h
            fm = loss_at(flat)
            flat[i] = base[i]
            fd = (fp - fm) / (2 * h)
            a = analytic[i]
            if abs(a) < 1e-8:
                err = abs(fd - a)
            else:
                err = abs(fd - a) / abs(a)
            worst = max(worst, err)
        offset += count
        report.append(
            {
                "layer": idx,
                "kind": layer.kind,
                "params": count,
                "max_rel_err": worst,
                "ok": worst <= tol,
            }
        )
    net.set_params(base)
    return report


class Dataset:
    """Train/test split of a labelled image set."""

    __slots__ = ("x_train", "y_train", "x_test", "y_test")

    def __init__(self, x_train, y_train, x_test, y_test):
        self.x_train = x_train
        self.y_train = y_train
        self.x_test = x_test
        self.y_test = y_test

    @property
    def input_shape(self):
        return self.x_train.shape[1:]


def evaluate(net: Network, x, targets, batch_size=256):
    """Mean accuracy in eval mode (running batch-norm statistics)."""
    correct = 0
    for start in range(0, len(x), batch_size):
        logits = net.forward(x[start : start + batch_size], train=False)
        correct += int((logits.argmax(axis=1) == targets[start : start + batch_size]).sum())
    return correct / len(x)


def train(net: Network, data: Dataset, opt: SGDMomentum, epochs, seed, batch_size=128):
    """SGD training loop; returns one log record per epoch.

    The seed fixes the shuffling order (initialization is fixed by whoever
    built the network).  Raises TrainingDiverged as soon as a batch loss is
    not finite.
    """
    rng = np.random.default_rng(seed)
    n = len(data.x_train)
    log = []
    for epoch in range(epochs):
        opt.set_epoch(epoch)
        perm = rng.permutation(n)
        total_loss = 0.0
        total_correct = 0
        for start in range(0, n, batch_size):
            sel = perm[start : start + batch_size]
            xb, yb = data.x_train[sel], data.y_train[sel]
            logits, loss = net.forward_loss(xb, yb, train=True)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            net.backward()
            opt.step(net)
            total_loss += loss * len(sel)
            total_correct += int((logits.argmax(axis=1) == yb).sum())
        log.append(
            {
                "epoch": epoch,
                "lr": float(opt.lr),
                "train_loss": float(total_loss / n),
                "train_acc": total_correct / n,
                "test_acc": evaluate(net, data.x_test, data.y_test),
            }
        )
    return log


LOG_COLUMNS = ("epoch", "lr", "train_loss", "train_acc", "test_acc")


def format_log_csv(log, name=None, compression=None):
    """Training log as CSV text, with model metadata in comment lines."""
    lines = []
    if name is not None:
        lines.append(f"# model = {name}")
    if compression is not None:
        lines.append(f"# compression = {compression!r}")
    lines.append(",".join(LOG_COLUMNS))
    for row in log:
        lines.append(
            ",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in LOG_COLUMNS)
        )
    return "\n".join(lines) + "\n"
