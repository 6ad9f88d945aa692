"""Synthetic two-class texture dataset: oriented stripe gratings vs blob fields.

Each image is standardized to zero mean and unit variance before pixel noise
is added, so the classes differ in spatial structure rather than intensity
statistics.  Class 0 is a sinusoidal grating at a random orientation, class 1
a superposition of Gaussian bumps.
"""

from __future__ import annotations

import numpy as np

from .nn import Dataset


def _stripe(rng, size):
    wavelength = rng.uniform(3.0, 6.0)
    theta = rng.uniform(0.0, np.pi)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    xx, yy = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    t = (xx * np.cos(theta) + yy * np.sin(theta)) * (2.0 * np.pi / wavelength)
    return np.sin(t + phase)


def _blobs(rng, size):
    img = np.zeros((size, size))
    xx, yy = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    for _ in range(int(rng.integers(2, 5))):
        cx, cy = rng.uniform(1.0, size - 2.0, size=2)
        sigma = rng.uniform(1.5, 3.0)
        amp = rng.uniform(0.5, 1.5)
        img += amp * np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma**2)))
    return img


def _standardize(img):
    img = img - img.mean()
    return img / max(img.std(), 1e-8)


def make_images(n, size, noise, rng):
    x = np.empty((n, size, size, 1))
    y = np.empty(n, dtype=np.int64)
    for i in range(n):
        label = i % 2
        img = _stripe(rng, size) if label == 0 else _blobs(rng, size)
        img = _standardize(img) + noise * rng.standard_normal((size, size))
        x[i, :, :, 0] = img
        y[i] = label
    perm = rng.permutation(n)
    return x[perm], y[perm]


def stripes_vs_blobs(n_train=2000, n_test=500, size=16, noise=1.0, seed=0) -> Dataset:
    """Balanced train/test split; fully determined by the seed."""
    rng = np.random.default_rng(seed)
    x_train, y_train = make_images(n_train, size, noise, rng)
    x_test, y_test = make_images(n_test, size, noise, rng)
    return Dataset(x_train, y_train, x_test, y_test)
