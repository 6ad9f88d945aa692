"""Binary file formats for dense tensors and the three TT containers.

All integers are little-endian; payload values are little-endian IEEE floats
(f64 by default, f32 as a storage option -- values are always promoted to f64
in memory).  Layouts:

``.ten``   magic ``TTEN`` | u32 version=1 | u32 dtype (0=f64, 1=f32) | u32 d |
           d x u64 dims | values in C order (last index fastest).
``.tt``    magic ``TTTN`` | version | dtype | u32 d | d x u64 mode sizes |
           (d+1) x u64 ranks | cores in chain order, each slice-major
           (slice index outer, then row, then column).
``.ttm``   magic ``TTMX`` | version | dtype | u32 d | d x u64 row factors |
           d x u64 col factors | embedded ``.tt`` stream for the compound TT.
``.ttcv``  magic ``TTCV`` | version | dtype | u32 l | u32 d | d x u64
           c_factors | d x u64 s_factors | u32 pad_c | u32 pad_s |
           (d+2) x u64 ranks | spatial core then channel cores, slice-major.
"""

from __future__ import annotations

import struct

import numpy as np

from .kernels import ChannelFactorization, TTConvKernel
from .tt import TTTensor
from .ttmatrix import TTMatrix

MAGIC_DENSE = b"TTEN"
MAGIC_TT = b"TTTN"
MAGIC_TTM = b"TTMX"
MAGIC_TTCV = b"TTCV"

VERSION = 1

_DTYPE_CODES = {"f64": 0, "f32": 1}
_NUMPY_DTYPES = {0: "<f8", 1: "<f4"}


class FormatError(ValueError):
    """Malformed or unrecognized container file."""


def _write_u32(f, *values):
    f.write(struct.pack("<" + "I" * len(values), *values))


def _write_u64s(f, values):
    f.write(struct.pack(f"<{len(values)}Q", *values))


def _read_exact(f, n):
    data = f.read(n)
    if len(data) != n:
        raise FormatError("unexpected end of file")
    return data


def _read_u32(f, count=1):
    vals = struct.unpack(f"<{count}I", _read_exact(f, 4 * count))
    return vals[0] if count == 1 else vals


def _read_u64s(f, count):
    return struct.unpack(f"<{count}Q", _read_exact(f, 8 * count))


def _write_header(f, magic, dtype):
    if dtype not in _DTYPE_CODES:
        raise ValueError(f"dtype must be 'f64' or 'f32', got {dtype!r}")
    f.write(magic)
    _write_u32(f, VERSION, _DTYPE_CODES[dtype])


def _read_header(f, magic):
    got = _read_exact(f, 4)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    version = _read_u32(f)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    code = _read_u32(f)
    if code not in _NUMPY_DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    return _NUMPY_DTYPES[code]

def _write_values(f, arr, dtype):
    f.write(np.ascontiguousarray(arr, dtype="<f8" if dtype == "f64" else "<f4").tobytes())


def _read_values(f, count, np_dtype):
    itemsize = np.dtype(np_dtype).itemsize
    arr = np.frombuffer(_read_exact(f, count * itemsize), dtype=np_dtype)
    return arr.astype(np.float64)


# -- dense tensors -----------------------------------------------------------

def save_dense(path, array, dtype="f64"):
    array = np.asarray(array, dtype=np.float64)
    with open(path, "wb") as f:
        _write_header(f, MAGIC_DENSE, dtype)
        _write_u32(f, array.ndim)
        _write_u64s(f, array.shape)
        _write_values(f, array, dtype)


def load_dense(path) -> np.ndarray:
    with open(path, "rb") as f:
        np_dtype = _read_header(f, MAGIC_DENSE)
        d = _read_u32(f)
        dims = _read_u64s(f, d)
        values = _read_values(f, int(np.prod(dims)), np_dtype)
        return values.reshape(dims)


# -- TT tensors --------------------------------------------------------------

def _core_to_slice_major(core):
    # (r_prev, n, r_next) -> slice index outer, then row, then column
    return core.transpose(1, 0, 2)


def _write_tt_stream(f, tt: TTTensor, dtype):
    _write_header(f, MAGIC_TT, dtype)
    _write_u32(f, tt.ndim)
    _write_u64s(f, tt.mode_sizes)
    _write_u64s(f, tt.ranks)
    for core in tt.cores:
        _write_values(f, _core_to_slice_major(core), dtype)


def _read_tt_stream(f) -> TTTensor:
    np_dtype = _read_header(f, MAGIC_TT)
    d = _read_u32(f)
    modes = _read_u64s(f, d)
    ranks = _read_u64s(f, d + 1)
    cores = []
    for k in range(d):
        r_prev, n, r_next = ranks[k], modes[k], ranks[k + 1]
        values = _read_values(f, r_prev * n * r_next, np_dtype)
        cores.append(values.reshape(n, r_prev, r_next).transpose(1, 0, 2))
    return TTTensor(cores)


def save_tt(path, tt: TTTensor, dtype="f64"):
    with open(path, "wb") as f:
        _write_tt_stream(f, tt, dtype)


def load_tt(path) -> TTTensor:
    with open(path, "rb") as f:
        return _read_tt_stream(f)


# -- TT matrices -------------------------------------------------------------

def save_ttmatrix(path, ttm: TTMatrix, dtype="f64"):
    with open(path, "wb") as f:
        _write_header(f, MAGIC_TTM, dtype)
        _write_u32(f, len(ttm.row_factors))
        _write_u64s(f, ttm.row_factors)
        _write_u64s(f, ttm.col_factors)
        _write_tt_stream(f, ttm.tt, dtype)


def load_ttmatrix(path) -> TTMatrix:
    with open(path, "rb") as f:
        _read_header(f, MAGIC_TTM)
        d = _read_u32(f)
        row_factors = _read_u64s(f, d)
        col_factors = _read_u64s(f, d)
        tt = _read_tt_stream(f)
        return TTMatrix(tt, row_factors, col_factors)


# -- TT convolution kernels --------------------------------------------------

def save_ttconv(path, tk: TTConvKernel, dtype="f64"):
    with open(path, "wb") as f:
        _write_header(f, MAGIC_TTCV, dtype)
        _write_u32(f, tk.ell, tk.fact.depth)
        _write_u64s(f, tk.fact.c_factors)
        _write_u64s(f, tk.fact.s_factors)
        _write_u32(f, tk.fact.pad_c, tk.fact.pad_s)
        _write_u64s(f, tk.ranks)
        # spatial slices ordered x + l*y (x fastest), then r1 entries each
        _write_values(f, tk.g0.transpose(1, 0, 2), dtype)
        for core in tk.cores:
            # slice index c*S + s outer, then the r_k x r_{k+1} matrix row-major
            _write_values(f, core.transpose(1, 2, 0, 3), dtype)


def load_ttconv(path) -> TTConvKernel:
    with open(path, "rb") as f:
        np_dtype = _read_header(f, MAGIC_TTCV)
        ell, d = _read_u32(f, 2)
        c_factors = _read_u64s(f, d)
        s_factors = _read_u64s(f, d)
        pad_c, pad_s = _read_u32(f, 2)
        ranks = _read_u64s(f, d + 2)
        fact = ChannelFactorization(c_factors, s_factors, pad_c, pad_s)
        g0 = _read_values(f, ell * ell * ranks[1], np_dtype)
        g0 = g0.reshape(ell, ell, ranks[1]).transpose(1, 0, 2)
        cores = []
        for k in range(d):
            r_in, r_out = ranks[k + 1], ranks[k + 2]
            ck, sk = c_factors[k], s_factors[k]
            values = _read_values(f, r_in * ck * sk * r_out, np_dtype)
            cores.append(values.reshape(ck, sk, r_in, r_out).transpose(2, 0, 1, 3))
        return TTConvKernel(ell, fact, g0, cores)


# -- format dispatch ---------------------------------------------------------

_LOADERS = {
    MAGIC_DENSE: load_dense,
    MAGIC_TT: load_tt,
    MAGIC_TTM: load_ttmatrix,
    MAGIC_TTCV: load_ttconv,
}


def peek_magic(path) -> bytes:
    with open(path, "rb") as f:
        return f.read(4)


def load_any(path):
    """Load whichever container the file's magic declares."""
    magic = peek_magic(path)
    loader = _LOADERS.get(magic)
    if loader is None:
        raise FormatError(f"unrecognized magic {magic!r}")
    return loader(path)
