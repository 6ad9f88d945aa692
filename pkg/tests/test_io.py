import numpy as np
import pytest
from numpy.testing import assert_allclose

from ttconv.io import (
    FormatError,
    load_any,
    load_dense,
    load_tt,
    load_ttconv,
    load_ttmatrix,
    save_dense,
    save_tt,
    save_ttconv,
    save_ttmatrix,
)
from ttconv.kernels import factorize_channels, random_ttconv_kernel
from ttconv.tt import random_tt, tt_full
from ttconv.ttmatrix import TTMatrix, ttm_full


def roundtrip_bytes(tmp_path, name, save, load, obj, dtype):
    p1 = tmp_path / f"a_{name}"
    p2 = tmp_path / f"b_{name}"
    save(p1, obj, dtype=dtype)
    again = load(p1)
    save(p2, again, dtype=dtype)
    return p1.read_bytes(), p2.read_bytes(), again


class TestDense:
    def test_value_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 4, 2))
        p = tmp_path / "t.ten"
        save_dense(p, a)
        assert_allclose(load_dense(p), a)

    def test_byte_identical_f64(self, tmp_path):
        a = np.random.default_rng(1).standard_normal((2, 5))
        b1, b2, _ = roundtrip_bytes(tmp_path, "t.ten", save_dense, load_dense, a, "f64")
        assert b1 == b2

    def test_byte_identical_f32(self, tmp_path):
        a = np.random.default_rng(2).standard_normal((4, 3)).astype(np.float32)
        b1, b2, back = roundtrip_bytes(
            tmp_path, "t.ten", save_dense, load_dense, a.astype(np.float64), "f32"
        )
        assert b1 == b2
        assert back.dtype == np.float64

    def test_c_order_layout(self, tmp_path):
        # last index fastest in the payload
        a = np.arange(6, dtype=float).reshape(2, 3)
        p = tmp_path / "t.ten"
        save_dense(p, a)
        raw = p.read_bytes()
        payload = np.frombuffer(raw[-48:], dtype="<f8")
        assert_allclose(payload, [0, 1, 2, 3, 4, 5])

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "junk.ten"
        p.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(FormatError):
            load_dense(p)

    def test_truncated(self, tmp_path):
        rng = np.random.default_rng(3)
        p = tmp_path / "t.ten"
        save_dense(p, rng.standard_normal((4, 4)))
        (tmp_path / "cut.ten").write_bytes(p.read_bytes()[:-8])
        with pytest.raises(FormatError):
            load_dense(tmp_path / "cut.ten")


class TestTT:
    def test_roundtrip_values(self, tmp_path):
        tt = random_tt((3, 4, 2), (2, 3), np.random.default_rng(4))
        p = tmp_path / "t.tt"
        save_tt(p, tt)
        back = load_tt(p)
        assert back.mode_sizes == tt.mode_sizes
        assert back.ranks == tt.ranks
        assert_allclose(tt_full(back), tt_full(tt))

    def test_byte_identical(self, tmp_path):
        tt = random_tt((2, 3, 4), (3, 2), np.random.default_rng(5))
        b1, b2, _ = roundtrip_bytes(tmp_path, "t.tt", save_tt, load_tt, tt, "f64")
        assert b1 == b2

    def test_slice_major_layout(self, tmp_path):
        # d=1 core (1, n, 1): payload is just the vector
        tt = random_tt((5,), (), np.random.default_rng(6))
        p = tmp_path / "t.tt"
        save_tt(p, tt)
        payload = np.frombuffer(p.read_bytes()[-40:], dtype="<f8")
        assert_allclose(payload, tt.cores[0][0, :, 0])


class TestTTMatrix:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(7)
        ttm = TTMatrix(random_tt((6, 6), (3,), rng), (2, 3), (3, 2))
        p = tmp_path / "t.ttm"
        save_ttmatrix(p, ttm)
        back = load_ttmatrix(p)
        assert back.row_factors == (2, 3)
        assert back.col_factors == (3, 2)
        assert_allclose(ttm_full(back), ttm_full(ttm))

    def test_byte_identical(self, tmp_path):
        ttm = TTMatrix(random_tt((4, 4), (2,), np.random.default_rng(8)), (2, 2), (2, 2))
        b1, b2, _ = roundtrip_bytes(tmp_path, "t.ttm", save_ttmatrix, load_ttmatrix, ttm, "f64")
        assert b1 == b2


class TestTTConv:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(9)
        fact = factorize_channels(3, 5, 2)
        tk = random_ttconv_kernel(3, fact, (2, 2), rng)
        p = tmp_path / "t.ttcv"
        save_ttconv(p, tk)
        back = load_ttconv(p)
        assert back.ell == 3
        assert back.fact == fact
        assert back.ranks == tk.ranks
        assert_allclose(back.g0, tk.g0)
        for a, b in zip(back.cores, tk.cores):
            assert_allclose(a, b)

    def test_byte_identical(self, tmp_path):
        rng = np.random.default_rng(10)
        fact = factorize_channels(4, 4, 2)
        tk = random_ttconv_kernel(1, fact, (2, 1), rng)
        b1, b2, _ = roundtrip_bytes(tmp_path, "t.ttcv", save_ttconv, load_ttconv, tk, "f64")
        assert b1 == b2

    def test_depth_1_and_3_kernels(self, tmp_path):
        rng = np.random.default_rng(11)
        for d, ranks in ((1, (3,)), (3, (2, 3, 2))):
            fact = factorize_channels(8, 8, d)
            tk = random_ttconv_kernel(3, fact, ranks, rng)
            p = tmp_path / f"d{d}.ttcv"
            save_ttconv(p, tk)
            back = load_ttconv(p)
            assert back.fact == fact
            assert_allclose(back.g0, tk.g0)
            for a, b in zip(back.cores, tk.cores):
                assert_allclose(a, b)


class TestLoadAny:
    def test_dispatch(self, tmp_path):
        rng = np.random.default_rng(11)
        save_dense(tmp_path / "a.ten", rng.standard_normal((2, 2)))
        save_tt(tmp_path / "a.tt", random_tt((2, 2), (1,), rng))
        assert isinstance(load_any(tmp_path / "a.ten"), np.ndarray)
        assert load_any(tmp_path / "a.tt").ndim == 2

    def test_unknown_magic(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b"ABCD1234")
        with pytest.raises(FormatError):
            load_any(p)
