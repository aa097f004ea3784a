import math

import numpy as np
import pytest

from pba.errors import PbaError
from pba.quantizer import QuantSpec, codebook, dither, make_spec, q_cd, q_cd_prime, splitmix64

M64 = (1 << 64) - 1


def ref_splitmix64(x):
    """Plain-integer reference, independent of the numpy version."""
    x = (x + 0x9E3779B97F4A7C15) & M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def ref_dither(seed, j, i):
    key = seed ^ ((j * 0x9E3779B97F4A7C15) & M64) ^ ((i + 0xD1B54A32D192ED03) & M64)
    return (ref_splitmix64(key) >> 11) * 2.0 ** -53 - 0.5


def spec_with(bits):
    return QuantSpec(a=15.0, v=0.0, bits=bits)


class TestMakeSpec:
    @pytest.mark.parametrize("v,bits", [(1.0, 4), (0.0, 0), (4.0, 5)])
    def test_examples(self, v, bits):
        s = make_spec(15.0, v)
        assert s.bits == bits and s.gamma_pts == 2 ** bits

    def test_against_log_formula(self):
        for v in np.geomspace(1e-6, 1e6, 500):
            y = 4 * 225 * v + 1
            expect = math.floor(0.5 * math.log2(y))
            # skip values within rounding of a power of four
            if abs(0.5 * math.log2(y) - round(0.5 * math.log2(y))) > 1e-9:
                assert make_spec(15.0, v).bits == expect

    def test_power_of_four_boundary(self):
        # 4 a^2 v + 1 = 4 exactly -> one bit, one ulp less -> zero bits
        v = 3.0 / 900.0
        assert make_spec(15.0, v).bits == (1 if 900.0 * v + 1.0 >= 4.0 else 0)
        assert make_spec(15.0, np.nextafter(3.0, 0) / 900.0).bits == 0

    @pytest.mark.parametrize("a,v", [(0.0, 1.0), (15.0, -1.0), (15.0, math.inf)])
    def test_rejects(self, a, v):
        with pytest.raises(PbaError):
            make_spec(a, v)


class TestDither:
    def test_matches_reference(self):
        for seed, j, i in [(0, 0, 0), (1, 2, 3), (M64, 12345, 7), (42, 2**40, 2**31 - 1)]:
            assert dither(seed, j, i) == ref_dither(seed, j, i)

    def test_splitmix_reference(self):
        xs = [0, 1, 0xDEADBEEF, M64]
        out = splitmix64(np.array(xs, dtype=np.uint64))
        assert [int(z) for z in out] == [ref_splitmix64(x) for x in xs]

    def test_deterministic(self):
        assert dither(5, 9, 2) == dither(5, 9, 2)

    def test_range(self):
        u = dither(3, np.arange(10_000), 0)
        assert u.min() >= -0.5 and u.max() < 0.5

    def test_moments(self):
        j = np.arange(1_000_000, dtype=np.uint64)
        u = dither(11, j // 8, j % 8)
        assert abs(u.mean()) < 0.002
        assert abs(u.var() * 12 - 1) < 0.02
        rho = np.corrcoef(u[:-1], u[1:])[0, 1]
        assert abs(rho) < 0.01


class TestQcd:
    def test_example_codebook(self):
        np.testing.assert_array_equal(codebook(spec_with(2), 0.25), [-1.75, -0.75, 0.25, 1.25])

    def test_nearest(self):
        assert q_cd(spec_with(2), 0.25, 0.3) == 2
        assert q_cd(spec_with(2), 0.25, 100.0) == 3
        assert q_cd(spec_with(2), 0.25, -100.0) == 0

    def test_single_point(self):
        assert q_cd(spec_with(0), 0.3, 17.0) == 0
        assert q_cd_prime(spec_with(0), 0.3, 0) == 0.3

    def test_boundary_dither(self):
        np.testing.assert_array_equal(codebook(spec_with(1), -0.5), [-0.5, 0.5])

    def test_tie_goes_low(self):
        # points -0.75 and 0.25; x = -0.25 is exactly midway
        assert q_cd(spec_with(2), 0.25, -0.25) == 1

    def test_codebook_size_and_window(self):
        rng = np.random.default_rng(0)
        for bits in range(0, 8):
            g = 2 ** bits
            for u in np.concatenate([[-0.5, 0.0, 0.4999999], rng.uniform(-0.5, 0.5, 20)]):
                cb = codebook(spec_with(bits), u)
                assert cb.size == g
                assert cb.min() > -g / 2 and cb.max() <= g / 2
                np.testing.assert_allclose(np.diff(cb), 1.0)

    def test_bruteforce_nearest(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            bits = int(rng.integers(1, 6))
            u = rng.uniform(-0.5, 0.5)
            x = rng.uniform(-40, 40, size=50)
            cb = codebook(spec_with(bits), u)
            expect = np.argmin(np.abs(x[:, None] - cb[None, :]), axis=1)
            np.testing.assert_array_equal(q_cd(spec_with(bits), u, x), expect)

    def test_roundtrip(self):
        for bits in range(0, 7):
            s = spec_with(bits)
            idx = np.arange(s.gamma_pts)
            np.testing.assert_array_equal(q_cd(s, 0.17, q_cd_prime(s, 0.17, idx)), idx)

    def test_interior_error_half(self):
        s = spec_with(4)
        x = np.linspace(-7.49, 7.49, 5001)
        err = np.abs(x - q_cd_prime(s, 0.1, q_cd(s, 0.1, x)))
        assert err.max() <= 0.5

    def test_index_out_of_range(self):
        with pytest.raises(PbaError):
            q_cd_prime(spec_with(2), 0.0, 4)


class TestDitherEquivalence:
    def test_error_variance_and_clamp(self):
        s = make_spec(15.0, 1.0)
        rng = np.random.default_rng(3)
        x = rng.normal(size=100_000)
        u = dither(99, np.arange(x.size), 0)
        idx = q_cd(s, u, x)
        err = x - q_cd_prime(s, u, idx)
        clamped = (idx == 0) | (idx == s.gamma_pts - 1)
        clamped &= np.abs(err) > 0.5
        assert clamped.mean() < 1e-3
        assert 0.95 / 12 <= err[~clamped].var() <= 1.05 / 12
        # error independent of the signal
        assert abs(np.corrcoef(x[~clamped], err[~clamped])[0, 1]) < 0.02
