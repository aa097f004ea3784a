import math

import numpy as np
import pytest
from scipy import integrate

from pba import ntc
from pba.errors import PbaError
from pba.spectral import eigendecompose

GRID = np.geomspace(0.01, 100, 40)


def gauss_h(s):
    return 0.5 * math.log(2 * math.pi * math.e * s)


class TestDensity:
    def test_small_s_is_uniform(self):
        assert math.isclose(ntc.density_gauss_plus_uniform(1e-12, 0.0), 1.0, abs_tol=1e-12)
        assert ntc.density_gauss_plus_uniform(1e-12, 0.6) < 1e-12

    def test_s1_at_zero(self):
        # 2 Phi(1/2) - 1, 30-digit value
        assert math.isclose(ntc.density_gauss_plus_uniform(1.0, 0.0), 0.382924922548026207, rel_tol=1e-15)

    @pytest.mark.parametrize("s", [1e-4, 0.3, 1.0, 50.0])
    def test_normalized(self, s):
        lim = 0.5 + 12 * math.sqrt(s)
        val, _ = integrate.quad(lambda x: ntc.density_gauss_plus_uniform(s, x), -lim, lim,
                                points=[-0.5, 0.5], epsabs=1e-13, limit=200)
        assert abs(val - 1) < 1e-9

    def test_even(self):
        x = np.linspace(0, 5, 11)
        np.testing.assert_array_equal(ntc.density_gauss_plus_uniform(2.0, x),
                                      ntc.density_gauss_plus_uniform(2.0, -x))

    def test_rejects_nonpositive(self):
        with pytest.raises(PbaError):
            ntc.density_gauss_plus_uniform(0.0, 0.0)


class TestEntropy:
    def test_zero(self):
        assert ntc.rho_sl_ntc(0.0) == 0.0

    def test_tiny(self):
        assert -1e-6 <= ntc.rho_sl_ntc(1e-12) <= 1e-3

    def test_gaussian_limit(self):
        assert abs(ntc.rho_sl_ntc(1e4) - gauss_h(1e4)) < 1e-3

    def test_lower_bound(self):
        for s in GRID:
            assert ntc.rho_sl_ntc(s) >= max(0.0, gauss_h(s)) - 1e-12

    def test_upper_bound(self):
        # Gaussian with the same variance maximizes entropy
        for s in GRID:
            assert ntc.rho_sl_ntc(s) <= gauss_h(s + 1 / 12) + 1e-12

    def test_concave(self):
        for s in GRID:
            h = [ntc.rho_sl_ntc(s * f) for f in (0.99, 1.0, 1.01)]
            assert h[0] - 2 * h[1] + h[2] < -1e-6

    def test_de_bruijn(self):
        for s in (0.1, 1.0, 10.0):
            d = 1e-4 * s
            fd = (ntc.rho_sl_ntc(s + d) - ntc.rho_sl_ntc(s - d)) / (2 * d)
            assert abs(fd - 0.5 * ntc.fisher_info(s)) < 1e-4

    def test_fast_table(self):
        s = np.geomspace(1e-9, 1e7, 97)
        exact = np.array([ntc.rho_sl_ntc(v) for v in s])
        np.testing.assert_allclose(ntc.rho_sl_fast(s), exact, atol=1e-8)
        assert ntc.rho_sl_fast(0.0) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(PbaError):
            ntc.rho_sl_ntc(-1.0)


class TestFisher:
    def test_gaussian_limit(self):
        assert abs(ntc.fisher_info(1e4) * 1e4 - 1) < 0.05

    def test_decreasing(self):
        J = np.array([ntc.fisher_info(s) for s in GRID])
        assert np.all(np.diff(J) < 0)

    def test_convolution_bound(self):
        for s in GRID:
            assert ntc.fisher_info(s) <= 1 / s

    def test_grid(self):
        g = ntc.entropy_grid([0.1, 1.0, 10.0])
        assert np.all(np.diff(g.h_values) > 0) and np.all(np.diff(g.j_values) < 0)


class TestLagrangian:
    W = np.array([2.0, 1.0])

    def test_v_zero(self):
        assert ntc.ntc_lagrangian(self.W, [0.0, 0.0], 0.7) == 3.0

    def test_large_lambda_prefers_zero(self):
        obj, v = ntc.eigen_aligned_optimum(self.W, 50.0)
        assert obj == 3.0 and np.all(v == 0)

    def test_against_dense_grid(self):
        lam = 0.5
        obj, _ = ntc.eigen_aligned_optimum(self.W, lam)
        vg = np.concatenate([[0.0], np.geomspace(1e-8, 1e3, 1_000_000)])
        h = ntc.rho_sl_fast(vg)
        ref = sum(np.min(sig2 / 12 / (1 / 12 + vg) + lam * h) for sig2 in self.W)
        assert obj <= ref + 1e-9
        assert ref - obj < 1e-6

    def test_general_objective_matches_aligned(self):
        sp = eigendecompose(np.diag(self.W))
        v = np.array([0.6, 0.25])
        Wm = ntc.aligned_encoder(sp, v)
        assert math.isclose(float(ntc.ntc_objective(np.diag(self.W), Wm, 0.5)),
                            ntc.ntc_lagrangian(self.W, v, 0.5), rel_tol=1e-12)


class TestAlignmentSearch:
    def test_isotropic_rotation_invariant(self):
        K = 1.5 * np.eye(2)
        sp = eigendecompose(K)
        _, v = ntc.eigen_aligned_optimum(sp, 0.3)
        W = ntc.aligned_encoder(sp, v)
        base = ntc.ntc_objective(K, W, 0.3)
        for deg in (5.0, 10.0, 33.0, 90.0):
            assert abs(ntc.ntc_objective(K, ntc.rotation(deg) @ W, 0.3) - base) < 1e-9

    def test_search_small(self):
        R = ntc.rotation(20.0)
        K = R @ np.diag([2.0, 1.0]) @ R.T
        opt, _ = ntc.eigen_aligned_optimum(eigendecompose(K), 0.2)
        best, W = ntc.eigen_alignment_search(K, 0.2, trials=20_000, seed=1)
        assert best >= opt - 1e-4
        assert W.shape == (2, 2)

    def test_mmse_distortion_zero_encoder(self):
        K = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert math.isclose(float(ntc.mmse_distortion(K, np.zeros((2, 2)))), 3.0)
