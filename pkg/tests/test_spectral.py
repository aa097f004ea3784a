import math

import numpy as np
import pytest

from pba.errors import PbaError
from pba.spectral import eigendecompose, project


def _random_psd(rng, d):
    A = rng.normal(size=(d, d))
    return A @ A.T / d


class TestEigendecompose:
    def test_diagonal(self):
        sp = eigendecompose(np.diag([3.0, 1.0]))
        np.testing.assert_array_equal(sp.eigvals, [3.0, 1.0])
        np.testing.assert_array_equal(np.abs(sp.eigvecs), np.eye(2))

    def test_classic_2x2(self):
        sp = eigendecompose(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(sp.eigvals, [3.0, 1.0], atol=1e-14)
        r = 1 / math.sqrt(2)
        np.testing.assert_allclose(np.abs(sp.eigvecs), [[r, r], [r, r]], atol=1e-14)
        assert np.sign(sp.eigvecs[0, 0]) == np.sign(sp.eigvecs[1, 0])
        assert np.sign(sp.eigvecs[0, 1]) != np.sign(sp.eigvecs[1, 1])

    @pytest.mark.parametrize("d", [1, 2, 3, 6, 17, 40])
    def test_matches_numpy(self, d):
        K = _random_psd(np.random.default_rng(d), d)
        sp = eigendecompose(K)
        ref = np.linalg.eigvalsh(K)[::-1]
        np.testing.assert_allclose(sp.eigvals, ref, atol=1e-12 * (1 + ref[0]))
        U = sp.eigvecs
        assert np.abs(U.T @ U - np.eye(d)).max() <= 1e-10
        assert np.abs(K - U @ np.diag(sp.eigvals) @ U.T).max() <= 1e-8 * (1 + sp.eigvals[0])

    def test_sorted_and_trace(self):
        K = _random_psd(np.random.default_rng(9), 12)
        sp = eigendecompose(K)
        assert np.all(np.diff(sp.eigvals) <= 0)
        assert abs(sp.eigvals.sum() - np.trace(K)) <= 1e-9 * np.trace(K)

    def test_sign_convention(self):
        sp = eigendecompose(_random_psd(np.random.default_rng(11), 7))
        for col in sp.eigvecs.T:
            assert col[np.argmax(np.abs(col))] >= 0

    def test_deterministic(self):
        K = _random_psd(np.random.default_rng(12), 9)
        a, b = eigendecompose(K), eigendecompose(K.copy())
        assert a.eigvals.tobytes() == b.eigvals.tobytes()
        assert a.eigvecs.tobytes() == b.eigvecs.tobytes()

    def test_perturbation_stability(self):
        K = np.diag([5.0, 3.0, 1.0, 0.5])
        R = np.linalg.qr(np.random.default_rng(13).normal(size=(4, 4)))[0]
        K = R @ K @ R.T
        E = np.random.default_rng(14).normal(size=(4, 4))
        E = 1e-10 * (E + E.T) / 2
        diff = eigendecompose(K + E).eigvals - eigendecompose(K).eigvals
        assert np.abs(diff).max() < 1e-8

    def test_rejects_asymmetric(self):
        with pytest.raises(PbaError, match="symmetric"):
            eigendecompose(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_nonsquare(self):
        with pytest.raises(PbaError):
            eigendecompose(np.ones((2, 3)))

    def test_zero_matrix(self):
        sp = eigendecompose(np.zeros((3, 3)))
        np.testing.assert_array_equal(sp.eigvals, 0.0)


class TestProject:
    def test_identity(self):
        sp = eigendecompose(np.diag([2.0, 1.0]))
        np.testing.assert_array_equal(project(sp, np.array([1.0, 2.0])), [1.0, 2.0])

    def test_rotation(self):
        sp = eigendecompose(np.array([[2.0, 1.0], [1.0, 2.0]]))
        out = project(sp, np.array([1.0, 0.0]))
        np.testing.assert_allclose(np.abs(out), [1 / math.sqrt(2)] * 2, atol=1e-15)

    def test_norm_preserved(self):
        sp = eigendecompose(_random_psd(np.random.default_rng(15), 5))
        x = np.random.default_rng(16).normal(size=5)
        assert math.isclose(np.linalg.norm(project(sp, x)), np.linalg.norm(x), rel_tol=1e-13)

    def test_dimension_mismatch(self):
        sp = eigendecompose(np.eye(3))
        with pytest.raises(PbaError):
            project(sp, np.ones(2))
