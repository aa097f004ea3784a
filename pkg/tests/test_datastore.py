import struct

import numpy as np
import pytest

from pba import datastore
from pba.datastore import Dataset, fit_stats
from pba.errors import FormatError


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_basic(self, tmp_path):
        ds = datastore.load_csv(_write(tmp_path, "a.csv", "1,2\n3,4"))
        assert (ds.n, ds.d) == (2, 2)
        np.testing.assert_array_equal(ds.samples, [[1, 2], [3, 4]])

    def test_ragged(self, tmp_path):
        with pytest.raises(FormatError, match="ragged row at line 2"):
            datastore.load_csv(_write(tmp_path, "a.csv", "1,2\n3"))

    def test_empty(self, tmp_path):
        with pytest.raises(FormatError, match="n=0"):
            datastore.load_csv(_write(tmp_path, "a.csv", ""))

    def test_bad_cell_reports_position(self, tmp_path):
        with pytest.raises(FormatError, match="line 2, column 1"):
            datastore.load_csv(_write(tmp_path, "a.csv", "1,2\nx,4\n"))

    def test_trailing_newlines_ok(self, tmp_path):
        assert datastore.load_csv(_write(tmp_path, "a.csv", "1\n2\n\n")).n == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            datastore.load_csv(tmp_path / "nope.csv")

    def test_roundtrip_exact(self, tmp_path):
        x = np.random.default_rng(0).normal(size=(7, 3))
        datastore.write_csv(x, tmp_path / "r.csv")
        np.testing.assert_array_equal(datastore.load_csv(tmp_path / "r.csv").samples, x)


class TestF64Bin:
    def test_decode(self, tmp_path):
        p = tmp_path / "a.bin"
        p.write_bytes(b"PBADATA\x00" + struct.pack("<II", 1, 3) + bytes(24))
        ds = datastore.load_f64bin(p)
        assert (ds.n, ds.d) == (1, 3)
        np.testing.assert_array_equal(ds.samples, np.zeros((1, 3)))

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "a.bin"
        p.write_bytes(b"PBADATX\x00" + struct.pack("<II", 1, 1) + bytes(8))
        with pytest.raises(FormatError, match="magic"):
            datastore.load_f64bin(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "a.bin"
        p.write_bytes(b"PBADATA\x00" + struct.pack("<II", 2, 2) + bytes(24))
        with pytest.raises(FormatError, match="truncated"):
            datastore.load_f64bin(p)

    def test_roundtrip_and_sniff(self, tmp_path):
        x = np.random.default_rng(1).normal(size=(5, 4))
        datastore.write_f64bin(x, tmp_path / "r.bin")
        np.testing.assert_array_equal(datastore.load(tmp_path / "r.bin").samples, x)

    def test_zero_rows_readable(self, tmp_path):
        datastore.write_f64bin(np.zeros((0, 3)), tmp_path / "z.bin")
        assert datastore.read_samples(tmp_path / "z.bin").shape == (0, 3)


class TestDataset:
    def test_rejects_nonfinite(self):
        with pytest.raises(FormatError):
            Dataset(np.array([[1.0, np.nan]]))

    def test_rejects_1d(self):
        with pytest.raises(FormatError):
            Dataset(np.array([1.0, 2.0]))

    def test_immutable(self):
        ds = Dataset(np.ones((2, 2)))
        with pytest.raises(ValueError):
            ds.samples[0, 0] = 5.0


class TestFitStats:
    def test_symmetric_pair(self):
        cm = fit_stats(Dataset(np.array([[1.0, 0.0], [-1.0, 0.0]])))
        np.testing.assert_array_equal(cm.mean, [0, 0])
        np.testing.assert_array_equal(cm.K, [[1, 0], [0, 0]])
        assert cm.P == 0.5

    def test_single_sample(self):
        cm = fit_stats(Dataset(np.array([[5.0]])))
        assert cm.mean[0] == 5.0 and cm.K[0, 0] == 0.0 and cm.P == 0.0

    def test_rank_one(self):
        cm = fit_stats(Dataset(np.array([[1.0, 1.0], [-1.0, -1.0]])))
        np.testing.assert_array_equal(cm.K, [[1, 1], [1, 1]])

    def test_permutation_invariant(self):
        x = np.random.default_rng(2).normal(size=(50, 4))
        a = fit_stats(Dataset(x))
        b = fit_stats(Dataset(x[np.random.default_rng(3).permutation(50)]))
        np.testing.assert_allclose(a.K, b.K, atol=1e-14)
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-15)

    def test_shift(self):
        x = np.random.default_rng(4).normal(size=(40, 3))
        c = np.array([10.0, -3.0, 0.5])
        a, b = fit_stats(Dataset(x)), fit_stats(Dataset(x + c))
        np.testing.assert_allclose(b.mean, a.mean + c, atol=1e-12)
        np.testing.assert_allclose(b.K, a.K, atol=1e-12)

    def test_psd(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n, d = rng.integers(1, 20), rng.integers(1, 8)
            cm = fit_stats(Dataset(rng.normal(size=(n, d)) * rng.uniform(0.1, 5, size=d)))
            assert np.linalg.eigvalsh(cm.K).min() >= -1e-10 * max(np.trace(cm.K), 1e-300)
