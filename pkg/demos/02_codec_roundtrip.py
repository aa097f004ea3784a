"""Fit, encode, random access, decode.

A 64-dimensional Gaussian source with a geometric spectrum stands in for
real data.  Every record has the same length, so sample j can be read
straight from its byte offset without touching the rest of the file.
"""

import tempfile
from pathlib import Path

import numpy as np

from pba import codec
from pba.allocator import pca_allocate
from pba.datastore import Dataset
from pba.evaluation import gaussian_source, simulate

X = gaussian_source(0.9 ** np.arange(64), 20_000, seed=0)
train, test = X[:10_000], X[10_000:]
design = codec.Design.from_data(Dataset(train))

# %% Hit a bit budget by bisecting on lambda.
cfg = codec.search_lambda(design, 1.0)
alloc = design.allocate(cfg)
model = design.build(alloc, cfg.a, cfg.sigma2, seed=1)
print(f"lambda {cfg.lam_true:.4g}: {model.total_bits} bits/sample "
      f"({model.rate_bits_per_dim:.3f} bits/dim), {model.record_len} bytes/record")
print("bit widths:", model.bits[model.bits > 0].tolist())

# %% Container round trip with random access.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "test.pbac"
    path.write_bytes(codec.encode_container(model, test).to_bytes())
    print(f"container: {path.stat().st_size} bytes for {len(test)} samples")
    j = 4321
    rec = codec.read_record(path, j)
    xj = codec.decode_sample(model, j, rec)
    print(f"sample {j}: squared error {np.sum((xj - test[j]) ** 2):.4f}")

# %% Predicted vs measured distortion, and the PCA comparison.
rep = simulate(model, test)
print(f"\npredicted mse {alloc.true_mse / 64:.5f}/dim, measured {rep.mse:.5f}/dim, SNR {rep.snr_db:.2f} dB")

print("\nrate(b/d)   PCA SNR   PBA SNR")
for k in (1, 2, 4, 8):
    pca = design.build(pca_allocate(design.spectrum, k, 16), 15.0, 1 / 12, 0, empirical=False)
    cfg = codec.search_lambda(design, pca.rate_bits_per_dim)
    pba = design.build(design.allocate(cfg), cfg.a, cfg.sigma2, 0)
    print(f"{pca.rate_bits_per_dim:9.2f} {simulate(pca, test).snr_db:9.2f} {simulate(pba, test).snr_db:9.2f}")
