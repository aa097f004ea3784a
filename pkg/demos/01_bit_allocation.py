"""Bit allocation on a fixed spectrum.

Walk a Lagrange multiplier from large to small and watch components switch
on one at a time, largest eigenvalue first.  Then compare against the PCA
rule that keeps k components at full precision.
"""

import numpy as np

from pba.allocator import AllocatorConfig, pba_allocate, pca_allocate, rd_sweep
from pba.quantizer import make_spec

eigvals = np.array([9.0, 4.0, 2.5, 1.0, 0.6, 0.2, 0.05])
base = AllocatorConfig(lam=1.0)
print(f"alpha = {base.alpha:.1f}, total variance = {eigvals.sum():.2f}\n")

# %% Sweep lambda (source units); the allocator sees lambda / alpha.
print(f"{'lambda':>10} {'active':>6} {'rate(bits)':>10} {'mse':>9}   bits per component")
for lam_true in np.geomspace(3.0, 1e-4, 9):
    cfg = AllocatorConfig.from_true_lambda(lam_true)
    al = pba_allocate(eigvals, cfg)
    bits = [make_spec(cfg.a, v).bits for v in al.v]
    print(f"{lam_true:10.4g} {al.active:6d} {al.rate_bits:10.3f} {al.true_mse:9.4f}   {bits}")

# %% The operational curve keeps every non-dominated stationary point,
# including concave-root candidates that the selector never returns.
pts = rd_sweep(eigvals, base, np.geomspace(1e-7, 0.05, 60))
print(f"\n{len(pts)} Pareto points; first five (rate bits, mse):")
for p in pts[:5]:
    print(f"  {p.rate_bits:8.3f}  {p.true_mse:.5f}")

# %% PCA spends 16 bits on each kept component and nothing elsewhere.
print("\nPCA baseline")
for k in range(len(eigvals) + 1):
    al = pca_allocate(eigvals, k, gain_bits=16)
    print(f"  k={k}: rate {al.rate_bits:7.2f} bits, mse {al.true_mse:.5f}")
