"""PBA: a fixed-rate linear transform codec with per-component bit allocation.

Typical use::

    from pba import AllocatorConfig, Dataset, codec

    model = codec.fit(Dataset(X_train), AllocatorConfig.from_true_lambda(1e-3))
    records = codec.encode(model, X)
    X_hat = codec.decode(model, records)
"""

from .allocator import (
    Allocation,
    AllocatorConfig,
    CandidateSolution,
    RDPoint,
    enumerate_candidates,
    oracle_allocate,
    pba_allocate,
    pca_allocate,
    rd_sweep,
)
from .codec import Container, PbaModel
from .datastore import CovarianceModel, Dataset, fit_stats, load, load_csv, load_f64bin
from .errors import ConvergenceError, FormatError, ModelMismatchError, PbaError
from .quantizer import QuantSpec, dither, make_spec, q_cd, q_cd_prime
from .spectral import Spectrum, eigendecompose, project

__all__ = [
    "Allocation", "AllocatorConfig", "CandidateSolution", "Container", "ConvergenceError",
    "CovarianceModel", "Dataset", "FormatError", "ModelMismatchError", "PbaError", "PbaModel",
    "QuantSpec", "RDPoint", "Spectrum", "dither", "eigendecompose", "enumerate_candidates",
    "fit_stats", "load", "load_csv", "load_f64bin", "make_spec", "oracle_allocate",
    "pba_allocate", "pca_allocate", "project", "q_cd", "q_cd_prime", "rd_sweep",
]
