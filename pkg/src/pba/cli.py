"""Command-line front end: ``pba fit|encode|decode|eval|rdcurve|sweep|entropy``.

Lambdas on the command line are source-domain multipliers (MSE units); the
allocator receives ``lambda / alpha``.  Failures print one line
``error: <Kind>: <message>`` to stderr and exit with status 1.
"""

from __future__ import annotations

import argparse
import math
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import codec, datastore, evaluation, ntc
from .allocator import DEFAULT_A, AllocatorConfig, rd_sweep
from .errors import PbaError


@contextmanager
def _out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _read_matrix(path, d=None):
    """Samples from CSV or PBADATA; an empty CSV means zero samples."""
    p = Path(path)
    if d is not None and p.exists() and p.stat().st_size == 0:
        return np.zeros((0, d))
    return datastore.read_samples(path)


def cmd_fit(args):
    data = datastore.load(args.input)
    if args.target_bits is not None:
        model, cfg = codec.fit_target_bits(data, args.target_bits, a=args.a, seed=args.seed)
        design = codec.Design.from_data(data)
    else:
        cfg = AllocatorConfig.from_true_lambda(args.lam, a=args.a)
        design = codec.Design.from_data(data)
        model = design.build(design.allocate(cfg), cfg.a, cfg.sigma2, args.seed)
    alloc = design.allocate(cfg)
    codec.write_model(model, args.model)
    trace = float(np.trace(design.stats.K))
    print(f"fit: lambda {evaluation.fmt(cfg.lam_true)} active {alloc.active} "
          f"rate {model.rate_bits_per_dim:.3f} bits/dim "
          f"predicted_snr {evaluation.snr_db(trace, alloc.true_mse):.3f} dB")


def cmd_encode(args):
    model = codec.read_model(args.model)
    X = _read_matrix(args.input, model.d)
    if X.shape[1] != model.d:
        raise PbaError(f"input has d={X.shape[1]}, model has d={model.d}")
    container = codec.encode_container(model, X, per_sample_dither=not args.frozen_dither)
    Path(args.output).write_bytes(container.to_bytes())


def cmd_decode(args):
    model = codec.read_model(args.model)
    container = codec.read_container(args.input)
    Y = codec.decode_container(model, container, per_sample_dither=not args.frozen_dither)
    if args.clip:
        Y = evaluation.apply_clip(Y, *evaluation.parse_clip(args.clip))
    datastore.write_f64bin(Y, args.output)


def cmd_eval(args):
    X = datastore.load(args.original).samples
    Y = datastore.load(args.reconstructed).samples
    rate = math.nan
    if args.model:
        rate = codec.read_model(args.model).rate_bits_per_dim
    clip = evaluation.parse_clip(args.clip) if args.clip else None
    rep = evaluation.evaluate(X, Y, rate, clip)
    evaluation.write_rows(sys.stdout, ["rate_bits_per_dim", "mse", "snr_db", "n"],
                          [(rep.rate_bits_per_dim, rep.mse, rep.snr_db, rep.n)])


def cmd_rdcurve(args):
    X = datastore.load(args.input).samples
    lambdas = evaluation.parse_grid(args.lambdas)
    clip = evaluation.parse_clip(args.clip) if args.clip else None
    rows = evaluation.rd_curve(X, lambdas, a=args.a, seed=args.seed, train_frac=args.train_frac,
                               baseline=args.baseline, gain_bits=args.gain_bits, clip=clip)
    with _out(args.out) as fh:
        evaluation.write_rows(fh, evaluation.RD_CURVE_HEADER, rows)


def cmd_sweep(args):
    data = datastore.load(args.input)
    design = codec.Design.from_data(data)
    base = AllocatorConfig(lam=1.0, a=args.a)
    lambdas = evaluation.parse_grid(args.lambdas) / base.alpha
    points = rd_sweep(design.spectrum, base, lambdas)
    rows = evaluation.rd_sweep_rows(points, float(np.trace(design.stats.K)), base.alpha)
    with _out(args.out) as fh:
        evaluation.write_rows(fh, evaluation.RD_SWEEP_HEADER, rows)


def cmd_entropy(args):
    grid = ntc.entropy_grid(evaluation.parse_grid(args.s_grid))
    with _out(args.out) as fh:
        evaluation.write_rows(fh, ["s", "h_nats", "fisher"],
                              zip(grid.s_values, grid.h_values, grid.j_values))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pba", description="PBA fixed-rate transform codec")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="train a model and write it as PBAM")
    f.add_argument("--input", required=True)
    g = f.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float, help="source-domain Lagrange multiplier")
    g.add_argument("--target-bits", type=float, help="bits per dimension upper bound")
    f.add_argument("--a", type=float, default=DEFAULT_A)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--model", required=True)
    f.set_defaults(func=cmd_fit)

    for name, func, helptext in (("encode", cmd_encode, "samples -> PBAC container"),
                                 ("decode", cmd_decode, "PBAC container -> PBADATA")):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--model", required=True)
        e.add_argument("--input", required=True)
        e.add_argument("--output", required=True)
        e.add_argument("--frozen-dither", action="store_true",
                       help="reuse one dither per component for every sample")
        if name == "decode":
            e.add_argument("--clip", help="lo,hi[,round] post-processing")
        e.set_defaults(func=func)

    ev = sub.add_parser("eval", help="MSE/SNR of a reconstruction")
    ev.add_argument("--original", required=True)
    ev.add_argument("--reconstructed", required=True)
    ev.add_argument("--model", help="model file, to report bits/dim")
    ev.add_argument("--clip", help="lo,hi[,round] applied to the reconstruction")
    ev.set_defaults(func=cmd_eval)

    rd = sub.add_parser("rdcurve", help="held-out RD curve for PBA and the PCA baseline")
    rd.add_argument("--input", required=True)
    rd.add_argument("--lambdas", required=True, help="geom:lo:hi:n")
    rd.add_argument("--baseline", choices=["pca", "none"], default="pca")
    rd.add_argument("--gain-bits", type=int, default=16)
    rd.add_argument("--train-frac", type=float, default=0.8)
    rd.add_argument("--a", type=float, default=DEFAULT_A)
    rd.add_argument("--seed", type=int, default=0)
    rd.add_argument("--clip", help="lo,hi[,round] applied to reconstructions")
    rd.add_argument("--out", default="-")
    rd.set_defaults(func=cmd_rdcurve)

    sw = sub.add_parser("sweep", help="analytic RD points from the allocator, Pareto filtered")
    sw.add_argument("--input", required=True)
    sw.add_argument("--lambdas", required=True, help="geom:lo:hi:n")
    sw.add_argument("--a", type=float, default=DEFAULT_A)
    sw.add_argument("--out", default="-")
    sw.set_defaults(func=cmd_sweep)

    en = sub.add_parser("entropy", help="h(sqrt(s) Z + U) and Fisher information on a grid")
    en.add_argument("--s-grid", required=True, help="geom:lo:hi:n")
    en.add_argument("--out", default="-")
    en.set_defaults(func=cmd_entropy)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (PbaError, OSError, ValueError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
