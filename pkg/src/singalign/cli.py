"""Command-line front end: extract, align, remap, bench, verify.

Exit codes: 0 success, 1 validation/domain error (including bad usage),
2 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from pathlib import Path

from . import io as fio
from .benchmark import LINEAR_RATES, SHIFTS, ExperimentConfig, results_to_plot_rows, run_experiment
from .core import AlignmentError, FeatureFormatError, validate_path
from .ctw import CtwConfig, ctw_align
from .dtw import dtw_align
from .features import (DEFAULT_SR, extract_features, f0_contour, fit_pca, load_wav, pca_reduce,
                       resample_linear, znorm)
from .remap import remap_f0

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="singalign", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("extract", help="WAV -> feature file (and optional F0 CSV)")
    e.add_argument("wav")
    e.add_argument("--out", required=True)
    e.add_argument("--format", choices=("bin", "csv"), default="bin")
    e.add_argument("--feature", choices=("mcep", "stft", "stft-pca"), default="mcep")
    e.add_argument("--order", type=int, default=24)
    e.add_argument("--pca-dim", type=int, default=25)
    e.add_argument("--drop-c0", action="store_true", help="omit the 0th cepstral coefficient")
    e.add_argument("--sr", type=int, default=DEFAULT_SR, help="resample to this rate first (0 keeps the file rate)")
    e.add_argument("--f0-out")

    a = sub.add_parser("align", help="align a source feature file to a target feature file")
    a.add_argument("source")
    a.add_argument("target")
    a.add_argument("--method", choices=("dtw", "ctw-uniform", "ctw-dtw"), default="ctw-uniform")
    a.add_argument("--b", type=int)
    a.add_argument("--lambda", dest="lam", type=float)
    a.add_argument("--max-iter", type=int, default=30)
    a.add_argument("--tol", type=float, default=1e-4)
    a.add_argument("--no-znorm", action="store_true")
    a.add_argument("--pca-dim", type=int, help="jointly PCA-reduce both inputs to this many dims first")
    a.add_argument("--band", type=float, help="Sakoe-Chiba radius in frames (off by default)")
    a.add_argument("--out", required=True)
    a.add_argument("--report")

    r = sub.add_parser("remap", help="warp the target F0 contour onto source timing")
    r.add_argument("source_f0")
    r.add_argument("target_f0")
    r.add_argument("path")
    r.add_argument("--out", required=True)
    r.add_argument("--log-domain", action="store_true")
    r.add_argument("--median3", action="store_true")
    r.add_argument("--mask-source-voicing", action="store_true")

    b = sub.add_parser("bench", help="run the synthetic alignment benchmark")
    b.add_argument("--scenario", choices=("linear", "nonlinear"), default="linear")
    b.add_argument("--task", choices=("mono", "poly", "both"), default="both")
    b.add_argument("--songs", type=int, default=30)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--duration", type=float, default=30.0)
    b.add_argument("--rates", type=float, nargs="+", default=list(LINEAR_RATES))
    b.add_argument("--shifts", type=int, nargs="+", default=list(SHIFTS))
    b.add_argument("--methods", nargs="+", choices=("dtw", "ctw_uniform", "ctw_dtw"),
                   default=["dtw", "ctw_uniform", "ctw_dtw"])
    b.add_argument("--workers", type=int, default=0, help="worker processes (0 = all cores)")
    b.add_argument("--out", required=True)
    b.add_argument("--plot-csv")

    v = sub.add_parser("verify", help="check that a path CSV is a valid warping path")
    v.add_argument("path")
    v.add_argument("--nx", type=int, required=True)
    v.add_argument("--ny", type=int, required=True)
    return p


def _read(kind, reader, fname):
    try:
        return reader(fname)
    except FileNotFoundError:
        raise FeatureFormatError(f"{kind} file not found: {fname}") from None
    except FeatureFormatError as exc:
        raise FeatureFormatError(f"{kind} file {fname}: {exc}") from None


def cmd_extract(args) -> int:
    sig = _read("audio", load_wav, args.wav)
    if args.sr and sig.sample_rate != args.sr:
        sig = resample_linear(sig, args.sr)
    base = "stft" if args.feature.startswith("stft") else "mcep"
    feat = extract_features(sig, base, order=args.order, drop_c0=args.drop_c0, label=Path(args.wav).stem)
    if args.feature == "stft-pca":
        # single-file PCA; use `align --pca-dim` to fit PCA jointly on a pair
        model = fit_pca(feat.data, args.pca_dim)
        feat = feat.with_data(model.transform(feat.data))
    fio.write_features(args.out, feat, args.format)
    if args.f0_out:
        fio.write_f0_csv(args.f0_out, f0_contour(sig, feat.hop_seconds))
    logging.info("wrote %s: d=%d n=%d", args.out, feat.d, feat.n)
    return EXIT_OK


def cmd_align(args) -> int:
    x = _read("source feature", fio.read_features, args.source)
    y = _read("target feature", fio.read_features, args.target)
    if x.d != y.d:
        raise AlignmentError(f"feature dimensions differ: {args.source} has d={x.d}, {args.target} has d={y.d}")
    if args.pca_dim:
        x, y = pca_reduce(x, y, args.pca_dim)
    if not args.no_znorm:
        x, y = znorm(x), znorm(y)
    if args.method == "dtw":
        res = dtw_align(x, y, band=args.band)
    else:
        cfg = CtwConfig(init=args.method.split("-")[1], b=args.b, lam=args.lam,
                        max_iter=args.max_iter, tol=args.tol)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = ctw_align(x, y, cfg)
    fio.write_path_csv(args.out, res.path)
    if args.report:
        report = res.to_dict()
        report.update(method=args.method, source=str(args.source), target=str(args.target),
                      path_file=str(args.out), n_x=x.n, n_y=y.n, d=x.d, znorm=not args.no_znorm)
        fio.write_json(args.report, report)
    logging.info("%s: cost %.6g over %d pairs", args.method, res.final_cost, res.path.m)
    return EXIT_OK


def cmd_remap(args) -> int:
    src = _read("source F0", fio.read_f0_csv, args.source_f0)
    tgt = _read("target F0", fio.read_f0_csv, args.target_f0)
    path = _read("path", fio.read_path_csv, args.path)
    out = remap_f0(src, tgt, path, log_domain=args.log_domain, median3=args.median3,
                   mask_source_voicing=args.mask_source_voicing)
    fio.write_f0_csv(args.out, out)
    return EXIT_OK


def cmd_bench(args) -> int:
    tasks = {"mono": ("mono_to_mono",), "poly": ("mono_to_poly",), "both": ("mono_to_mono", "mono_to_poly")}[args.task]
    cfg = ExperimentConfig(scenario=args.scenario, tasks=tasks, methods=tuple(args.methods),
                           rates=tuple(args.rates), shifts=tuple(args.shifts), n_songs=args.songs,
                           seed=args.seed, duration_s=args.duration)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        results = run_experiment(cfg, workers=args.workers or None)
    fio.write_json(args.out, [c.to_dict() for c in results])
    if args.plot_csv:
        with open(args.plot_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "task", "method", "r", "s", "median_e"])
            w.writerows(results_to_plot_rows(results))
    failed = sum(c.failed for c in results)
    if failed:
        logging.warning("%d case alignments failed; see 'failures' in %s", failed, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    path = _read("path", fio.read_path_csv, args.path)
    verdict = validate_path(path, args.nx, args.ny)
    if verdict:
        print(f"{args.path}: valid warping path (m={path.m})")
        return EXIT_OK
    print(f"{args.path}: invalid ({verdict.constraint} at pair {verdict.index}): {verdict.message}",
          file=sys.stderr)
    return EXIT_DOMAIN


COMMANDS = {"extract": cmd_extract, "align": cmd_align, "remap": cmd_remap,
            "bench": cmd_bench, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr, end="")
        return EXIT_DOMAIN
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FeatureFormatError, OSError) as exc:
        print(f"singalign {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AlignmentError, ValueError) as exc:
        print(f"singalign {args.command}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
