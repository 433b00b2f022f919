"""Command-line entry point: ``tracemda <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
non-convergence (only with ``--strict``).
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from tracemda import data_io, evaluation, mda
from tracemda.exceptions import ConfigError, DataFormatError, DimensionError
from tracemda.trace_ratio import SolverOptions

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NONCONVERGED = 0, 2, 3, 4

log = logging.getLogger("tracemda")


def _labels_path_for(out: Path) -> Path:
    return out.with_name(out.stem + ".labels.csv")


def _load_data(data, labels):
    X = data_io.load_container(data)
    if labels is None:
        guess = _labels_path_for(Path(data))
        if not guess.exists():
            raise ConfigError(f"no --labels given and {guess} does not exist")
        labels = guess
    return mda.LabeledDataset(X, data_io.load_labels_csv(labels))


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(max_iter=args.max_iter, tol=args.tol, seed=args.seed, eps=args.eps)


def cmd_convert(args):
    out = Path(args.out)
    if args.images:
        if not args.idx_labels:
            raise ConfigError("--images needs --idx-labels")
        ds = data_io.load_idx(args.images, args.idx_labels)
    elif args.csv:
        shape = tuple(int(s) for s in args.shape.split("x")) if args.shape else None
        ds = data_io.load_feature_csv(args.csv, shape)
    else:
        raise ConfigError("give --images/--idx-labels or --csv")
    data_io.save_container(out, ds.X)
    data_io.save_labels_csv(_labels_path_for(out), ds.labels)
    print(f"wrote {out} shape={'x'.join(map(str, ds.X.shape))} and {_labels_path_for(out)}")
    return EXIT_OK


def cmd_fit(args):
    ds = _load_data(args.data, args.labels)
    opts = _solver_opts(args)
    t0 = time.perf_counter()
    P, iters, rho, ok = evaluation.fit(args.method, ds, args.dim, opts, args.denominator)
    dt = time.perf_counter() - t0
    data_io.save_container(args.out, P)
    rho_s = "nan" if rho is None else f"{rho:.10g}"
    print(f"method={args.method} d={args.dim} iterations={iters} rho_star={rho_s} "
          f"converged={ok} wall_time_s={dt:.2f}")
    if not ok and args.strict:
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_project(args):
    X = data_io.load_container(args.data)
    P = data_io.load_container(args.proj)
    data_io.save_container(args.out, mda.project(X, P))
    return EXIT_OK


def cmd_eval(args):
    train = _load_data(args.train, args.train_labels)
    test = _load_data(args.test, args.test_labels)
    if args.proj:
        P = data_io.load_container(args.proj)
        tr, te = mda.project(train.X, P), mda.project(test.X, P)
    else:
        tr, te = train.X, test.X
    pred = evaluation.knn1_classify(tr, train.labels, te)
    rate = evaluation.recognition_rate(pred, test.labels)
    print(f"recognition_rate={rate:.4f}")
    if args.out:
        data_io.save_labels_csv(args.out, pred)
    return EXIT_OK


def cmd_bench(args):
    cfg = evaluation.load_config(args.config)
    overrides = {}
    if args.method:
        overrides["methods"] = tuple(args.method)
    if args.dim:
        overrides["dims"] = tuple(args.dim)
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    for key in ("eps", "tol", "max_iter", "denominator", "out"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if overrides:
        cfg = evaluation.BenchmarkConfig(**{**cfg.__dict__, **overrides})
    try:
        report = evaluation.run_benchmark(cfg, strict=args.strict)
        code = EXIT_OK
    except evaluation.NonConvergenceError as exc:
        log.error("%s", exc)
        report, code = exc.report, EXIT_NONCONVERGED
    if not cfg.out:
        sys.stdout.write(report.to_csv())
    for (method, d), rate in sorted(report.summary().items()):
        log.info("mean %s d=%d: %.4f", method, d, rate)
    return code


def _add_solver_flags(p, bench=False):
    default = (lambda v: None) if bench else (lambda v: v)
    p.add_argument("--eps", type=float, default=default(0.01), help="regularization (default 0.01)")
    p.add_argument("--tol", type=float, default=default(1e-9), help="convergence tolerance (default 1e-9)")
    p.add_argument("--max-iter", type=int, default=default(100), help="iteration cap (default 100)")
    p.add_argument("--seed", type=int, default=default(0))
    p.add_argument("--denominator", choices=("st", "sw"), default=default("st"))
    p.add_argument("--strict", action="store_true", help="exit 4 when a solve does not converge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracemda", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="IDX or CSV to a TTEN container plus label CSV")
    p.add_argument("--images", help="IDX image file")
    p.add_argument("--idx-labels", help="IDX label file")
    p.add_argument("--csv", help="CSV with one sample per row and a 'label' column")
    p.add_argument("--shape", help="feature shape for CSV input, e.g. 28x28")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("fit", help="train a projection and save it as TTEN")
    p.add_argument("--data", required=True)
    p.add_argument("--labels")
    p.add_argument("--method", choices=evaluation.METHODS, default="mda_tr")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("project", help="apply a saved projection to a data tensor")
    p.add_argument("--data", required=True)
    p.add_argument("--proj", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("eval", help="1-NN recognition rate, optionally after projection")
    p.add_argument("--train", required=True)
    p.add_argument("--train-labels")
    p.add_argument("--test", required=True)
    p.add_argument("--test-labels")
    p.add_argument("--proj")
    p.add_argument("--out", help="write predicted labels as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run a benchmark configuration, write CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--method", action="append", choices=evaluation.METHODS)
    p.add_argument("--dim", action="append", type=int)
    p.add_argument("--out")
    _add_solver_flags(p, bench=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (DataFormatError, DimensionError, OSError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except ValueError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
