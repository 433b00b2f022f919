"""1-NN evaluation and the benchmark harness.

Configuration files are flat ``key = value`` text, one pair per line.  Blank
lines and lines starting with ``#`` are ignored; list values are comma
separated.  Recognised keys:

=================  ==========================================================
dataset            ``idx``, ``container`` or ``synthetic``
images, labels     IDX image / label files (``dataset = idx``)
data, label_csv    TTEN data tensor and ``index,label`` CSV (``container``)
synth_classes      number of classes (``synthetic``); also ``synth_per_class``,
                   ``synth_shape`` (e.g. ``4x3``), ``synth_separation``,
                   ``synth_noise``, ``synth_seed``
train_per_class    stratified split; optional ``test_per_class``
train_fraction     global split instead of a stratified one
methods            subset of ``mda_tr, mda_rt, mda_ls``
dims               target dimensions
seeds              split/initialisation seeds; or ``repetitions`` (+ ``seed``)
eps, tol,          solver options
max_iter
denominator        ``st`` or ``sw``
baseline           ``true``/``false``: add 1-NN rows on the raw data
record_timing      ``false`` writes 0.00 wall times (byte-stable output)
out                CSV path
=================  ==========================================================
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from tracemda import data_io, mda
from tracemda import trace_ratio as trm
from tracemda.exceptions import ConfigError, DimensionError
from tracemda.trace_ratio import SolverOptions

logger = logging.getLogger(__name__)

METHODS = ("mda_tr", "mda_rt", "mda_ls")
CSV_HEADER = ["method", "d", "seed", "recognition_rate", "wall_time_s", "iterations", "rho_star"]


def knn1_classify(train_features, train_labels, test_features) -> np.ndarray:
    """Label of the nearest training sample (Euclidean) for every test sample.

    Features are ``d x n`` (samples along the last axis).  Ties go to the
    lowest training index.
    """
    tr = np.asarray(train_features, dtype=np.float64)
    te = np.asarray(test_features, dtype=np.float64)
    train_labels = np.asarray(train_labels)
    if tr.ndim == 1:
        tr = tr[None, :]
    if te.ndim == 1:
        te = te[None, :]
    tr = tr.reshape(-1, tr.shape[-1])
    te = te.reshape(-1, te.shape[-1])
    if tr.shape[1] == 0:
        raise ValueError("empty training set")
    if tr.shape[0] != te.shape[0]:
        raise DimensionError(f"feature dimensions differ: {tr.shape[0]} vs {te.shape[0]}")
    if train_labels.shape[0] != tr.shape[1]:
        raise DimensionError("one training label per training sample required")
    dist = cdist(te.T, tr.T, "sqeuclidean")
    return train_labels[np.argmin(dist, axis=1)]


def recognition_rate(pred, truth) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DimensionError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("no test samples")
    return float(np.mean(pred == truth))


@dataclass
class BenchmarkConfig:
    dataset: str = "synthetic"
    images: str | None = None
    labels: str | None = None
    data: str | None = None
    label_csv: str | None = None
    synth: data_io.SynthSpec = field(default_factory=data_io.SynthSpec)
    train_per_class: int | None = None
    test_per_class: int | None = None
    train_fraction: float | None = 0.5
    methods: tuple = ("mda_rt",)
    dims: tuple = (1,)
    seeds: tuple = (0,)
    eps: float = 0.01
    tol: float = 1e-9
    max_iter: int = 100
    denominator: str = "st"
    baseline: bool = True
    record_timing: bool = True
    out: str | None = None

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if not self.methods and not self.baseline:
            raise ConfigError("nothing to run: no methods and no baseline")
        if any(int(d) < 1 for d in self.dims):
            raise ConfigError("target dimensions must be positive")
        if len(self.seeds) < 1:
            raise ConfigError("need at least one seed")
        if self.denominator not in ("st", "sw"):
            raise ConfigError("denominator must be st or sw")
        if self.dataset not in ("idx", "container", "synthetic"):
            raise ConfigError(f"unknown dataset kind {self.dataset!r}")
        if self.eps < 0 or self.tol <= 0 or self.max_iter < 1:
            raise ConfigError("need eps >= 0, tol > 0 and max_iter >= 1")

    def split_spec(self, seed: int) -> data_io.SplitSpec:
        try:
            if self.train_per_class is not None:
                return data_io.SplitSpec(
                    train_per_class=self.train_per_class,
                    test_per_class=self.test_per_class,
                    seed=seed,
                )
            return data_io.SplitSpec(train_fraction=self.train_fraction, seed=seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def solver_options(self, seed: int) -> SolverOptions:
        return SolverOptions(max_iter=self.max_iter, tol=self.tol, seed=seed, eps=self.eps)


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _ints(value: str) -> tuple:
    return tuple(int(v) for v in value.split(",") if v.strip())


def parse_config(text: str, base_dir=None) -> BenchmarkConfig:
    """Parse the flat ``key = value`` configuration format."""
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value

    def path(key):
        if key not in pairs:
            return None
        p = Path(pairs.pop(key))
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return str(p)

    kw = {}
    try:
        if "dataset" in pairs:
            kw["dataset"] = pairs.pop("dataset")
        for key in ("images", "labels", "data", "label_csv", "out"):
            val = path(key)
            if val is not None:
                kw[key] = val
        synth = {}
        for key, conv in (
            ("synth_classes", ("n_classes", int)),
            ("synth_per_class", ("per_class", int)),
            ("synth_separation", ("separation", float)),
            ("synth_noise", ("noise", float)),
            ("synth_seed", ("seed", int)),
        ):
            if key in pairs:
                synth[conv[0]] = conv[1](pairs.pop(key))
        if "synth_shape" in pairs:
            synth["feature_shape"] = tuple(int(s) for s in pairs.pop("synth_shape").split("x"))
        if synth:
            kw["synth"] = data_io.SynthSpec(**synth)
        if "train_per_class" in pairs:
            kw["train_per_class"] = int(pairs.pop("train_per_class"))
            kw["train_fraction"] = None
        if "test_per_class" in pairs:
            kw["test_per_class"] = int(pairs.pop("test_per_class"))
        if "train_fraction" in pairs:
            kw["train_fraction"] = float(pairs.pop("train_fraction"))
        if "methods" in pairs:
            kw["methods"] = tuple(m.strip() for m in pairs.pop("methods").split(",") if m.strip())
        if "dims" in pairs:
            kw["dims"] = _ints(pairs.pop("dims"))
        if "seeds" in pairs:
            kw["seeds"] = _ints(pairs.pop("seeds"))
        if "repetitions" in pairs:
            reps = int(pairs.pop("repetitions"))
            start = int(pairs.pop("seed", 0))
            if "seeds" in kw:
                raise ConfigError("give either seeds or repetitions, not both")
            if reps < 1:
                raise ConfigError("repetitions must be >= 1")
            kw["seeds"] = tuple(range(start, start + reps))
        for key, conv in (("eps", float), ("tol", float), ("max_iter", int)):
            if key in pairs:
                kw[key] = conv(pairs.pop(key))
        if "denominator" in pairs:
            kw["denominator"] = pairs.pop("denominator")
        for key in ("baseline", "record_timing"):
            if key in pairs:
                kw[key] = _bool(pairs.pop(key))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    if pairs:
        raise ConfigError(f"unknown keys: {sorted(pairs)}")
    return BenchmarkConfig(**kw)


def load_config(path) -> BenchmarkConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)


def load_dataset(config: BenchmarkConfig) -> mda.LabeledDataset:
    if config.dataset == "idx":
        if not (config.images and config.labels):
            raise ConfigError("idx datasets need 'images' and 'labels'")
        return data_io.load_idx(config.images, config.labels)
    if config.dataset == "container":
        if not (config.data and config.label_csv):
            raise ConfigError("container datasets need 'data' and 'label_csv'")
        return mda.LabeledDataset(
            data_io.load_container(config.data), data_io.load_labels_csv(config.label_csv)
        )
    return data_io.synth_gaussian_classes(config.synth)


@dataclass
class BenchmarkRow:
    method: str
    d: int
    seed: int
    recognition_rate: float
    wall_time_s: float
    iterations: int
    rho_star: float

    def as_csv(self):
        def num(x, fmt):
            return "nan" if x is None or not math.isfinite(x) else format(x, fmt)

        return [
            self.method,
            str(self.d),
            str(self.seed),
            num(self.recognition_rate, ".4f"),
            num(self.wall_time_s, ".2f"),
            str(self.iterations),
            num(self.rho_star, ".10g"),
        ]

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.recognition_rate)


@dataclass
class BenchmarkReport:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.rows:
            w.writerow(row.as_csv())
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "BenchmarkReport":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        rows = [
            BenchmarkRow(r[0], int(r[1]), int(r[2]), float(r[3]), float(r[4]), int(r[5]), float(r[6]))
            for r in reader
            if r
        ]
        return cls(rows)

    def summary(self) -> dict:
        """Mean recognition rate per ``(method, d)`` over seeds, ignoring failed rows."""
        groups = {}
        for r in self.rows:
            if not r.failed:
                groups.setdefault((r.method, r.d), []).append(r.recognition_rate)
        return {k: float(np.mean(v)) for k, v in groups.items()}


def fit(method: str, train: mda.LabeledDataset, d: int, opts: SolverOptions, denominator="st"):
    """Fit one method; returns ``(P, iterations, rho_star or None, converged)``."""
    if method == "mda_tr":
        sol = mda.mda_tr(train, d, opts, denominator=denominator)
        return sol.P, sol.iterations, sol.rho_star, sol.converged
    if method == "mda_rt":
        return mda.mda_rt(train, d, opts, denominator=denominator), 0, None, True
    if method == "mda_ls":
        return mda.mda_ls(train, d, opts.eps), 0, None, True
    raise ValueError(f"unknown method {method!r}")


def run_benchmark(config: BenchmarkConfig, dataset: mda.LabeledDataset | None = None, strict=False):
    """Run every ``(seed, method, d)`` combination and collect a report.

    Solver failures become rows of NaNs and the run continues, unless
    ``strict`` is set and a trace-ratio solve fails to converge, in which case
    :class:`NonConvergenceError` is raised after the report is complete.
    """
    if dataset is None:
        dataset = load_dataset(config)
    report = BenchmarkReport()
    nonconverged = []
    for seed in config.seeds:
        train, test = data_io.split(dataset, config.split_spec(seed))
        opts = config.solver_options(seed)
        if config.baseline:
            t0 = time.perf_counter()
            pred = knn1_classify(train.X, train.labels, test.X)
            dt = time.perf_counter() - t0 if config.record_timing else 0.0
            report.rows.append(
                BenchmarkRow("baseline", math.prod(train.feature_shape), seed,
                             recognition_rate(pred, test.labels), dt, 0, float("nan"))
            )
        S = None
        for method in config.methods:
            for d in config.dims:
                t0 = time.perf_counter()
                try:
                    P, iters, rho, ok = fit(method, train, int(d), opts, config.denominator)
                except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                    logger.warning("%s d=%d seed=%d failed: %s", method, d, seed, exc)
                    report.rows.append(BenchmarkRow(method, int(d), seed, float("nan"),
                                                    float("nan"), 0, float("nan")))
                    continue
                dt = time.perf_counter() - t0 if config.record_timing else 0.0
                if not ok:
                    nonconverged.append((method, d, seed))
                if rho is None:
                    if S is None:
                        S = mda.scatters(train)
                    B = trm.regularize(S.S_t if config.denominator == "st" else S.S_w, config.eps)
                    rho = trm.trace_ratio_objective(P, S.S_b, B)
                pred = knn1_classify(mda.project(train.X, P), train.labels, mda.project(test.X, P))
                report.rows.append(
                    BenchmarkRow(method, int(d), seed, recognition_rate(pred, test.labels),
                                 dt, iters, rho)
                )
    if config.out:
        report.write(config.out)
    if strict and nonconverged:
        raise NonConvergenceError(f"solver did not converge for {nonconverged}", report)
    return report


class NonConvergenceError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
