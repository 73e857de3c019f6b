"""Command-line surface.

Commands: estimate, simulate, benchmark, normality, infer, classify.
Exit codes: 0 on success, 2 on bad user input (files, flags, shapes,
degenerate data), 3 on numerical failure during computation.
The default worker count comes from the MIGHT_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, fileio
from .errors import (
    DegenerateCovariate,
    DimensionMismatch,
    EmptyClassSplit,
    InvalidSpec,
    MightError,
    TooFewObservations,
)
from .estimator import estimate, support_sets, symmetrize
from .inference import z_scores
from .model import DatasetCollection, JointPrecision
from .qda import evaluate, fit_qda, stratified_split
from .simbench import (
    generate_truth,
    normality_study,
    run_experiment,
    sample_data,
)
from .solver import SolverConfig

_USER_ERRORS = (
    DimensionMismatch,
    TooFewObservations,
    DegenerateCovariate,
    InvalidSpec,
    EmptyClassSplit,
    FileNotFoundError,
    IsADirectoryError,
    NotADirectoryError,
    PermissionError,
    json.JSONDecodeError,
    ValueError,
)


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("MIGHT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidSpec(f"MIGHT_THREADS is not an integer: {env!r}")
    return 1


def _solver_config(args):
    data = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise InvalidSpec("solver config must be a JSON object")
    return fileio.solver_config_from_dict(data)


def _load_spec(path_or_name):
    path = Path(path_or_name)
    if path.exists():
        text = path.read_text()
    else:
        name = path_or_name if path_or_name.endswith(".json") else (
            path_or_name + ".json"
        )
        bundled = resources.files("might").joinpath("specs", name)
        if not bundled.is_file():
            raise FileNotFoundError(
                f"spec {path_or_name!r} is neither a file nor a bundled spec"
            )
        text = bundled.read_text()
    return fileio.experiment_spec_from_dict(json.loads(text))


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- estimate

def _cmd_estimate(args):
    threads = _threads(args)
    config = _solver_config(args)
    collection, names = fileio.read_datasets(args.data)
    centered = not args.no_center
    fit_on = collection.centered() if centered else collection
    start = time.perf_counter()
    est, traces = estimate(
        fit_on, config=config, workers=threads, s0=args.s0
    )
    if not args.no_symmetrize:
        est = symmetrize(est)
    elapsed = time.perf_counter() - start
    out = _out_dir(args)
    fileio.write_precisions(out, est, names)
    fileio.write_supports_json(out / "supports.json", support_sets(est), names)
    fileio.write_trace_json(out / "trace.json", {
        "version": __version__,
        "command": "estimate",
        "centered": centered,
        "symmetrized": est.symmetrized,
        "s0": args.s0 if args.s0 is not None else "per-node",
        "solver": fileio.solver_config_to_dict(config, K=collection.K),
        "data": {
            "files": [str(f) for f in args.data],
            "K": collection.K,
            "p": collection.p,
            "n": list(collection.n),
        },
        "nodes": [fileio.node_trace_dict(t) for t in traces],
    })
    print(
        f"estimated K={collection.K} precision matrices (p={collection.p}) "
        f"in {elapsed:.2f}s -> {out}"
    )
    return 0


# ---------------------------------------------------------------- simulate

def _cmd_simulate(args):
    spec = _load_spec(args.spec)
    replication = args.replication - 1
    if replication < 0:
        raise InvalidSpec("--replication is 1-based")
    truth = generate_truth(spec, replication)
    data = sample_data(truth, spec, replication)
    out = _out_dir(args)
    names = fileio.default_names(spec.p)
    for k in range(spec.K):
        fileio.write_matrix_csv(
            out / f"truth_theta_{k + 1}.csv", truth.precisions[k], names
        )
    fileio.write_datasets(out, data, names)
    (out / "truth.json").write_text(json.dumps({
        "spec": fileio.experiment_spec_to_dict(spec),
        "replication": args.replication,
        "base_edges": [[i + 1, j + 1] for i, j in truth.base_edges],
        "edges_per_dataset": [
            [[i + 1, j + 1] for i, j in truth.edge_set(k)]
            for k in range(spec.K)
        ],
        "realized_union_sparsity": truth.realized_union_sparsity,
        "realized_sharing": truth.realized_sharing,
    }, indent=1))
    print(f"wrote truth and {spec.K} datasets -> {out}")
    return 0


# --------------------------------------------------------------- benchmark

def _cmd_benchmark(args):
    spec = _load_spec(args.spec)
    if args.replications is not None:
        spec = fileio.experiment_spec_from_dict(
            dict(fileio.experiment_spec_to_dict(spec),
                 replications=args.replications)
        )
    if args.seed is not None:
        spec = fileio.experiment_spec_from_dict(
            dict(fileio.experiment_spec_to_dict(spec), seed=args.seed)
        )
    table = run_experiment(spec, workers=_threads(args))
    out = _out_dir(args)
    fileio.write_results_csv(out / "results.csv", table)
    fileio.write_summary_json(out / "summary.json", table)
    fileio.write_timing_json(out / "timing.json", table)
    summary = table.summary(tabular=True)
    line = ", ".join(
        f"{name}={summary[name]['mean']:.3f}"
        for name in ("frobenius", "max_l2", "mcc_edge", "mcc_ngbr")
    )
    print(f"{spec.replications} replications: {line} -> {out}")
    return 0


# --------------------------------------------------------------- normality

def _cmd_normality(args):
    spec = _load_spec(args.spec)
    entries = []
    for raw in args.entry:
        parts = raw.split(",")
        if len(parts) != 3:
            raise InvalidSpec(f"--entry must be dataset,row,col: {raw!r}")
        k, i, j = (int(x) for x in parts)
        entries.append((k - 1, i - 1, j - 1))
    report = normality_study(
        spec, entries, replications=args.replications,
        workers=_threads(args),
    )
    out = _out_dir(args)
    fileio.write_normality(out, report)
    for e in report.entries:
        print(
            f"entry ({e.dataset + 1},{e.row + 1},{e.col + 1}): "
            f"{len(e.z_samples)} z-samples, {e.excluded} excluded, "
            f"mean_z={e.mean_z:.3f}, ks={e.ks_stat:.3f}"
        )
    return 0


# ------------------------------------------------------------------- infer

def _cmd_infer(args):
    est, _, meta = fileio.read_precisions(args.estimate)
    collection, _ = fileio.read_datasets(args.data)
    if args.center == "auto":
        centered = bool(meta.get("centered", True))
    else:
        centered = args.center == "yes"
    if centered:
        collection = collection.centered()
    result = z_scores(collection, est, level=args.level, null_value=args.null)
    out = Path(args.out)
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    fileio.write_inference_csv(out, result)
    print(
        f"{len(result.entries)} selected entries at level {args.level} "
        f"({result.floor_count} variance floors) -> {out}"
    )
    return 0


# ---------------------------------------------------------------- classify

def _split_collections(args):
    if args.train or args.test:
        if not (args.train and args.test):
            raise InvalidSpec("--train and --test must be given together")
        if len(args.train) != len(args.test):
            raise InvalidSpec("--train and --test need one file per class")
        train, names = fileio.read_datasets(args.train)
        test, test_names = fileio.read_datasets(args.test)
        if test_names != names:
            raise DimensionMismatch("train and test covariate names differ")
        return train, test, names
    if not args.data:
        raise InvalidSpec("give either --data files or --train/--test files")
    full, names = fileio.read_datasets(args.data)
    train, test = stratified_split(
        full, fraction=args.split, seed=args.seed, rounding=args.rounding
    )
    return train, test, names


def _cmd_classify(args):
    threads = _threads(args)
    train, test, names = _split_collections(args)
    if args.estimate:
        est, _, _ = fileio.read_precisions(args.estimate)
        if est.K != train.K or est.p != train.p:
            raise DimensionMismatch(
                "estimate directory does not match the class data"
            )
    else:
        config = _solver_config(args)
        fit_on = train if args.no_center else train.centered()
        est, _ = estimate(fit_on, config=config, workers=threads, s0=args.s0)
        if not args.no_symmetrize:
            est = symmetrize(est)
    model = fit_qda(train, est)
    report = evaluate(model, test)
    truth = np.concatenate([
        np.full(test.n[k], k, dtype=np.int64) for k in range(test.K)
    ])
    from .qda import decision_scores

    predicted = np.argmax(decision_scores(model, np.vstack(test.datasets)),
                          axis=1)
    out = _out_dir(args)
    fileio.write_predictions_csv(out / "predictions.csv", truth, predicted)
    fileio.write_classification_report(out / "report.json", report, extra={
        "classes": train.K,
        "train_sizes": list(train.n),
        "test_sizes": list(test.n),
        "priors": [float(x) for x in model.priors],
        "log_det_floored_eigenvalues": [int(x) for x in model.floored],
        "estimate_source": args.estimate or "refit on train data",
    })
    print(
        f"accuracy={report.accuracy:.3f} macro_mcc={report.macro_mcc:.3f} "
        f"-> {out}"
    )
    return 0


# ------------------------------------------------------------------ parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="might",
        description=(
            "Joint sparse estimation of multiple Gaussian graphical models "
            "by node-wise multi-task iterative hard thresholding."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_threads(p):
        p.add_argument(
            "--threads", type=int, default=None,
            help="worker processes (default: MIGHT_THREADS or 1)",
        )

    p_est = sub.add_parser(
        "estimate", help="estimate precision matrices from dataset CSVs"
    )
    p_est.add_argument("--data", action="append", required=True,
                       help="dataset CSV, repeat once per dataset")
    p_est.add_argument("--out", required=True, help="output directory")
    p_est.add_argument("--config", help="solver config JSON")
    p_est.add_argument("--s0", type=float, default=None,
                       help="fix the sharing level instead of tuning per node")
    p_est.add_argument("--no-center", action="store_true",
                       help="skip per-dataset column centering")
    p_est.add_argument("--no-symmetrize", action="store_true",
                       help="write the raw column-wise estimate")
    add_threads(p_est)
    p_est.set_defaults(func=_cmd_estimate)

    p_sim = sub.add_parser(
        "simulate", help="write one replication's truth and datasets"
    )
    p_sim.add_argument("--spec", required=True,
                       help="experiment spec JSON (path or bundled name)")
    p_sim.add_argument("--replication", type=int, default=1,
                       help="1-based replication index (default 1)")
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=_cmd_simulate)

    p_bench = sub.add_parser(
        "benchmark", help="run a replicated synthetic experiment"
    )
    p_bench.add_argument("--spec", required=True,
                         help="experiment spec JSON (path or bundled name)")
    p_bench.add_argument("--replications", type=int, default=None,
                         help="override the spec's replication count")
    p_bench.add_argument("--seed", type=int, default=None,
                         help="override the spec's seed")
    p_bench.add_argument("--out", required=True)
    add_threads(p_bench)
    p_bench.set_defaults(func=_cmd_benchmark)

    p_norm = sub.add_parser(
        "normality", help="track z-statistics of fixed true-support entries"
    )
    p_norm.add_argument("--spec", required=True)
    p_norm.add_argument("--entry", action="append", required=True,
                        help="dataset,row,col (1-based), repeatable")
    p_norm.add_argument("--replications", type=int, default=None)
    p_norm.add_argument("--out", required=True)
    add_threads(p_norm)
    p_norm.set_defaults(func=_cmd_normality)

    p_inf = sub.add_parser(
        "infer", help="z-scores and confidence intervals for selected entries"
    )
    p_inf.add_argument("--data", action="append", required=True)
    p_inf.add_argument("--estimate", required=True,
                       help="directory written by the estimate command")
    p_inf.add_argument("--level", type=float, default=0.95)
    p_inf.add_argument("--null", type=float, default=0.0,
                       help="null value the z statistic tests against")
    p_inf.add_argument("--center", choices=("auto", "yes", "no"),
                       default="auto",
                       help="center data before inference (auto: follow the "
                            "estimate's trace)")
    p_inf.add_argument("--out", default="inference.csv")
    p_inf.set_defaults(func=_cmd_infer)

    p_cls = sub.add_parser(
        "classify", help="quadratic discriminant classification per class"
    )
    p_cls.add_argument("--data", action="append",
                       help="one CSV per class; split with --split/--seed")
    p_cls.add_argument("--train", action="append",
                       help="one train CSV per class")
    p_cls.add_argument("--test", action="append",
                       help="one test CSV per class")
    p_cls.add_argument("--split", type=float, default=0.8,
                       help="train fraction for --data mode (default 0.8)")
    p_cls.add_argument("--seed", type=int, default=0,
                       help="shuffle seed for --data mode")
    p_cls.add_argument("--rounding", choices=("floor", "nearest"),
                       default="floor", help="train-count rounding mode")
    p_cls.add_argument("--estimate",
                       help="reuse a fitted estimate directory instead of "
                            "refitting on the train split")
    p_cls.add_argument("--config", help="solver config JSON for refitting")
    p_cls.add_argument("--s0", type=float, default=None)
    p_cls.add_argument("--no-center", action="store_true",
                       help="skip per-class centering before refitting")
    p_cls.add_argument("--no-symmetrize", action="store_true")
    p_cls.add_argument("--out", required=True)
    add_threads(p_cls)
    p_cls.set_defaults(func=_cmd_classify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except MightError as err:
        where = ""
        if getattr(err, "node", None) is not None:
            where = f" (node {err.node + 1})"
        if getattr(err, "replication", None) is not None:
            where += f" (replication {err.replication + 1})"
        print(
            f"numerical failure{where}: {type(err).__name__}: {err}",
            file=sys.stderr,
        )
        return 3


if __name__ == "__main__":
    sys.exit(main())
