"""File formats for the command-line surface.

All floating point values are written in decimal with 17 significant digits,
which round-trips IEEE doubles exactly.  Indices in files (datasets, nodes,
covariates, replications, classes) are 1-based; in-memory APIs are 0-based.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DimensionMismatch, InvalidSpec
from .model import DatasetCollection
from .simbench import ExperimentSpec
from .solver import SolverConfig


def fmt(x):
    """17-significant-digit decimal form of a float."""
    return format(float(x), ".17g")


def default_names(p):
    return [f"x{i + 1}" for i in range(p)]


# ---------------------------------------------------------------- matrices

def write_matrix_csv(path, matrix, names=None):
    matrix = np.asarray(matrix)
    names = names or default_names(matrix.shape[1])
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(names)
        for row in matrix:
            writer.writerow([fmt(v) for v in row])


def read_matrix_csv(path):
    # round_trip parsing: values written with fmt() come back bit-identical
    frame = pd.read_csv(path, header=0, dtype=np.float64,
                        float_precision="round_trip")
    return frame.to_numpy(), list(frame.columns)


def read_datasets(paths):
    """Read one CSV per dataset; headers must agree across datasets."""
    arrays, names = [], None
    for path in paths:
        data, cols = read_matrix_csv(path)
        if names is None:
            names = cols
        elif cols != names:
            raise DimensionMismatch(
                f"{path}: covariate names differ from {paths[0]}"
            )
        arrays.append(data)
    return DatasetCollection(arrays), names


def write_datasets(directory, collection, names=None, prefix="data"):
    directory = Path(directory)
    paths = []
    for k, d in enumerate(collection.datasets):
        path = directory / f"{prefix}_{k + 1}.csv"
        write_matrix_csv(path, d, names)
        paths.append(path)
    return paths


def write_precisions(directory, est, names=None, prefix="theta"):
    directory = Path(directory)
    paths = []
    for k in range(est.K):
        path = directory / f"{prefix}_{k + 1}.csv"
        write_matrix_csv(path, est.matrices[k], names)
        paths.append(path)
    return paths


def read_precisions(directory, prefix="theta"):
    from .model import JointPrecision

    directory = Path(directory)
    paths = sorted(
        directory.glob(f"{prefix}_*.csv"),
        key=lambda p: int(p.stem.split("_")[-1]),
    )
    if not paths:
        raise FileNotFoundError(f"no {prefix}_*.csv files in {directory}")
    matrices, names = [], None
    for path in paths:
        m, cols = read_matrix_csv(path)
        matrices.append(m)
        names = names or cols
    meta_path = directory / "trace.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return JointPrecision(
        np.stack(matrices), symmetrized=meta.get("symmetrized", True)
    ), names, meta


# ---------------------------------------------------------------- supports

def write_supports_json(path, summary, names=None):
    p = len(summary.union)
    names = names or default_names(p)
    nodes = []
    for j in range(p):
        nodes.append({
            "node": j + 1,
            "name": names[j],
            "per_dataset": [
                [int(i) + 1 for i in s] for s in summary.per_dataset[j]
            ],
            "union": [int(i) + 1 for i in summary.union[j]],
            "union_size": int(summary.union_sizes[j]),
            "total_size": int(summary.total_sizes[j]),
            "average_sharing": summary.average_sharing(j),
        })
    Path(path).write_text(json.dumps({"nodes": nodes}, indent=1))


# ------------------------------------------------------------------ config

def solver_config_to_dict(config, K=None):
    from .solver import default_s0_grid

    out = dataclasses.asdict(config)
    if out["s0_grid"] is None and K is not None:
        out["s0_grid"] = list(default_s0_grid(K))
    elif out["s0_grid"] is not None:
        out["s0_grid"] = list(out["s0_grid"])
    return out


def solver_config_from_dict(data):
    known = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = set(data) - known
    if unknown:
        raise InvalidSpec(f"unknown solver settings: {sorted(unknown)}")
    if "s0_grid" in data and data["s0_grid"] is not None:
        data = dict(data, s0_grid=tuple(data["s0_grid"]))
    return SolverConfig(**data)


def experiment_spec_from_dict(data):
    data = dict(data)
    solver = data.pop("solver", None)
    known = {f.name for f in dataclasses.fields(ExperimentSpec)}
    unknown = set(data) - known
    if unknown:
        raise InvalidSpec(f"unknown experiment settings: {sorted(unknown)}")
    if solver is not None:
        data["solver"] = solver_config_from_dict(solver)
    return ExperimentSpec(**data)


def experiment_spec_to_dict(spec):
    out = dataclasses.asdict(spec)
    out["solver"] = solver_config_to_dict(spec.solver, K=spec.K)
    return out


# ----------------------------------------------------------------- tracing

def node_trace_dict(node_trace):
    t = node_trace.trace
    return {
        "node": node_trace.node + 1,
        "s0": t.s0,
        "iterations": t.iterations,
        "stage_boundary": t.stage_boundary,
        "union_support": t.final_support_sizes[0],
        "total_support": t.final_support_sizes[1],
        "residual_sq_norm": t.residual_sq_norm,
        "lambda0": t.lambda0,
        "lambda_inf": t.lambda_inf,
        "lambda_fix": t.lambda_fix,
        "ic": t.ic,
    }


def write_trace_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=1))


# --------------------------------------------------------------- inference

def write_inference_csv(path, result):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([
            "dataset", "node", "index", "estimate", "std_error", "z",
            "ci_low", "ci_high", "floored",
        ])
        for e in result.entries:
            writer.writerow([
                e.dataset + 1, e.node + 1, e.index + 1,
                fmt(e.estimate), fmt(e.std_error), fmt(e.z),
                fmt(e.ci_low), fmt(e.ci_high), int(e.floored),
            ])


# --------------------------------------------------------------- benchmark

def write_results_csv(path, table):
    """One row per (replication, metric); MCCs on the x100 table scale."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["replication", "metric", "value"])
        for idx, report in enumerate(table.reports):
            for name, value in report.as_dict(tabular=True).items():
                writer.writerow([idx + 1, name, fmt(value)])


def write_summary_json(path, table):
    metrics = {
        name: stats
        for name, stats in table.summary(tabular=True).items()
        if name != "wall_time_s"
    }
    payload = {
        "spec": experiment_spec_to_dict(table.spec),
        "replications": len(table.reports),
        "metrics": metrics,
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def write_timing_json(path, table):
    """Wall-clock diagnostics; the one benchmark artifact that is not
    deterministic, kept apart so everything else can be compared bytewise."""
    Path(path).write_text(json.dumps({
        "per_replication_s": [float(t) for t in table.wall_times],
        "total_s": float(sum(table.wall_times)),
    }, indent=1))


# --------------------------------------------------------------- normality

def write_normality(directory, report):
    directory = Path(directory)
    entries = []
    for e in report.entries:
        name = f"z_dataset{e.dataset + 1}_row{e.row + 1}_col{e.col + 1}.txt"
        (directory / name).write_text(
            "".join(fmt(z) + "\n" for z in e.z_samples)
        )
        entries.append({
            "dataset": e.dataset + 1,
            "row": e.row + 1,
            "col": e.col + 1,
            "true_value": e.true_value,
            "samples": len(e.z_samples),
            "excluded": e.excluded,
            "mean_z": e.mean_z,
            "ks_stat": e.ks_stat,
            "file": name,
        })
    payload = {
        "spec": experiment_spec_to_dict(report.spec),
        "replications": report.replications,
        "entries": entries,
    }
    (directory / "normality.json").write_text(json.dumps(payload, indent=1))


# ------------------------------------------------------------ classification

def write_predictions_csv(path, true_labels, predicted_labels):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["row", "true_class", "predicted_class"])
        for idx, (t, p) in enumerate(zip(true_labels, predicted_labels)):
            writer.writerow([idx + 1, int(t) + 1, int(p) + 1])


def write_classification_report(path, report, extra=None):
    payload = {
        "accuracy": report.accuracy,
        "macro_tpr": report.macro_tpr,
        "macro_fpr": report.macro_fpr,
        "macro_mcc": report.macro_mcc,
        "per_class": report.per_class,
        "confusion": report.confusion.tolist(),
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=1))
