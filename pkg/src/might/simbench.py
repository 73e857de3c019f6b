"""Synthetic data generation, recovery metrics, and the replication harness.

Truth generation plants a shared random graph, prunes it independently per
dataset, assigns symmetric edge weights bounded away from zero, and shifts
the diagonal so the smallest precision eigenvalue is exactly r.  The harness
runs generate / sample / estimate / score per replication with substreams
derived from (seed, replication, dataset, purpose), so results are
independent of scheduling and worker count.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import kstest
from threadpoolctl import threadpool_limits

from . import rng as streams
from .errors import InvalidSpec, MightError
from .estimator import estimate, symmetrize
from .inference import variance_estimate
from .model import DatasetCollection
from .solver import SolverConfig


@dataclass(frozen=True)
class ExperimentSpec:
    """Settings of one synthetic experiment cell."""

    p: int
    K: int
    n_per_dataset: int
    rho: float  # per-dataset edge removal probability
    r: float  # smallest eigenvalue of every true precision matrix
    edge_prob: float = 0.1
    replications: int = 1
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    symmetrized: bool = True  # score the symmetrized estimate

    def __post_init__(self):
        if self.p < 2:
            raise InvalidSpec("p must be at least 2")
        if self.K < 1:
            raise InvalidSpec("K must be at least 1")
        if self.n_per_dataset < 2:
            raise InvalidSpec("n_per_dataset must be at least 2")
        if not 0.0 <= self.rho < 1.0:
            raise InvalidSpec("rho must lie in [0, 1)")
        if self.r <= 0:
            raise InvalidSpec("r must be positive")
        if not 0.0 < self.edge_prob < 1.0:
            raise InvalidSpec("edge_prob must lie strictly between 0 and 1")
        if self.replications < 1:
            raise InvalidSpec("replications must be at least 1")
        if self.seed < 0:
            raise InvalidSpec("seed must be non-negative")


@dataclass(frozen=True)
class GroundTruth:
    """Planted precision matrices and their sampling factors."""

    precisions: np.ndarray  # (K, p, p)
    cholesky: np.ndarray  # (K, p, p) lower factors of the covariances
    base_edges: tuple  # upper-triangle (i, j) pairs of the shared graph
    realized_union_sparsity: int  # largest union neighbor set size
    realized_sharing: float  # largest per-node average sharing ratio

    @property
    def K(self):
        return self.precisions.shape[0]

    @property
    def p(self):
        return self.precisions.shape[1]

    def edge_set(self, k):
        """Upper-triangle (i, j) pairs present in dataset k's graph."""
        m = self.precisions[k]
        iu, ju = np.triu_indices(self.p, k=1)
        nz = m[iu, ju] != 0.0
        return tuple(zip(iu[nz].tolist(), ju[nz].tolist()))


def generate_truth(spec, replication=0):
    """Plant one ground truth for the given replication index."""
    p, K = spec.p, spec.K
    iu, ju = np.triu_indices(p, k=1)
    base_rng = streams.substream(spec.seed, replication, 0, streams.BASE_GRAPH)
    base_mask = base_rng.random(iu.size) < spec.edge_prob
    base_i, base_j = iu[base_mask], ju[base_mask]
    n_base = base_i.size

    precisions = np.empty((K, p, p))
    factors = np.empty((K, p, p))
    for k in range(K):
        prune_rng = streams.substream(spec.seed, replication, k, streams.PRUNE)
        keep = prune_rng.random(n_base) >= spec.rho
        value_rng = streams.substream(
            spec.seed, replication, k, streams.EDGE_VALUES
        )
        n_kept = int(keep.sum())
        magnitudes = value_rng.uniform(0.5, 1.0, n_kept)
        signs = np.where(value_rng.random(n_kept) < 0.5, -1.0, 1.0)
        omega = np.zeros((p, p))
        ki, kj = base_i[keep], base_j[keep]
        omega[ki, kj] = signs * magnitudes
        omega[kj, ki] = omega[ki, kj]
        smallest = float(np.linalg.eigvalsh(omega)[0])
        theta = omega + (spec.r + abs(smallest)) * np.eye(p)
        precisions[k] = theta
        covariance = np.linalg.inv(theta)
        factors[k] = np.linalg.cholesky((covariance + covariance.T) / 2.0)

    union_sizes = np.zeros(p, dtype=np.int64)
    total_sizes = np.zeros(p, dtype=np.int64)
    offdiag = precisions != 0.0
    for j in range(p):
        col = offdiag[:, :, j].copy()
        col[:, j] = False
        union_sizes[j] = int(np.any(col, axis=0).sum())
        total_sizes[j] = int(col.sum())
    realized_s = int(union_sizes.max()) if p else 0
    connected = union_sizes > 0
    realized_s0 = float(
        (total_sizes[connected] / union_sizes[connected]).max()
    ) if connected.any() else 0.0
    return GroundTruth(
        precisions=precisions,
        cholesky=factors,
        base_edges=tuple(zip(base_i.tolist(), base_j.tolist())),
        realized_union_sparsity=realized_s,
        realized_sharing=realized_s0,
    )


def sample_data(truth, spec, replication=0):
    """Draw the replication's datasets from the planted covariances."""
    datasets = []
    for k in range(truth.K):
        rng = streams.substream(spec.seed, replication, k, streams.SAMPLE)
        g = rng.standard_normal((spec.n_per_dataset, truth.p))
        datasets.append(g @ truth.cholesky[k].T)
    return DatasetCollection(datasets)


def _mcc(tp, fp, tn, fn):
    tp, fp, tn, fn = float(tp), float(fp), float(tn), float(fn)
    denom = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    if denom == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / denom


@dataclass(frozen=True)
class MetricReport:
    """Recovery quality of one estimate against one truth.

    MCC values are on the raw [-1, 1] scale in memory; tabular outputs
    multiply them by 100.
    """

    frobenius: float
    max_l2: float
    mcc_edge: float
    mcc_ngbr: float

    def as_dict(self, tabular=False):
        scale = 100.0 if tabular else 1.0
        return {
            "frobenius": self.frobenius,
            "max_l2": self.max_l2,
            "mcc_edge": self.mcc_edge * scale,
            "mcc_ngbr": self.mcc_ngbr * scale,
        }


def metrics(est, truth, n=None):
    """Weighted errors and support-recovery MCCs.

    n gives per-dataset sample sizes for the n_k/N weights; None means equal
    weights.  Edge MCC pools the per-dataset upper-triangle confusion counts;
    neighborhood MCC scores the union graph.  An asymmetric estimate counts
    a pair as selected if either orientation is nonzero.
    """
    K, p = truth.K, truth.p
    hat = est.matrices
    if hat.shape != truth.precisions.shape:
        raise InvalidSpec("estimate and truth shapes differ")
    weights = np.full(K, 1.0 / K) if n is None else (
        np.asarray(n, dtype=np.float64) / float(np.sum(n))
    )
    diff = hat - truth.precisions
    frobenius = float(sum(
        weights[k] * np.linalg.norm(diff[k]) for k in range(K)
    ))
    column_sq = np.einsum("kij,kij->kj", diff, diff)
    max_l2 = float(np.max(weights @ column_sq))

    iu, ju = np.triu_indices(p, k=1)
    pred = (hat[:, iu, ju] != 0.0) | (hat[:, ju, iu] != 0.0)
    true = truth.precisions[:, iu, ju] != 0.0
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    tn = int(np.sum(~pred & ~true))
    mcc_edge = _mcc(tp, fp, tn, fn)

    pred_u = np.any(pred, axis=0)
    true_u = np.any(true, axis=0)
    mcc_ngbr = _mcc(
        int(np.sum(pred_u & true_u)),
        int(np.sum(pred_u & ~true_u)),
        int(np.sum(~pred_u & ~true_u)),
        int(np.sum(~pred_u & true_u)),
    )
    return MetricReport(frobenius, max_l2, mcc_edge, mcc_ngbr)


@dataclass(frozen=True)
class ReplicationTable:
    """Per-replication metric reports plus aggregate statistics."""

    spec: ExperimentSpec
    reports: list  # MetricReport per replication
    wall_times: list  # seconds per replication

    def summary(self, tabular=False):
        """Mean and standard error of each metric (se = sd / sqrt(R))."""
        rows = [r.as_dict(tabular=tabular) for r in self.reports]
        out = {}
        for name in ("frobenius", "max_l2", "mcc_edge", "mcc_ngbr"):
            vals = np.array([row[name] for row in rows])
            se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(
                vals
            ) > 1 else 0.0
            out[name] = {"mean": float(vals.mean()), "se": se}
        out["wall_time_s"] = {
            "mean": float(np.mean(self.wall_times)),
            "se": 0.0 if len(self.wall_times) < 2 else float(
                np.std(self.wall_times, ddof=1)
                / math.sqrt(len(self.wall_times))
            ),
        }
        return out


def _run_one_replication(spec, replication):
    with threadpool_limits(limits=1):
        start = time.perf_counter()
        try:
            truth = generate_truth(spec, replication)
            data = sample_data(truth, spec, replication)
            est, _ = estimate(data, config=spec.solver, workers=1)
            scored = symmetrize(est) if spec.symmetrized else est
            report = metrics(scored, truth, n=data.n)
        except MightError as err:
            err.replication = replication
            raise
        return report, time.perf_counter() - start


def run_experiment(spec, workers=1):
    """Run every replication of the spec; deterministic for any worker count."""
    reps = range(spec.replications)
    workers = max(1, int(workers))
    if workers == 1 or spec.replications == 1:
        results = [_run_one_replication(spec, r) for r in reps]
    else:
        results = Parallel(n_jobs=workers, backend="loky")(
            delayed(_run_one_replication)(spec, r) for r in reps
        )
    reports = [r for r, _ in results]
    times = [t for _, t in results]
    return ReplicationTable(spec=spec, reports=reports, wall_times=times)


@dataclass(frozen=True)
class EntryNormality:
    """Distributional diagnostics of one tracked precision entry."""

    dataset: int
    row: int
    col: int
    true_value: float
    z_samples: tuple
    excluded: int  # replications where the entry was not selected
    mean_z: float
    ks_stat: float


@dataclass(frozen=True)
class NormalityReport:
    spec: ExperimentSpec
    replications: int
    entries: list  # EntryNormality per tracked entry


def ks_against_normal(samples):
    """Kolmogorov distance between the samples and the standard normal."""
    return float(kstest(np.asarray(samples, dtype=np.float64), "norm").statistic)


def _normality_one(spec, truth, replication, entries):
    with threadpool_limits(limits=1):
        try:
            data = sample_data(truth, spec, replication)
            est, _ = estimate(data, config=spec.solver, workers=1)
        except MightError as err:
            err.replication = replication
            raise
        # Distributional theory covers the raw column-regression estimate;
        # minimum symmetrization takes the smaller of two noisy values and
        # would push every tracked entry systematically toward zero.
        out = []
        for k, i, j in entries:
            if est.matrices[k, i, j] == 0.0:
                out.append(None)
                continue
            support, variances, _ = variance_estimate(data, est, k, j)
            pos = int(np.searchsorted(support, i))
            sd = math.sqrt(variances[pos] / data.n[k])
            out.append(
                (est.matrices[k, i, j] - truth.precisions[k, i, j]) / sd
            )
        return out


def normality_study(spec, entries, replications=None, workers=1):
    """Track z-statistics of fixed true-support entries across replications.

    The truth is planted once from the spec seed; every requested
    (dataset, row, col) must be a nonzero off-diagonal entry of it.  Each
    replication resamples data, re-estimates, and records
    sqrt(n_k) * (estimate - truth) / sigma_hat for the entries that were
    selected; unselected replications are counted and excluded.
    """
    truth = generate_truth(spec, replication=0)
    entries = [(int(k), int(i), int(j)) for k, i, j in entries]
    for k, i, j in entries:
        if i == j or truth.precisions[k, i, j] == 0.0:
            raise InvalidSpec(
                f"entry ({k}, {i}, {j}) is not in the true support"
            )
    reps = int(replications or spec.replications)
    workers = max(1, int(workers))
    if workers == 1 or reps == 1:
        rows = [_normality_one(spec, truth, r, entries) for r in range(reps)]
    else:
        rows = Parallel(n_jobs=workers, backend="loky")(
            delayed(_normality_one)(spec, truth, r, entries)
            for r in range(reps)
        )
    results = []
    for pos, (k, i, j) in enumerate(entries):
        zs = tuple(row[pos] for row in rows if row[pos] is not None)
        excluded = reps - len(zs)
        mean_z = float(np.mean(zs)) if zs else math.nan
        ks = ks_against_normal(zs) if len(zs) >= 2 else math.nan
        results.append(EntryNormality(
            dataset=k, row=i, col=j,
            true_value=float(truth.precisions[k, i, j]),
            z_samples=zs, excluded=excluded, mean_z=mean_z, ks_stat=ks,
        ))
    return NormalityReport(spec=spec, replications=reps, entries=results)


def spec_with(spec, **overrides):
    """A copy of the spec with the given fields replaced."""
    return replace(spec, **overrides)
