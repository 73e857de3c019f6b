"""Joint precision estimation driver.

Runs the node-wise multi-task solver over every column, maps coefficients
back to precision entries, and optionally reconciles the two estimates of
each off-diagonal pair by keeping the smaller-magnitude one.  Columns are
independent, so the node loop parallelizes across processes with results
that are bitwise identical for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .errors import MightError
from .model import (
    DatasetCollection,
    JointPrecision,
    _ScaledContext,
    empirical_moments,
    recover_precision_column,
    validate,
)
from .solver import SolveTrace, SolverConfig, solve, tune_s0


@dataclass(frozen=True)
class NodeTrace:
    """Chosen sharing level and solver diagnostics for one column."""

    node: int
    s0: float
    trace: SolveTrace


def _estimate_nodes(collection, config, nodes, s0):
    """Estimate the given columns; returns per-node (diag, offdiag, trace).

    BLAS pools are pinned to one thread so results do not depend on how many
    worker processes share the machine.
    """
    with threadpool_limits(limits=1):
        moments = empirical_moments(collection)
        context = _ScaledContext(collection, moments, config.c0)
        out = []
        for j in nodes:
            try:
                problem = context.build(j)
                if s0 is None:
                    best_s0, stack, trace = tune_s0(problem, config)
                else:
                    stack, trace = solve(problem, s0, config)
                    best_s0 = float(s0)
                diag, offdiag = recover_precision_column(problem, stack)
            except MightError as err:
                err.node = j
                raise
            out.append((j, diag, offdiag, NodeTrace(j, best_s0, trace)))
        return out


def estimate(collection, config=None, workers=1, s0=None, nodes=None):
    """Estimate all K precision matrices column by column.

    s0 None tunes the sharing level per node by information criterion; a
    number fixes it globally.  Returns (JointPrecision, list of NodeTrace)
    with the precision matrices unsymmetrized (see ``symmetrize``).
    ``nodes`` restricts estimation to a subset of columns, leaving the rest
    zero; it exists for diagnostics and testing.
    """
    config = config or SolverConfig()
    validate(collection)
    K, p = collection.K, collection.p
    all_nodes = list(range(p)) if nodes is None else sorted(set(nodes))
    workers = max(1, int(workers))

    if workers == 1 or len(all_nodes) == 1:
        results = _estimate_nodes(collection, config, all_nodes, s0)
    else:
        chunks = [
            c.tolist()
            for c in np.array_split(all_nodes, min(len(all_nodes), 4 * workers))
            if c.size
        ]
        parts = Parallel(n_jobs=workers, backend="loky")(
            delayed(_estimate_nodes)(collection, config, chunk, s0)
            for chunk in chunks
        )
        results = [item for part in parts for item in part]

    matrices = np.zeros((K, p, p))
    traces = []
    for j, diag, offdiag, node_trace in results:
        keep = np.arange(p) != j
        for k in range(K):
            matrices[k, j, j] = diag[k]
            matrices[k, keep, j] = offdiag[k]
        traces.append(node_trace)
    return JointPrecision(matrices, symmetrized=False), traces


def symmetrize(est):
    """Reconcile each off-diagonal pair by keeping the smaller magnitude.

    For i < j the value of entry (i, j) is kept when |(i, j)| <= |(j, i)|,
    otherwise the value of (j, i) is kept; the result is exactly symmetric
    and no entry grows in magnitude.
    """
    p = est.p
    out = np.array(est.matrices)
    iu, ju = np.triu_indices(p, k=1)
    upper = out[:, iu, ju]
    lower = out[:, ju, iu]
    chosen = np.where(np.abs(upper) <= np.abs(lower), upper, lower)
    out[:, iu, ju] = chosen
    out[:, ju, iu] = chosen
    return JointPrecision(out, symmetrized=True)


@dataclass(frozen=True)
class SupportSummary:
    """Neighbor sets per (node, dataset) plus per-node sharing statistics."""

    per_dataset: list  # [node][k] -> sorted tuple of neighbors
    union: list  # [node] -> sorted tuple of neighbors
    union_sizes: np.ndarray  # (p,) sizes of the union sets
    total_sizes: np.ndarray  # (p,) sums over datasets of set sizes

    def average_sharing(self, node):
        """Total neighbor count divided by union size; 0 for isolated nodes."""
        if self.union_sizes[node] == 0:
            return 0.0
        return float(self.total_sizes[node] / self.union_sizes[node])


def support_sets(est):
    """Extract neighbor sets from nonzero off-diagonal column patterns."""
    K, p = est.K, est.p
    per_dataset, union = [], []
    union_sizes = np.zeros(p, dtype=np.int64)
    total_sizes = np.zeros(p, dtype=np.int64)
    for j in range(p):
        sets_j = [tuple(est.neighbor_set(k, j).tolist()) for k in range(K)]
        merged = sorted(set().union(*[set(s) for s in sets_j]))
        per_dataset.append(sets_j)
        union.append(tuple(merged))
        union_sizes[j] = len(merged)
        total_sizes[j] = sum(len(s) for s in sets_j)
    return SupportSummary(per_dataset, union, union_sizes, total_sizes)
