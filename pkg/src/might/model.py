"""Core data types and the node-wise regression reformulation.

A collection of K datasets over the same p covariates is reduced, one column
at a time, to a multi-task regression: column j of each dataset is regressed
on the remaining columns, with each dataset's design rescaled so that every
design column has squared norm c0 * N.  Estimated regression coefficients are
mapped back to column j of each dataset's precision matrix.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateCovariate,
    DimensionMismatch,
    ExactFit,
    NonFinite,
    TooFewObservations,
)

# covariate scales below this are treated as degenerate rather than clamped
_SCALE_FLOOR = 1e-12

# a residual this small relative to the response means an (essentially) exact
# fit; the residual-based diagonal estimate would be meaningless
_EXACT_FIT_RTOL = 1e-12


class Moments(NamedTuple):
    """Per-dataset uncentered second moments and their diagonals."""

    second_moment: list  # K matrices (p, p), (1/n_k) X^T X
    scale: list  # K vectors (p,), diagonals of the above


def _freeze(a):
    a.flags.writeable = False
    return a


class DatasetCollection:
    """K datasets over a shared covariate set; rows are observations.

    Arrays are copied to float64 and frozen: all types in this package are
    immutable after construction and safe to share across workers.
    """

    def __init__(self, datasets):
        if len(datasets) == 0:
            raise DimensionMismatch("at least one dataset is required")
        self.datasets = [
            _freeze(np.ascontiguousarray(np.asarray(d, dtype=np.float64)))
            for d in datasets
        ]
        for d in self.datasets:
            if d.ndim != 2:
                raise DimensionMismatch("each dataset must be a 2-d array")
        self.K = len(self.datasets)
        self.p = self.datasets[0].shape[1]
        self.n = tuple(int(d.shape[0]) for d in self.datasets)
        self.N = int(sum(self.n))

    def centered(self):
        """A new collection with per-dataset column means subtracted."""
        return DatasetCollection([d - d.mean(axis=0) for d in self.datasets])

    def __repr__(self):
        return f"DatasetCollection(K={self.K}, p={self.p}, n={self.n})"


def validate(collection):
    """Check structural soundness of a collection; raise on violation.

    Verifies a shared covariate count of at least two, at least two rows per
    dataset, finite values, and a strictly positive sample variance for every
    covariate in every dataset.
    """
    p = collection.p
    if p < 2:
        raise DimensionMismatch("at least two covariates are required")
    for k, d in enumerate(collection.datasets):
        if d.shape[1] != p:
            raise DimensionMismatch(
                f"dataset {k} has {d.shape[1]} columns, expected {p}"
            )
        if d.shape[0] < 2:
            raise TooFewObservations(f"dataset {k} has fewer than two rows")
        if not np.isfinite(d).all():
            raise NonFinite(f"dataset {k} contains non-finite values")
        variances = d.var(axis=0)
        degenerate = np.flatnonzero(variances <= 0.0)
        if degenerate.size:
            raise DegenerateCovariate(k, int(degenerate[0]))


def empirical_moments(collection):
    """Uncentered second-moment matrices (1/n_k) X^T X and their diagonals."""
    second, scale = [], []
    for k, d in enumerate(collection.datasets):
        s = _freeze((d.T @ d) / d.shape[0])
        g = np.ascontiguousarray(np.diag(s))
        small = np.flatnonzero(g < _SCALE_FLOOR)
        if small.size:
            raise DegenerateCovariate(k, int(small[0]))
        second.append(s)
        scale.append(_freeze(g))
    return Moments(second, scale)


class CoefficientStack:
    """K coefficient vectors of length p-1 for one node's multi-task problem.

    Stored as a (K, p-1) array; row k is dataset k's coefficient vector over
    the covariates other than the node, in ascending covariate order.
    """

    __slots__ = ("values", "node")

    def __init__(self, values, node):
        self.values = _freeze(np.asarray(values, dtype=np.float64))
        self.node = int(node)

    @property
    def K(self):
        return self.values.shape[0]

    def group_norms_sq(self):
        """Per-position sums over datasets of squared coefficients."""
        return np.einsum("ki,ki->i", self.values, self.values)

    def support(self, k):
        """Nonzero positions of dataset k's vector (0-based, node removed)."""
        return np.flatnonzero(self.values[k])

    def union_support(self):
        return np.flatnonzero(np.any(self.values != 0.0, axis=0))

    def union_support_size(self):
        return int(np.count_nonzero(np.any(self.values != 0.0, axis=0)))

    def total_support_size(self):
        return int(np.count_nonzero(self.values))

    @classmethod
    def zeros(cls, K, p_minus_1, node):
        return cls(np.zeros((K, p_minus_1)), node)


class ScaledDesign:
    """One node's multi-task regression problem.

    blocks[k] is dataset k's rescaled design over the other covariates, with
    every column's squared norm equal to c0 * N; the response is the raw
    (unscaled) node column of every dataset, stacked in dataset order.
    """

    def __init__(self, blocks, response, scale_factors, c0, node,
                 gram=None, corr=None):
        self.blocks = [
            _freeze(np.ascontiguousarray(b, dtype=np.float64)) for b in blocks
        ]
        self.response = _freeze(np.ascontiguousarray(response, dtype=np.float64))
        self.scale_factors = [
            _freeze(np.ascontiguousarray(g, dtype=np.float64))
            for g in scale_factors
        ]
        self.c0 = float(c0)
        self.node = int(node)
        self.K = len(self.blocks)
        self.n = tuple(int(b.shape[0]) for b in self.blocks)
        self.N = int(sum(self.n))
        self._offsets = np.concatenate([[0], np.cumsum(self.n)])
        self._gram = gram  # (K, p-1, p-1), (1/N) Z_k^T Z_k
        self._corr = corr  # (K, p-1), (1/N) Z_k^T y_k

    @property
    def width(self):
        """Number of free coefficients per dataset (p - 1)."""
        return self.blocks[0].shape[1]

    def response_block(self, k):
        return self.response[self._offsets[k]:self._offsets[k + 1]]

    def solver_terms(self):
        """Gram matrices, correlations and response energies for iteration.

        Returns (G, b, e) with G[k] = (1/N) Z_k^T Z_k, b[k] = (1/N) Z_k^T y_k
        and e[k] = ||y_k||^2.  Computed once and cached.
        """
        if self._corr is None:
            self._corr = _freeze(np.stack([
                self.blocks[k].T @ self.response_block(k) / self.N
                for k in range(self.K)
            ]))
        if self._gram is None:
            self._gram = _freeze(np.stack([
                self.blocks[k].T @ self.blocks[k] / self.N
                for k in range(self.K)
            ]))
        energies = np.array([
            float(self.response_block(k) @ self.response_block(k))
            for k in range(self.K)
        ])
        return self._gram, self._corr, energies

    def residual_block(self, k, beta):
        """y_k - Z_k beta_k, computed directly from the stored block."""
        return self.response_block(k) - self.blocks[k] @ beta.values[k]

    def residual_sq_norms(self, beta):
        """Per-dataset squared residual norms, computed from the blocks."""
        return np.array([
            float(np.sum(self.residual_block(k, beta) ** 2))
            for k in range(self.K)
        ])


class _ScaledContext:
    """Shared per-collection scaling, reused across all node problems.

    Holds the fully rescaled design of every dataset plus its normalized Gram
    matrix, so that each node problem is a cheap column slice.  Building the
    same context twice from the same inputs is bitwise reproducible, hence a
    single-node problem built in isolation matches the full run exactly.
    """

    def __init__(self, collection, moments, c0):
        if c0 <= 0 or not math.isfinite(c0):
            raise DimensionMismatch("c0 must be a positive finite number")
        self.collection = collection
        self.moments = moments
        self.c0 = float(c0)
        N = collection.N
        self.inv_sqrt_scale = [1.0 / np.sqrt(g) for g in moments.scale]
        self.scaled = [
            math.sqrt(c0 * N / n_k) * (d * isg[None, :])
            for d, isg, n_k in zip(
                collection.datasets, self.inv_sqrt_scale, collection.n
            )
        ]
        # (1/N) Z^T Z for the full covariate set equals c0 times the
        # scale-normalized second moment; node problems slice it
        self.norm_gram = [
            c0 * (s * np.outer(isg, isg))
            for s, isg in zip(moments.second_moment, self.inv_sqrt_scale)
        ]

    def build(self, node):
        ds = self.collection
        if not 0 <= node < ds.p:
            raise DimensionMismatch(f"node {node} out of range for p={ds.p}")
        keep = np.arange(ds.p) != node
        blocks = [z[:, keep] for z in self.scaled]
        response = np.concatenate([d[:, node] for d in ds.datasets])
        gram = np.stack([g[np.ix_(keep, keep)] for g in self.norm_gram])
        corr = np.stack([
            blocks[k].T @ ds.datasets[k][:, node] / ds.N
            for k in range(ds.K)
        ])
        return ScaledDesign(
            blocks, response, self.moments.scale, self.c0, node,
            gram=_freeze(gram), corr=_freeze(corr),
        )


def build_node_problem(collection, moments, node, c0=1.0):
    """Build the rescaled multi-task regression problem for one column."""
    return _ScaledContext(collection, moments, c0).build(node)


def recover_precision_column(problem, beta):
    """Map a coefficient stack back to column `node` of each precision matrix.

    Returns (diag, offdiag): diag[k] is the node's diagonal entry for dataset
    k, estimated from the residual energy; offdiag[k] is the length p-1 vector
    of off-diagonal entries, whose support equals the support of beta[k].
    """
    node = problem.node
    c0N = problem.c0 * problem.N
    diag = np.empty(problem.K)
    offdiag = np.empty((problem.K, problem.width))
    keep = np.arange(problem.width + 1) != node
    for k in range(problem.K):
        resid = problem.residual_block(k, beta)
        rss = float(resid @ resid)
        y = problem.response_block(k)
        if math.sqrt(rss) < _EXACT_FIT_RTOL * math.sqrt(float(y @ y)):
            raise ExactFit(k)
        diag[k] = problem.n[k] / rss
        inv_sqrt_gamma = 1.0 / np.sqrt(problem.scale_factors[k][keep])
        factor = -math.sqrt(c0N / problem.n[k]) * diag[k]
        offdiag[k] = factor * (inv_sqrt_gamma * beta.values[k])
    if not (np.isfinite(diag).all() and np.isfinite(offdiag).all()):
        raise NonFinite("recovered precision column contains non-finite values")
    return diag, offdiag


class JointPrecision:
    """K estimated precision matrices and whether they were symmetrized."""

    def __init__(self, matrices, symmetrized):
        self.matrices = _freeze(np.asarray(matrices, dtype=np.float64))
        if self.matrices.ndim != 3 or (
            self.matrices.shape[1] != self.matrices.shape[2]
        ):
            raise DimensionMismatch("matrices must be a (K, p, p) array")
        self.symmetrized = bool(symmetrized)

    @property
    def K(self):
        return self.matrices.shape[0]

    @property
    def p(self):
        return self.matrices.shape[1]

    def neighbor_set(self, k, node):
        """Nonzero off-diagonal positions of column `node` in dataset k."""
        col = self.matrices[k, :, node]
        nz = np.flatnonzero(col != 0.0)
        return nz[nz != node]
