"""Plug-in standard errors, z-scores and confidence intervals.

For each dataset k and node j, the selected support of column j (plus the
node itself) defines a moment submatrix whose inverse yields a quadratic
form per observation; its second moment minus the squared estimate is the
asymptotic variance of sqrt(n_k) times the entry's estimation error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtri

from .errors import SingularSubmatrix, SupportTooLarge
from .model import empirical_moments

# variances below this are floored and the flooring is reported
_VARIANCE_FLOOR = 1e-12

_RCOND_MIN = 1e-10


def _support_with_node(est, k, j):
    col = est.matrices[k, :, j]
    support = np.flatnonzero(col != 0.0)
    if j not in support:
        support = np.sort(np.append(support, j))
    return support


def variance_estimate(collection, est, k, j, moments=None):
    """Asymptotic variances for the selected entries of column j, dataset k.

    Returns (support, variances, floored): the sorted selected indices
    (always containing j), the per-entry variance of
    sqrt(n_k) * (estimate - truth), and a boolean mask marking entries whose
    variance was floored at 1e-12.
    """
    if moments is None:
        moments = empirical_moments(collection)
    X = collection.datasets[k]
    n_k = X.shape[0]
    support = _support_with_node(est, k, j)
    m = support.size
    if m > n_k:
        raise SupportTooLarge(
            f"support of size {m} exceeds n={n_k} in dataset {k}"
        )
    sub = moments.second_moment[k][np.ix_(support, support)]
    w = np.linalg.eigvalsh(sub)
    if w[0] <= 0 or w[0] / w[-1] < _RCOND_MIN:
        raise SingularSubmatrix(
            f"moment submatrix for node {j}, dataset {k} is ill-conditioned"
        )
    inverse = cho_solve(cho_factor(sub, lower=True), np.eye(m))
    pos_j = int(np.searchsorted(support, j))
    projected = X[:, support] @ inverse  # row l = x_l^T Sigma_sub^{-1}
    forms = projected * projected[:, pos_j][:, None]  # (n_k, m)
    variances = (forms * forms).mean(axis=0) - est.matrices[k, support, j] ** 2
    floored = variances < _VARIANCE_FLOOR
    variances = np.maximum(variances, _VARIANCE_FLOOR)
    return support, variances, floored


@dataclass(frozen=True)
class InferenceEntry:
    dataset: int
    node: int
    index: int
    estimate: float
    std_error: float
    z: float
    ci_low: float
    ci_high: float
    floored: bool


@dataclass(frozen=True)
class InferenceResult:
    entries: list
    level: float
    floor_count: int


def z_scores(collection, est, level=0.95, null_value=0.0):
    """z-statistics and two-sided confidence intervals for selected entries.

    Covers every (dataset k, node j, index i in the selected support of
    column j including the diagonal).  z tests the entry against
    ``null_value``; intervals are estimate +/- q * sigma_hat / sqrt(n_k)
    with q the standard normal quantile for the two-sided level.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    q = float(ndtri(0.5 * (1.0 + level)))
    moments = empirical_moments(collection)
    entries = []
    floor_count = 0
    for k in range(collection.K):
        n_k = collection.n[k]
        for j in range(collection.p):
            support, variances, floored = variance_estimate(
                collection, est, k, j, moments=moments
            )
            ses = np.sqrt(variances / n_k)
            for i, se, flo in zip(support, ses, floored):
                value = float(est.matrices[k, i, j])
                entries.append(InferenceEntry(
                    dataset=k,
                    node=int(j),
                    index=int(i),
                    estimate=value,
                    std_error=float(se),
                    z=float((value - null_value) / se),
                    ci_low=float(value - q * se),
                    ci_high=float(value + q * se),
                    floored=bool(flo),
                ))
                floor_count += int(flo)
    return InferenceResult(entries=entries, level=level, floor_count=floor_count)
