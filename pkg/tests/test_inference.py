"""Tests for plug-in variances, z-scores, and confidence intervals."""

import math

import numpy as np
import pytest

from might.errors import SingularSubmatrix, SupportTooLarge
from might.inference import variance_estimate, z_scores
from might.model import DatasetCollection, JointPrecision


def literal_variance(X, est_col, support, j):
    # Straightforward re-implementation: invert the moment submatrix, form
    # each observation's quadratic terms with explicit loops, average.
    n = X.shape[0]
    m = len(support)
    sub = np.empty((m, m))
    for a, ia in enumerate(support):
        for b, ib in enumerate(support):
            sub[a, b] = float(X[:, ia] @ X[:, ib]) / n
    inv = np.linalg.inv(sub)
    pos_j = list(support).index(j)
    out = np.empty(m)
    for a in range(m):
        second = 0.0
        for row in range(n):
            x = X[row, support]
            form = float(inv[a] @ x) * float(inv[pos_j] @ x)
            second += form * form
        second /= n
        out[a] = second - est_col[a] ** 2
    return out


def diag_only_estimate(K, p, value=1.0):
    mats = np.zeros((K, p, p))
    mats[:, np.arange(p), np.arange(p)] = value
    return JointPrecision(mats, symmetrized=True)


def test_variance_matches_literal_formula():
    rng = np.random.default_rng(0)
    n, p = 40, 5
    coll = DatasetCollection([rng.normal(size=(n, p))])
    mats = np.zeros((1, p, p))
    mats[0, np.arange(p), np.arange(p)] = 1.0
    mats[0, 1, 3] = mats[0, 3, 1] = -0.4
    mats[0, 0, 3] = mats[0, 3, 0] = 0.2
    est = JointPrecision(mats, symmetrized=True)
    support, variances, floored = variance_estimate(coll, est, 0, 3)
    assert np.array_equal(support, [0, 1, 3])
    expect = literal_variance(
        coll.datasets[0], mats[0, support, 3], list(support), 3
    )
    assert np.allclose(variances, np.maximum(expect, 1e-12), rtol=1e-10)
    assert not floored.any()


def test_isolated_node_diagonal_variance_is_two():
    # For independent unit-variance Gaussians the asymptotic variance of
    # sqrt(n) * (diag estimate - 1) is 2; the plug-in should land close on a
    # large sample.
    rng = np.random.default_rng(1)
    n, p = 20_000, 4
    coll = DatasetCollection([rng.normal(size=(n, p))])
    est = diag_only_estimate(1, p)
    support, variances, _ = variance_estimate(coll, est, 0, 2)
    assert np.array_equal(support, [2])
    assert variances[0] == pytest.approx(2.0, abs=0.15)


def test_support_always_contains_the_node():
    rng = np.random.default_rng(2)
    coll = DatasetCollection([rng.normal(size=(30, 4))])
    mats = np.zeros((1, 4, 4))
    mats[0, np.arange(4), np.arange(4)] = 1.0
    mats[0, 0, 2] = 0.5  # column 2 has an off-diagonal but keep (2,2) zero
    mats[0, 2, 2] = 0.0
    est = JointPrecision(mats, symmetrized=False)
    support, _, _ = variance_estimate(coll, est, 0, 2)
    assert 2 in support and 0 in support


def test_oversized_support_raises():
    rng = np.random.default_rng(3)
    coll = DatasetCollection([rng.normal(size=(5, 10))])
    mats = np.zeros((1, 10, 10))
    mats[0, :, 7] = 0.3  # dense column: support 10 > n = 5
    with pytest.raises(SupportTooLarge):
        variance_estimate(coll, JointPrecision(mats, False), 0, 7)


def test_collinear_support_raises():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 4))
    X[:, 1] = X[:, 0]  # duplicated covariate in the selected support
    coll = DatasetCollection([X])
    mats = np.zeros((1, 4, 4))
    mats[0, np.arange(4), np.arange(4)] = 1.0
    mats[0, 0, 2] = mats[0, 1, 2] = 0.4
    with pytest.raises(SingularSubmatrix):
        variance_estimate(coll, JointPrecision(mats, False), 0, 2)


def test_z_scores_cover_selected_entries():
    rng = np.random.default_rng(5)
    K, n, p = 2, 200, 4
    coll = DatasetCollection([rng.normal(size=(n, p)) for _ in range(K)])
    mats = np.zeros((K, p, p))
    mats[:, np.arange(p), np.arange(p)] = 1.0
    mats[0, 0, 1] = mats[0, 1, 0] = 0.3
    est = JointPrecision(mats, symmetrized=True)
    result = z_scores(coll, est, level=0.95)
    # diagonal entries of every column in every dataset, plus the two
    # off-diagonal selections in dataset 0
    assert len(result.entries) == K * p + 2
    assert result.level == 0.95
    seen = {(e.dataset, e.index, e.node) for e in result.entries}
    assert (0, 0, 1) in seen and (0, 1, 0) in seen
    for e in result.entries:
        assert e.ci_low <= e.estimate <= e.ci_high
        assert e.std_error > 0
        assert e.z == pytest.approx(e.estimate / e.std_error, rel=1e-12)


def test_z_scores_null_value_shifts_z():
    rng = np.random.default_rng(6)
    coll = DatasetCollection([rng.normal(size=(100, 3))])
    est = diag_only_estimate(1, 3)
    base = z_scores(coll, est, null_value=0.0)
    shifted = z_scores(coll, est, null_value=1.0)
    for a, b in zip(base.entries, shifted.entries):
        assert a.std_error == b.std_error
        assert b.z == pytest.approx(
            (a.estimate - 1.0) / a.std_error, rel=1e-12
        )
        # intervals do not depend on the null
        assert a.ci_low == b.ci_low and a.ci_high == b.ci_high


def test_interval_width_matches_normal_quantile():
    rng = np.random.default_rng(7)
    coll = DatasetCollection([rng.normal(size=(150, 3))])
    est = diag_only_estimate(1, 3)
    narrow = z_scores(coll, est, level=0.90)
    wide = z_scores(coll, est, level=0.99)
    for a, b in zip(narrow.entries, wide.entries):
        assert (b.ci_high - b.ci_low) > (a.ci_high - a.ci_low)
        half = 0.5 * (a.ci_high - a.ci_low)
        assert half == pytest.approx(1.6448536269514722 * a.std_error,
                                     rel=1e-9)


def test_z_scores_rejects_bad_level():
    rng = np.random.default_rng(8)
    coll = DatasetCollection([rng.normal(size=(50, 3))])
    est = diag_only_estimate(1, 3)
    with pytest.raises(ValueError):
        z_scores(coll, est, level=1.0)
    with pytest.raises(ValueError):
        z_scores(coll, est, level=0.0)


def test_diagonal_only_floor_count_zero_on_sane_data():
    rng = np.random.default_rng(9)
    coll = DatasetCollection([rng.normal(size=(500, 4))])
    result = z_scores(coll, diag_only_estimate(1, 4))
    assert result.floor_count == 0
    assert all(not e.floored for e in result.entries)
