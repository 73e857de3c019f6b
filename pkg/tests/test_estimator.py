"""Tests for the column-by-column driver, symmetrization, and supports."""

import numpy as np
import pytest

from might.errors import DegenerateCovariate, ExactFit
from might.estimator import estimate, support_sets, symmetrize
from might.model import DatasetCollection, JointPrecision
from might.solver import SolverConfig


def gaussian_collection(seed=0, K=2, n=60, p=8):
    rng = np.random.default_rng(seed)
    return DatasetCollection([rng.normal(size=(n, p)) for _ in range(K)])


def test_estimate_shapes_and_flags():
    coll = gaussian_collection()
    est, traces = estimate(coll)
    assert est.matrices.shape == (2, 8, 8)
    assert est.symmetrized is False
    assert len(traces) == 8
    assert [t.node for t in traces] == list(range(8))
    # diagonals are positive (inverse residual energy)
    for k in range(2):
        assert np.all(np.diag(est.matrices[k]) > 0)


def test_estimate_single_node_matches_full_run():
    # Columns are independent problems; estimating one node in isolation
    # reproduces the full run's column bitwise.
    coll = gaussian_collection(seed=1)
    full, _ = estimate(coll)
    for j in (0, 3, 7):
        part, traces = estimate(coll, nodes=[j])
        assert len(traces) == 1 and traces[0].node == j
        assert np.array_equal(part.matrices[:, :, j], full.matrices[:, :, j])
        # all other columns stay zero
        rest = np.delete(part.matrices, j, axis=2)
        assert np.all(rest == 0.0)


def test_estimate_workers_bitwise_identical():
    coll = gaussian_collection(seed=2, p=10)
    serial, traces_1 = estimate(coll, workers=1)
    parallel, traces_3 = estimate(coll, workers=3)
    assert np.array_equal(serial.matrices, parallel.matrices)
    assert [t.s0 for t in traces_1] == [t.s0 for t in traces_3]
    assert [t.trace.lambdas for t in traces_1] == [
        t.trace.lambdas for t in traces_3
    ]


def test_estimate_fixed_s0_skips_tuning():
    coll = gaussian_collection(seed=3, K=3)
    est, traces = estimate(coll, s0=2.0)
    assert all(t.s0 == 2.0 for t in traces)


def test_estimate_rejects_degenerate_column():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 5))
    X[:, 3] = 7.7  # zero variance
    with pytest.raises(DegenerateCovariate):
        estimate(DatasetCollection([X - X.mean(axis=0)]))


def test_estimate_tags_failing_node():
    # An exactly collinear node triggers ExactFit once the fixed stage has
    # run long enough to fit it to machine precision; the driver tags the
    # failing column on the error.
    rng = np.random.default_rng(5)
    X = rng.normal(size=(50, 4))
    X[:, 0] = 2.0 * X[:, 1] - X[:, 2]
    with pytest.raises(ExactFit) as info:
        estimate(DatasetCollection([X]), config=SolverConfig(c4=20.0))
    assert info.value.node == 0


def test_symmetrize_keeps_smaller_magnitude():
    mats = np.zeros((1, 3, 3))
    mats[0] = [[2.0, 0.5, 0.4], [-0.3, 3.0, 0.0], [-0.4, 0.9, 4.0]]
    sym = symmetrize(JointPrecision(mats, symmetrized=False))
    out = sym.matrices[0]
    assert sym.symmetrized is True
    assert np.array_equal(out, out.T)
    assert out[0, 1] == -0.3 and out[1, 0] == -0.3  # |-0.3| < |0.5|
    assert out[1, 2] == 0.0 and out[2, 1] == 0.0  # zero beats 0.9
    # exact magnitude tie keeps the upper-triangle value
    assert out[0, 2] == 0.4 and out[2, 0] == 0.4
    # diagonal untouched
    assert np.array_equal(np.diag(out), [2.0, 3.0, 4.0])


def test_symmetrize_never_grows_magnitudes():
    rng = np.random.default_rng(6)
    mats = rng.normal(size=(3, 6, 6)) * (rng.random((3, 6, 6)) < 0.5)
    sym = symmetrize(JointPrecision(mats, symmetrized=False))
    assert np.all(np.abs(sym.matrices) <= np.maximum(
        np.abs(mats), np.abs(np.transpose(mats, (0, 2, 1)))
    ) + 1e-15)
    for k in range(3):
        assert np.array_equal(sym.matrices[k], sym.matrices[k].T)
        pair_min = np.minimum(
            np.abs(mats[k]), np.abs(mats[k].T)
        )
        assert np.allclose(np.abs(sym.matrices[k]), pair_min, atol=1e-15)


def test_support_sets_summary():
    mats = np.zeros((2, 4, 4))
    mats[:, np.arange(4), np.arange(4)] = 1.0
    mats[0, 1, 0] = mats[0, 0, 1] = 0.5  # edge 0-1 in dataset 0 only
    mats[1, 2, 0] = mats[1, 0, 2] = -0.7  # edge 0-2 in dataset 1 only
    summary = support_sets(JointPrecision(mats, symmetrized=True))
    assert summary.per_dataset[0] == [(1,), (2,)]
    assert summary.union[0] == (1, 2)
    assert summary.union_sizes[0] == 2 and summary.total_sizes[0] == 2
    assert summary.average_sharing(0) == 1.0
    # node 3 is isolated
    assert summary.union[3] == ()
    assert summary.average_sharing(3) == 0.0
    # nodes 1 and 2 each see their single neighbor in one dataset
    assert summary.union[1] == (0,) and summary.union[2] == (0,)


def test_support_sets_counts_shared_edges_once_per_dataset():
    mats = np.zeros((3, 3, 3))
    mats[:, np.arange(3), np.arange(3)] = 1.0
    for k in range(3):
        mats[k, 0, 1] = mats[k, 1, 0] = 0.4  # shared by all three datasets
    summary = support_sets(JointPrecision(mats, symmetrized=True))
    assert summary.union_sizes[0] == 1
    assert summary.total_sizes[0] == 3
    assert summary.average_sharing(0) == 3.0
