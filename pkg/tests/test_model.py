"""Tests for dataset containers, moments, scaling, and column recovery."""

import numpy as np
import pytest

from might.errors import (
    DegenerateCovariate,
    DimensionMismatch,
    ExactFit,
    TooFewObservations,
)
from might.model import (
    CoefficientStack,
    DatasetCollection,
    JointPrecision,
    build_node_problem,
    empirical_moments,
    recover_precision_column,
    validate,
)


def small_collection(seed=0, K=3, n=40, p=6):
    rng = np.random.default_rng(seed)
    return DatasetCollection([rng.normal(size=(n, p)) for _ in range(K)])


def test_collection_shapes_and_counts():
    coll = small_collection(K=2, n=30, p=5)
    assert coll.K == 2 and coll.p == 5
    assert coll.n == (30, 30) and coll.N == 60


def test_validate_rejects_mismatched_columns():
    rng = np.random.default_rng(1)
    coll = DatasetCollection([rng.normal(size=(20, 4)), rng.normal(size=(20, 5))])
    with pytest.raises(DimensionMismatch):
        validate(coll)


def test_validate_rejects_tiny_datasets():
    rng = np.random.default_rng(2)
    with pytest.raises(TooFewObservations):
        validate(DatasetCollection([rng.normal(size=(1, 4))]))


def test_collection_rejects_constant_column():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(25, 4))
    X[:, 2] = 1.3
    # Constant columns survive construction (uncentered second moments are
    # fine) but must be caught by moment validation.
    coll = DatasetCollection([X - X.mean(axis=0)])
    with pytest.raises(DegenerateCovariate) as info:
        empirical_moments(coll)
    assert info.value.column == 2


def test_moments_match_direct_formula():
    coll = small_collection(seed=4)
    mom = empirical_moments(coll)
    for k in range(coll.K):
        X = coll.datasets[k]
        direct = X.T @ X / X.shape[0]
        assert np.allclose(mom.second_moment[k], direct, atol=1e-12)
        assert np.allclose(mom.scale[k], np.diag(direct), atol=1e-12)


def test_centering_changes_moments():
    coll = small_collection(seed=5)
    centered = coll.centered()
    for k in range(coll.K):
        assert np.allclose(centered.datasets[k].mean(axis=0), 0.0, atol=1e-12)


def test_scaled_design_column_norms():
    coll = small_collection(seed=6, K=2, n=50, p=5)
    mom = empirical_moments(coll)
    c0 = 0.5
    prob = build_node_problem(coll, mom, 2, c0=c0)
    # Every rescaled design column has squared norm c0 * N.
    for k in range(prob.K):
        norms = np.sum(prob.blocks[k] ** 2, axis=0)
        assert np.allclose(norms, c0 * prob.N, rtol=1e-10)


def test_scaled_design_gram_has_c0_diagonal():
    coll = small_collection(seed=7, K=2, n=50, p=5)
    mom = empirical_moments(coll)
    prob = build_node_problem(coll, mom, 0, c0=0.5)
    gram, corr, energies = prob.solver_terms()
    for k in range(prob.K):
        assert np.allclose(np.diag(gram[k]), 0.5, rtol=1e-10)
        direct = prob.blocks[k].T @ prob.blocks[k] / prob.N
        assert np.allclose(gram[k], direct, atol=1e-12)
        direct_corr = prob.blocks[k].T @ prob.response_block(k) / prob.N
        assert np.allclose(corr[k], direct_corr, atol=1e-12)
        assert energies[k] == pytest.approx(
            float(prob.response_block(k) @ prob.response_block(k))
        )


def test_response_is_raw_node_column():
    coll = small_collection(seed=8, K=2, n=30, p=4)
    mom = empirical_moments(coll)
    prob = build_node_problem(coll, mom, 3)
    stacked = np.concatenate([d[:, 3] for d in coll.datasets])
    assert np.array_equal(prob.response, stacked)


def test_recovery_inverts_scaling_on_exact_model():
    # Build data from a known sparse regression, solve exactly, and check
    # that the recovered precision column matches the closed form.
    rng = np.random.default_rng(9)
    K, n, p = 2, 200, 5
    coll = DatasetCollection([rng.normal(size=(n, p)) for _ in range(K)])
    mom = empirical_moments(coll)
    c0 = 0.5
    prob = build_node_problem(coll, mom, 0, c0=c0)
    # Exact least squares per dataset on the full support.
    values = np.zeros((K, p - 1))
    for k in range(K):
        Z = prob.blocks[k]
        y = prob.response_block(k)
        values[k] = np.linalg.lstsq(Z, y, rcond=None)[0]
    beta = CoefficientStack(values, 0)
    diag, offdiag = recover_precision_column(prob, beta)
    for k in range(K):
        resid = prob.response_block(k) - prob.blocks[k] @ values[k]
        rss = float(resid @ resid)
        assert diag[k] == pytest.approx(coll.n[k] / rss, rel=1e-12)
        gam = mom.scale[k][np.arange(p) != 0]
        expect = -np.sqrt(c0 * prob.N / coll.n[k]) * diag[k] * values[k] / np.sqrt(gam)
        assert np.allclose(offdiag[k], expect, rtol=1e-12)


def test_recovery_flags_exact_fit():
    rng = np.random.default_rng(10)
    n, p = 30, 3
    X = rng.normal(size=(n, p))
    X[:, 0] = 0.5 * X[:, 1] - 2.0 * X[:, 2]  # node 0 exactly explained
    coll = DatasetCollection([X])
    mom = empirical_moments(coll)
    prob = build_node_problem(coll, mom, 0)
    values = np.linalg.lstsq(prob.blocks[0], prob.response_block(0), rcond=None)[0]
    with pytest.raises(ExactFit):
        recover_precision_column(prob, CoefficientStack(values[None, :], 0))


def test_joint_precision_neighbor_sets():
    mats = np.zeros((2, 4, 4))
    mats[0, 0, 1] = mats[0, 1, 0] = -0.5
    mats[1, 2, 1] = mats[1, 1, 2] = 0.7
    jp = JointPrecision(mats, symmetrized=True)
    assert np.array_equal(jp.neighbor_set(0, 1), [0])
    assert np.array_equal(jp.neighbor_set(1, 1), [2])
    assert jp.neighbor_set(0, 3).size == 0


def test_coefficient_stack_summaries():
    values = np.array([[1.0, 0.0, 2.0], [0.0, 0.0, -1.0]])
    stack = CoefficientStack(values, 0)
    assert stack.union_support_size() == 2
    assert stack.total_support_size() == 3
    assert np.allclose(stack.group_norms_sq(), [1.0, 0.0, 5.0])
