"""Quadratic discriminant classification on top of estimated precisions.

The discriminant of class k is log prior + half log-determinant minus half
the Mahalanobis form of the centered observation.  Log-determinants are
computed after flooring eigenvalues to ensure positive definiteness; the
quadratic form uses the estimate as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as streams
from .errors import DimensionMismatch, EmptyClassSplit, NonRepairableMatrix
from .model import DatasetCollection

# relative eigenvalue floor used only for the log-determinant
_EIG_FLOOR = 1e-6


@dataclass(frozen=True)
class QDAModel:
    priors: np.ndarray  # (K,)
    means: np.ndarray  # (K, p)
    precisions: np.ndarray  # (K, p, p), as estimated (not repaired)
    log_dets: np.ndarray  # (K,) after eigenvalue flooring
    floored: np.ndarray  # (K,) count of floored eigenvalues per class

    @property
    def K(self):
        return self.priors.size


def fit_qda(collection, est):
    """Combine class frequencies, class means and estimated precisions."""
    if est.p != collection.p or est.K != collection.K:
        raise DimensionMismatch("estimate and collection shapes differ")
    priors = np.array(collection.n, dtype=np.float64) / collection.N
    means = np.stack([d.mean(axis=0) for d in collection.datasets])
    K = collection.K
    log_dets = np.empty(K)
    floored = np.zeros(K, dtype=np.int64)
    for k in range(K):
        sym = (est.matrices[k] + est.matrices[k].T) / 2.0
        eigs = np.linalg.eigvalsh(sym)
        floor = _EIG_FLOOR * max(float(eigs[-1]), 1.0)
        repaired = np.maximum(eigs, floor)
        floored[k] = int(np.sum(eigs < floor))
        log_det = float(np.sum(np.log(repaired)))
        if not np.isfinite(log_det):
            raise NonRepairableMatrix(
                f"class {k} precision has no finite log-determinant"
            )
        log_dets[k] = log_det
    return QDAModel(
        priors=priors,
        means=means,
        precisions=np.array(est.matrices),
        log_dets=log_dets,
        floored=floored,
    )


def decision_scores(model, X):
    """Per-class discriminant values for each row of X; shape (n, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    scores = np.empty((n, model.K))
    for k in range(model.K):
        centered = X - model.means[k]
        quad = np.einsum(
            "ni,ij,nj->n", centered, model.precisions[k], centered
        )
        scores[:, k] = (
            np.log(model.priors[k]) + 0.5 * model.log_dets[k] - 0.5 * quad
        )
    return scores


def classify(model, x):
    """Class label(s) with the largest discriminant; ties go to the
    smallest label."""
    x = np.asarray(x, dtype=np.float64)
    scores = decision_scores(model, x)
    labels = np.argmax(scores, axis=1)
    return int(labels[0]) if x.ndim == 1 else labels


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    macro_tpr: float
    macro_fpr: float
    macro_mcc: float
    per_class: list  # dict per class with tpr / fpr / mcc
    confusion: np.ndarray  # (K, K), rows true, columns predicted


def _binary_mcc(tp, fp, tn, fn):
    denom = np.sqrt(
        float(tp + fp) * float(tp + fn) * float(tn + fp) * float(tn + fn)
    )
    if denom == 0.0:
        return 0.0
    return float((tp * tn - fp * fn) / denom)


def evaluate(model, test):
    """Score the model on a labeled collection (label = dataset index)."""
    if test.K != model.K:
        raise DimensionMismatch("test collection has the wrong class count")
    for k, d in enumerate(test.datasets):
        if d.shape[0] == 0:
            raise EmptyClassSplit(f"test class {k} has no rows")
    X = np.vstack(test.datasets)
    truth = np.concatenate([
        np.full(test.n[k], k, dtype=np.int64) for k in range(test.K)
    ])
    predicted = np.argmax(decision_scores(model, X), axis=1)

    K = model.K
    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)
    per_class = []
    for k in range(K):
        tp = int(confusion[k, k])
        fn = int(confusion[k].sum() - tp)
        fp = int(confusion[:, k].sum() - tp)
        tn = int(confusion.sum() - tp - fn - fp)
        per_class.append({
            "tpr": tp / (tp + fn) if tp + fn else 0.0,
            "fpr": fp / (fp + tn) if fp + tn else 0.0,
            "mcc": _binary_mcc(tp, fp, tn, fn),
        })
    return ClassificationReport(
        accuracy=float(np.mean(predicted == truth)),
        macro_tpr=float(np.mean([c["tpr"] for c in per_class])),
        macro_fpr=float(np.mean([c["fpr"] for c in per_class])),
        macro_mcc=float(np.mean([c["mcc"] for c in per_class])),
        per_class=per_class,
        confusion=confusion,
    )


def stratified_split(collection, fraction=0.8, seed=0, rounding="floor"):
    """Per-class train/test split with a seeded shuffle.

    ``rounding`` picks how fraction * n_k becomes the train count: "floor"
    (default) or "nearest".  Row order within each side preserves the
    original dataset order.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    if rounding not in ("floor", "nearest"):
        raise ValueError("rounding must be 'floor' or 'nearest'")
    train, test = [], []
    for k, d in enumerate(collection.datasets):
        n_k = d.shape[0]
        raw = fraction * n_k
        n_train = int(np.floor(raw + 0.5)) if rounding == "nearest" else int(
            np.floor(raw)
        )
        if n_train == 0 or n_train == n_k:
            raise EmptyClassSplit(
                f"class {k}: split leaves an empty side (n={n_k})"
            )
        perm = streams.substream(seed, 0, k, streams.SPLIT).permutation(n_k)
        train.append(d[np.sort(perm[:n_train])])
        test.append(d[np.sort(perm[n_train:])])
    return DatasetCollection(train), DatasetCollection(test)
