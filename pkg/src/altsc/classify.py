"""Small classifiers for transformed features: k-NN, two-class Fisher LDA, accuracy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def _as_train(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y).reshape(-1)
    if X.shape[0] == 0:
        raise ValidationError("empty training set")
    if X.shape[0] != y.shape[0]:
        raise ValidationError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all(np.isfinite(X)):
        raise ValidationError("training features must be finite")
    return X, y


def knn_predict(X, y, query, k_neighbors=1):
    """Majority label among the ``k_neighbors`` nearest rows (Euclidean).

    Distance ties go to the lower row index. Vote ties go to the tied class
    whose nearest member is closest, then to the smaller label.
    """
    X, y = _as_train(X, y)
    if not 1 <= k_neighbors <= X.shape[0]:
        raise ValidationError(f"k must lie in 1..{X.shape[0]}, got {k_neighbors}")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != X.shape[1]:
        raise ValidationError(f"query has {q.shape[0]} features, training has {X.shape[1]}")
    d = np.sqrt(np.sum((X - q) ** 2, axis=1))
    nearest = np.lexsort((np.arange(X.shape[0]), d))[:k_neighbors]
    votes, first = {}, {}
    for rank, i in enumerate(nearest):
        lab = y[i]
        votes[lab] = votes.get(lab, 0) + 1
        first.setdefault(lab, rank)
    top = max(votes.values())
    tied = [lab for lab, v in votes.items() if v == top]
    return min(tied, key=lambda lab: (first[lab], lab))


class KNN:
    def __init__(self, k=1):
        self.k = k

    def fit(self, X, y):
        self.X, self.y = _as_train(X, y)
        return self

    def predict(self, Q):
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim == 1:
            Q = Q[:, None] if self.X.shape[1] == 1 else Q[None, :]
        return np.array([knn_predict(self.X, self.y, q, self.k) for q in Q])


@dataclass(frozen=True)
class LinearDiscriminant:
    """Fisher rule: class ``high`` iff ``w @ x > b``, else class ``low`` (ties included)."""

    w: np.ndarray
    b: float
    low: object
    high: object

    def decision(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None] if self.w.shape[0] == 1 else X[None, :]
        return X @ self.w - self.b

    def predict(self, X):
        s = self.decision(X)
        return np.where(s > 0, self.high, self.low)


def lda_fit(X, y, classes=None) -> LinearDiscriminant:
    """Two-class Fisher discriminant with a tiny ridge on the pooled covariance.

    ``w = (S + eps*I)^-1 (mu_high - mu_low)`` with ``eps = 1e-9 * trace(S) / dim``
    and ``b = w @ (mu_low + mu_high) / 2``. ``classes`` fixes ``(low, high)``;
    by default the two labels in sorted order.
    """
    X, y = _as_train(X, y)
    if classes is None:
        classes = sorted(set(y.tolist()))
        if len(classes) != 2:
            raise ValidationError(f"LDA needs exactly 2 classes, got {len(classes)}")
    low, high = classes
    X1, X2 = X[y == low], X[y == high]
    if len(X1) == 0 or len(X2) == 0:
        raise ValidationError("both classes must be present in the training set")
    mu1, mu2 = X1.mean(axis=0), X2.mean(axis=0)
    d1, d2 = X1 - mu1, X2 - mu2
    dof = max(X.shape[0] - 2, 1)
    S = (d1.T @ d1 + d2.T @ d2) / dof
    dim = X.shape[1]
    eps = 1e-9 * np.trace(S) / dim
    reg = S + eps * np.eye(dim)
    diff = mu2 - mu1
    try:
        w = np.linalg.solve(reg, diff)
    except np.linalg.LinAlgError:
        # zero scatter: fall back to the nearest-mean direction
        w = diff.copy()
    b = float(w @ (mu1 + mu2) / 2.0)
    return LinearDiscriminant(w, b, low, high)


@dataclass(frozen=True)
class Evaluation:
    accuracy: float
    confusion: np.ndarray
    labels: tuple

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "labels": [str(x) for x in self.labels],
            "confusion": self.confusion.tolist(),
        }

    def format(self) -> str:
        labs = [str(x) for x in self.labels]
        width = max([len(s) for s in labs] + [5])
        lines = [f"accuracy: {self.accuracy:.4f}", "confusion (rows = truth, cols = predicted):"]
        lines.append(" " * (width + 1) + " ".join(s.rjust(width) for s in labs))
        for lab, row in zip(labs, self.confusion):
            lines.append(lab.rjust(width) + " " + " ".join(str(v).rjust(width) for v in row))
        return "\n".join(lines)


def evaluate(predictions, truth, labels=None) -> Evaluation:
    pred = list(np.asarray(predictions).reshape(-1).tolist())
    true = list(np.asarray(truth).reshape(-1).tolist())
    if len(pred) != len(true):
        raise ValidationError(f"{len(pred)} predictions for {len(true)} truths")
    if labels is None:
        labels = sorted(set(true) | set(pred), key=lambda v: (str(type(v)), v))
    index = {lab: i for i, lab in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(true, pred):
        cm[index[t], index[p]] += 1
    acc = float(np.trace(cm)) / len(true) if true else 0.0
    return Evaluation(acc, cm, tuple(labels))
