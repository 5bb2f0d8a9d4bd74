"""Input validation helpers shared by the estimator and metric surfaces."""

from __future__ import annotations

import numpy as np


def check_texts(X) -> list[str]:
    """Accept a list/array of strings; reject anything else."""
    if isinstance(X, str):
        raise ValueError("X must be a sequence of documents, not a single string")
    texts = list(X)
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise ValueError(f"X[{i}] is not a string (got {type(t).__name__})")
    return texts


def check_label_matrix(y, n_samples: int | None = None, n_labels: int | None = None) -> np.ndarray:
    """Validate a binary indicator matrix and return it as int64."""
    y = np.asarray(y)
    if y.ndim != 2:
        raise ValueError(f"y must be a 2-d binary indicator matrix, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("y must contain only 0/1 entries")
    if n_samples is not None and y.shape[0] != n_samples:
        raise ValueError(f"y has {y.shape[0]} rows but X has {n_samples} documents")
    if n_labels is not None and y.shape[1] != n_labels:
        raise ValueError(f"y has {y.shape[1]} columns but the code table has {n_labels} codes")
    return y.astype(np.int64)


def check_probability_matrix(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError(f"expected a 2-d score matrix, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain non-finite values")
    return scores
