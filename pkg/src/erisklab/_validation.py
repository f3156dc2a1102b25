"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np


def check_texts(X) -> list[str]:
    """Return X as a list of str; reject scalars and non-string items."""
    if isinstance(X, (str, bytes)):
        raise ValueError("expected an iterable of texts, got a single string")
    try:
        texts = list(X)
    except TypeError as exc:
        raise ValueError(f"expected an iterable of texts, got {type(X).__name__}") from exc
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise ValueError(f"item {i} is {type(t).__name__}, expected str")
    return texts


def check_binary_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n_samples:
        raise ValueError(f"y must be 1-d with {n_samples} entries, got shape {y.shape}")
    if y.dtype.kind in "OUS":
        y = np.array([{"positive": 1, "negative": 0}.get(v, v) for v in y])
    try:
        y = y.astype(int)
    except (TypeError, ValueError) as exc:
        raise ValueError("labels must be 0/1 or 'positive'/'negative'") from exc
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError(f"labels must be binary, got {sorted(set(np.unique(y)))}")
    return y


def check_probability(p: float, what: str = "score") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{what} {p} out of range [0, 1]")
    return p
