"""Input validation helpers for the estimator layer.

Waveform collections are ragged (utterances have different lengths), so the
usual 2-D array checks don't apply; these helpers normalize list-of-array
inputs and enforce the waveform domain instead.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError


def check_waveform(x, name: str = "waveform") -> np.ndarray:
    """Coerce one waveform to a float64 1-D array in [-1, 1]."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DomainError(f"{name} must be a non-empty 1-D sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite samples")
    peak = np.max(np.abs(arr))
    if peak > 1.0:
        raise DomainError(f"{name} amplitude exceeds 1 (max {peak:.6g}); normalize before fitting")
    return arr


def check_waveform_list(X, name: str = "X") -> list[np.ndarray]:
    """Coerce a collection of waveforms; a 2-D array is taken row-wise."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        X = list(X)
    try:
        items = list(X)
    except TypeError:
        raise DomainError(f"{name} must be an iterable of 1-D waveforms") from None
    if not items:
        raise DomainError(f"{name} is empty")
    return [check_waveform(x, f"{name}[{i}]") for i, x in enumerate(items)]


def check_labels(y, n: int) -> np.ndarray:
    """Integer speaker labels 0..K-1 aligned with the waveform list."""
    labels = np.asarray(y)
    if labels.shape != (n,):
        raise DomainError(f"y has shape {labels.shape}, expected ({n},)")
    if not np.issubdtype(labels.dtype, np.integer):
        if np.any(labels != labels.astype(int)):
            raise DomainError("y must hold integer speaker labels")
        labels = labels.astype(int)
    if labels.min() < 0:
        raise DomainError("speaker labels must be non-negative")
    return labels.astype(int)
