"""Hot kernels, dispatched to the compiled extension when it is importable.

Set ``DOCDJINN_PURE=1`` to force the pure-Python implementations.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pycore

if os.environ.get("DOCDJINN_PURE"):
    _impl = _pycore
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _pycore
        BACKEND = "python"


def levenshtein(a: str, b: str) -> int:
    """Unit-cost insert/delete/substitute distance."""
    return int(_impl.levenshtein(a, b))


def silhouette_samples(X: np.ndarray, labels: np.ndarray, n_clusters: int) -> np.ndarray:
    """Per-point silhouette values; singleton-cluster points get 0."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.intp)
    return np.asarray(_impl.silhouette_samples(X, labels, int(n_clusters)))
