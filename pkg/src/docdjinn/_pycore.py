"""Pure-Python/numpy versions of the compiled kernels in ``_core.pyx``."""

from __future__ import annotations

import numpy as np


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j - 1] + (ca != cb), prev[j] + 1, cur[j - 1] + 1))
        prev = cur
    return prev[-1]


def silhouette_samples(X: np.ndarray, labels: np.ndarray, n_clusters: int,
                       chunk: int = 512) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    n = X.shape[0]
    sizes = np.bincount(labels, minlength=n_clusters).astype(np.float64)
    onehot = np.zeros((n, n_clusters))
    onehot[np.arange(n), labels] = 1.0
    sq = np.einsum("ij,ij->i", X, X)
    out = np.zeros(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * X[start:stop] @ X.T
        dist = np.sqrt(np.maximum(d2, 0.0))
        dist[np.arange(stop - start), np.arange(start, stop)] = 0.0
        sums = dist @ onehot
        own = labels[start:stop]
        rows = np.arange(stop - start)
        own_size = sizes[own]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = sums[rows, own] / (own_size - 1)
            means = sums / sizes[None, :]
        means[rows, own] = np.inf
        means[:, sizes == 0] = np.inf
        b = means.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(denom > 0, (b - a) / denom, 0.0)
        s[own_size <= 1] = 0.0
        s[~np.isfinite(b)] = 0.0
        out[start:stop] = s
    return out
