"""FID and Layout-FID from externally computed feature vectors."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

EPS = 1e-6
IMAG_TOL = 1e-6


@dataclass(frozen=True)
class GaussianFit:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_gaussian(features) -> GaussianFit:
    """Sample mean and (N-1)-normalized covariance of an N x D feature matrix."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("need at least 2 feature rows")
    mean = X.mean(axis=0)
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    return GaussianFit(mean, (cov + cov.T) / 2)


def _sqrt_product(s1: np.ndarray, s2: np.ndarray) -> np.ndarray | None:
    root = linalg.sqrtm(s1 @ s2)
    if not np.all(np.isfinite(root)):
        return None
    if np.iscomplexobj(root):
        if np.abs(root.imag).max() > IMAG_TOL:
            return None
        root = root.real
    return root


def frechet_distance(g1: GaussianFit, g2: GaussianFit, eps: float = EPS) -> float:
    if g1.dim != g2.dim:
        raise ValueError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    diff = g1.mean - g2.mean
    root = _sqrt_product(g1.cov, g2.cov)
    if root is None:
        logger.warning("sqrtm failed; adding %g to covariance diagonals", eps)
        offset = np.eye(g1.dim) * eps
        root = _sqrt_product(g1.cov + offset, g2.cov + offset)
        if root is None:
            raise ArithmeticError("matrix square root did not converge after regularization")
    value = float(diff @ diff + np.trace(g1.cov) + np.trace(g2.cov) - 2.0 * np.trace(root))
    # roundoff can leave tiny negatives for identical fits
    return max(value, 0.0)


class EmbeddingClient(Protocol):
    def embed(self, documents: Sequence) -> np.ndarray:
        """One fixed-length vector per document."""


class ThumbnailEmbeddingClient:
    """Image-only features: a grayscale thumbnail, flattened.

    Deterministic stand-in for a learned encoder when only page rasters are
    available.
    """

    def __init__(self, size: int = 16):
        self.size = size

    def embed(self, documents: Sequence) -> np.ndarray:
        from PIL import Image

        rows = []
        for doc in documents:
            img = doc if isinstance(doc, Image.Image) else Image.open(doc)
            thumb = img.convert("L").resize((self.size, self.size), Image.Resampling.BILINEAR)
            rows.append(np.asarray(thumb, dtype=np.float64).ravel() / 255.0)
        return np.vstack(rows)


def fid_from_features(real, synth) -> float:
    return frechet_distance(fit_gaussian(real), fit_gaussian(synth))


def layout_fid(real_docs: Sequence, synth_docs: Sequence, client: EmbeddingClient) -> float:
    if len(real_docs) == 0 or len(synth_docs) == 0:
        raise ValueError("both document sets must be non-empty")
    return fid_from_features(client.embed(real_docs), client.embed(synth_docs))
