import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docdjinn.metrics import (
    GaussianFit,
    ThumbnailEmbeddingClient,
    fit_gaussian,
    frechet_distance,
    layout_fid,
)


def frechet_oracle(m1, c1, m2, c2):
    """Symmetric-root route: Tr sqrt(C1 C2) = sum sqrt(eig(C1^1/2 C2 C1^1/2))."""
    w, v = np.linalg.eigh(c1)
    r1 = v @ np.diag(np.sqrt(np.clip(w, 0, None))) @ v.T
    inner = np.linalg.eigvalsh(r1 @ c2 @ r1)
    tr = np.sqrt(np.clip(inner, 0, None)).sum()
    d = m1 - m2
    return float(d @ d + np.trace(c1) + np.trace(c2) - 2 * tr)


def g(mean, var):
    return GaussianFit(np.atleast_1d(np.asarray(mean, float)), np.atleast_2d(np.asarray(var, float)))


def test_fit_gaussian_examples():
    fit = fit_gaussian([[0.0], [2.0]])
    assert fit.mean[0] == 1.0 and fit.cov[0, 0] == 2.0
    fit = fit_gaussian([[1.0, 2.0], [1.0, 2.0]])
    assert np.all(fit.cov == 0)
    with pytest.raises(ValueError):
        fit_gaussian([[1.0, 2.0]])


def test_frechet_analytic_cases():
    assert frechet_distance(g(0, 1), g(0, 1)) == pytest.approx(0, abs=1e-9)
    assert frechet_distance(g(0, 1), g(1, 1)) == pytest.approx(1.0, abs=1e-9)
    assert 1 + 4 - 2 * np.sqrt(1 * 4) == 1.0
    assert frechet_distance(g(0, 1), g(0, 4)) == pytest.approx(1.0, abs=1e-9)


def test_frechet_dimension_mismatch():
    with pytest.raises(ValueError):
        frechet_distance(g([0, 0], np.eye(2)), g(0, 1))


def test_frechet_identical_fits_from_data():
    X = np.random.default_rng(0).normal(size=(200, 8))
    fit = fit_gaussian(X)
    assert frechet_distance(fit, fit) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_frechet_matches_oracle_and_symmetry(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d + 20, d))
    B = rng.normal(size=(d + 20, d)) * 1.5 + 0.3
    f1, f2 = fit_gaussian(A), fit_gaussian(B)
    expected = frechet_oracle(f1.mean, f1.cov, f2.mean, f2.cov)
    assert frechet_distance(f1, f2) == pytest.approx(expected, rel=1e-6, abs=1e-8)
    assert frechet_distance(f1, f2) == pytest.approx(frechet_distance(f2, f1), rel=1e-6)
    perm = rng.permutation(len(A))
    assert frechet_distance(fit_gaussian(A[perm]), f2) == pytest.approx(frechet_distance(f1, f2), rel=1e-9)


def test_singular_covariance_regularized():
    # fewer rows than dims: rank-deficient covariances
    rng = np.random.default_rng(3)
    f1 = fit_gaussian(rng.normal(size=(4, 10)))
    f2 = fit_gaussian(rng.normal(size=(4, 10)))
    assert frechet_distance(f1, f2) >= 0


class ArrayClient:
    def embed(self, docs):
        return np.asarray(docs, dtype=float)


def test_layout_fid_identity_and_shift():
    X = np.random.default_rng(1).normal(size=(300, 5))
    assert layout_fid(X, X, ArrayClient()) == pytest.approx(0, abs=1e-9)
    delta = 0.7
    # equal covariances, mean shift only: D * delta^2
    assert layout_fid(X, X + delta, ArrayClient()) == pytest.approx(5 * delta**2, abs=1e-8)
    with pytest.raises(ValueError):
        layout_fid([], X, ArrayClient())


def test_thumbnail_client_shape():
    from PIL import Image

    imgs = [Image.new("RGB", (40, 60), (i * 40, 0, 0)) for i in range(3)]
    feats = ThumbnailEmbeddingClient(8).embed(imgs)
    assert feats.shape == (3, 64)
