import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docdjinn import _pycore, kernels
from docdjinn.seed_selection import (
    ClusteringResult,
    EmbeddingMatrix,
    PCAReducer,
    SamplingConfig,
    cluster_probabilities,
    cluster_with_reassignment,
    draw_seed_batch,
    draw_seeds,
    final_score,
    knn_reassign,
    load_embeddings,
    normalized_entropy,
    rank_configurations,
    reduce,
    save_embeddings,
    select_configuration,
    silhouette,
    zscore_concat,
)


def brute_silhouette(points, labels):
    """Textbook definition, pure Python."""
    vals = []
    for i, p in enumerate(points):
        own = [math.dist(p, q) for j, q in enumerate(points) if j != i and labels[j] == labels[i]]
        if not own:
            vals.append(0.0)
            continue
        a = sum(own) / len(own)
        b = min(
            sum(math.dist(p, q) for j, q in enumerate(points) if labels[j] == c)
            / sum(1 for x in labels if x == c)
            for c in set(labels) if c != labels[i]
        )
        vals.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return sum(vals) / len(vals)


def emb(vectors, modality="layout", ids=None):
    vectors = np.asarray(vectors, dtype=float)
    ids = ids or [f"d{i}" for i in range(len(vectors))]
    return EmbeddingMatrix(tuple(ids), modality, vectors)


def blobs(n=20, sep=50.0, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(0, 0.5, (n, 2))
    b = rng.normal(0, 0.5, (n, 2)) + sep
    return np.vstack([a, b])


class FixedClusterer:
    def __init__(self, labels):
        self.labels = np.asarray(labels)

    def fit_predict(self, X, min_cluster_size):
        return self.labels


# --- embedding fusion -------------------------------------------------------

def test_zscore_identity_on_normalized_input():
    a = np.array([[-1.0, 1.0], [1.0, -1.0]])
    b = np.array([[1.0], [-1.0]])
    out = zscore_concat([emb(a), emb(b, "clip")])
    assert out.modality == "combined"
    np.testing.assert_allclose(out.vectors, np.hstack([a, b]))


def test_zscore_single_dimension():
    std = math.sqrt(2 / 3)
    expected = [(1 - 2) / std, 0.0, (3 - 2) / std]
    out = zscore_concat([emb([[1.0], [2.0], [3.0]])])
    np.testing.assert_allclose(out.vectors[:, 0], expected, atol=1e-12)
    np.testing.assert_allclose(out.vectors[:, 0], [-1.2247, 0.0, 1.2247], atol=1e-4)


def test_zscore_constant_dimension_is_zero():
    out = zscore_concat([emb([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])])
    assert np.all(out.vectors[:, 0] == 0)


def test_zscore_errors():
    with pytest.raises(ValueError):
        zscore_concat([emb([[1.0], [2.0]], ids=["a", "b"]), emb([[1.0], [2.0]], ids=["b", "a"])])
    with pytest.raises(ValueError):
        zscore_concat([emb([[1.0]])])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_zscore_idempotent(n, d, seed):
    x = np.random.default_rng(seed).normal(size=(n, d)) * 10 + 3
    once = zscore_concat([emb(x)])
    twice = zscore_concat([emb(once.vectors)])
    np.testing.assert_allclose(twice.vectors, once.vectors, atol=1e-9)


def test_embedding_matrix_invariants():
    with pytest.raises(ValueError):
        emb([[1.0, np.nan]])
    with pytest.raises(ValueError):
        EmbeddingMatrix(("a",), "layout", np.zeros((2, 3)))
    with pytest.raises(ValueError):
        EmbeddingMatrix(("a",), "audio", np.zeros((1, 3)))


def test_embedding_file_roundtrip(tmp_path):
    a = emb(np.arange(6.0).reshape(3, 2), "clip")
    b = emb(np.arange(9.0).reshape(3, 3), "sentence")
    path = tmp_path / "emb.jsonl"
    save_embeddings(path, [a, b])
    loaded = load_embeddings(path)
    assert set(loaded) == {"clip", "sentence"}
    np.testing.assert_array_equal(loaded["sentence"].vectors, b.vectors)
    assert loaded["clip"].doc_ids == a.doc_ids


# --- reduction ----------------------------------------------------------------

def test_reduce_pass_through():
    m = emb(np.random.default_rng(0).normal(size=(10, 50)))
    out = reduce(m, 100, seed=0)
    assert out.dim == 50 and out.modality == "reduced"
    np.testing.assert_array_equal(out.vectors, m.vectors)


def test_reduce_shape_and_determinism():
    m = emb(np.random.default_rng(1).normal(size=(500, 300)))
    r1 = reduce(m, 100, seed=7, reducer=PCAReducer())
    r2 = reduce(m, 100, seed=7, reducer=PCAReducer())
    assert r1.vectors.shape == (500, 100)
    np.testing.assert_array_equal(r1.vectors, r2.vectors)


def test_reduce_pads_when_fewer_rows_than_target():
    m = emb(np.random.default_rng(2).normal(size=(20, 300)))
    assert reduce(m, 100, reducer=PCAReducer()).dim == 100


def test_umap_reducer_deterministic():
    pytest.importorskip("umap")
    from docdjinn.seed_selection import UMAPReducer

    m = emb(np.random.default_rng(3).normal(size=(60, 20)))
    r1 = reduce(m, 5, seed=3, reducer=UMAPReducer())
    r2 = reduce(m, 5, seed=3, reducer=UMAPReducer())
    assert r1.vectors.shape == (60, 5)
    np.testing.assert_array_equal(r1.vectors, r2.vectors)


def test_reduce_empty():
    with pytest.raises(ValueError):
        reduce(EmbeddingMatrix((), "layout", np.zeros((0, 3))), 2)


# --- clustering -------------------------------------------------------------

def test_two_blobs_hdbscan():
    X = blobs()
    # brute-force separation check: every cross-blob distance exceeds every within-blob one
    within = max(math.dist(p, q) for blob in (X[:20], X[20:]) for p, q in itertools.combinations(blob, 2))
    across = min(math.dist(p, q) for p in X[:20] for q in X[20:])
    assert across > 10 * within
    res = cluster_with_reassignment(emb(X), kappa=5)
    assert res.k == 2
    assert sorted(res.sizes) == [20, 20]
    assert np.all(res.labels >= 0)
    assert res.silhouette > 0.9
    assert res.selectable


def test_outlier_reassigned_to_nearest_blob():
    X = np.vstack([blobs(), [[1.5, 1.5]]])
    labels = [0] * 20 + [1] * 20 + [-1]
    res = cluster_with_reassignment(emb(X), kappa=5, clusterer=FixedClusterer(labels))
    assert res.labels[-1] == 0
    assert res.pre_reassignment_noise[-1]
    assert res.sizes == [21, 20]


def test_all_noise_is_error():
    with pytest.raises(ValueError, match="no clusters"):
        cluster_with_reassignment(emb(blobs()), 5, clusterer=FixedClusterer([-1] * 40))


def test_single_cluster_not_selectable():
    res = cluster_with_reassignment(emb(blobs()), 5, clusterer=FixedClusterer([0] * 40))
    assert res.k == 1 and res.silhouette is None and not res.selectable
    assert res.norm_entropy == 0.0


def test_kappa_must_be_below_n():
    with pytest.raises(ValueError):
        cluster_with_reassignment(emb(blobs(n=2)), kappa=4)


def test_knn_tie_goes_to_smallest_cluster():
    X = np.array([[-1.0, 0], [1.0, 0], [0.0, 0]])
    out = knn_reassign(X, np.array([1, 0, -1]), k=2)
    assert out[2] == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_reassignment_keeps_labels(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 3))
    labels = rng.integers(-1, 3, size=30)
    labels[:3] = [0, 1, 2]
    out = knn_reassign(X, labels, k=5)
    keep = labels != -1
    assert np.array_equal(out[keep], labels[keep])
    assert np.all((out >= 0) & (out < 3))


def test_compacts_clusterer_ids():
    X = blobs()
    res = cluster_with_reassignment(emb(X), 5, clusterer=FixedClusterer([7] * 20 + [3] * 20))
    assert set(res.labels) == {0, 1}
    assert res.labels[0] == 1  # id 7 sorts after id 3


def test_clustering_json_roundtrip():
    res = cluster_with_reassignment(emb(blobs()), 5)
    back = ClusteringResult.from_json(json.loads(json.dumps(res.to_json())))
    assert back.sizes == res.sizes and np.array_equal(back.labels, res.labels)
    assert back.final_score == res.final_score


# --- silhouette ----------------------------------------------------------------

def test_silhouette_two_tight_blobs():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(0, 0.1, (10, 2)), rng.normal(0, 0.1, (10, 2)) + 20])
    labels = [0] * 10 + [1] * 10
    assert brute_silhouette(X.tolist(), labels) > 0.9
    assert silhouette(X, labels) > 0.9


def test_silhouette_unit_square():
    pts = [(0, 0), (0, 1), (1, 0), (1, 1)]
    labels = [0, 0, 1, 1]
    expected = brute_silhouette(pts, labels)
    assert expected == pytest.approx(3 - 2 * math.sqrt(2), abs=1e-12)
    assert silhouette(np.array(pts, float), labels) == pytest.approx(expected, abs=1e-12)


def test_silhouette_requires_two_clusters():
    with pytest.raises(ValueError):
        silhouette(np.zeros((3, 2)), [0, 0, 0])


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 25), st.integers(2, 4), st.integers(0, 2**31 - 1))
def test_silhouette_kernels_agree_with_oracle(n, k, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    labels = np.concatenate([np.arange(k), rng.integers(0, k, max(n - k, 0))])[:n]
    if len(set(labels.tolist())) < 2:
        return
    oracle = brute_silhouette(X.tolist(), labels.tolist())
    assert silhouette(X, labels) == pytest.approx(oracle, abs=1e-9)
    dense = np.unique(labels, return_inverse=True)[1]
    py = _pycore.silhouette_samples(X, dense, dense.max() + 1).mean()
    assert py == pytest.approx(oracle, abs=1e-9)


# --- scoring and ranking ------------------------------------------------------

@pytest.mark.parametrize("sizes,expected", [
    ([25, 25, 25, 25], 1.0),
    ([100], 0.0),
    ([10, 40], -(0.2 * math.log(0.2) + 0.8 * math.log(0.8)) / math.log(2)),
])
def test_normalized_entropy(sizes, expected):
    assert normalized_entropy(sizes) == pytest.approx(expected, abs=1e-12)


def test_normalized_entropy_rounded_value():
    assert round(normalized_entropy([10, 40]), 4) == 0.7219


def test_normalized_entropy_errors():
    with pytest.raises(ValueError):
        normalized_entropy([])


@pytest.mark.parametrize("s,h,expected", [(0.64, 0.94, 0.79), (0.64, 0.82, 0.73), (0.0, 0.0, 0.0)])
def test_final_score_table_rows(s, h, expected):
    assert round(final_score(s, h), 2) == pytest.approx(expected)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(0, 1)), min_size=1, max_size=20))
def test_final_score_argmax_matches_sum(pairs):
    means = [final_score(s, h) for s, h in pairs]
    sums = [s + h for s, h in pairs]
    assert max(means) * 2 == pytest.approx(max(sums))
    best = max(sums)
    assert any(abs(sums[i] - best) < 1e-12 for i in range(len(pairs)) if means[i] == max(means))


def test_rank_single_dataset():
    scores = {"ds": {("a", 5): 0.9, ("b", 5): 0.8, ("c", 5): 0.7}}
    r = rank_configurations(scores, 3)
    assert [(e.embedding, e.score) for e in r.entries] == [("a", 3), ("b", 2), ("c", 1)]


def test_rank_symmetric_datasets():
    scores = {"x": {("a", 5): 0.9, ("b", 5): 0.1}, "y": {("a", 5): 0.1, ("b", 5): 0.9}}
    r = rank_configurations(scores, 2)
    assert [e.score for e in r.entries] == [3, 3]


def test_rank_absent_config_gets_zero_there():
    scores = {"x": {("a", 5): 0.9, ("b", 10): 0.5}, "y": {("a", 5): 0.2}}
    r = {(e.embedding, e.kappa): e.score for e in rank_configurations(scores, 2).entries}
    assert r == {("a", 5): 4, ("b", 10): 1}


def test_rank_ties_break_by_name_then_kappa():
    scores = {"x": {("b", 5): 0.5, ("a", 10): 0.5, ("a", 5): 0.5}}
    r = rank_configurations(scores, 3)
    assert [(e.embedding, e.kappa, e.score) for e in r.entries] == [("a", 5, 3), ("a", 10, 2), ("b", 5, 1)]


def test_rank_invalid_n():
    with pytest.raises(ValueError):
        rank_configurations({}, 0)


def test_select_configuration_argmax_and_override():
    X = emb(blobs())
    good = cluster_with_reassignment(X, 5)
    bad = cluster_with_reassignment(X, 6, clusterer=FixedClusterer([0] * 40))
    assert select_configuration([bad, good]) is good
    assert select_configuration([bad, good], override=("layout", 6)) is bad


# --- sampling -----------------------------------------------------------------

def test_cluster_probabilities_examples():
    np.testing.assert_allclose(cluster_probabilities([10, 40], 1), [0.2, 0.8])
    np.testing.assert_allclose(cluster_probabilities([3, 50, 7], 0), [1 / 3] * 3)
    np.testing.assert_allclose(cluster_probabilities([10, 40], 0.5), [1 / 3, 2 / 3])


@settings(max_examples=60)
@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=30), st.floats(0, 5),
       st.integers(1, 50))
def test_cluster_probabilities_properties(sizes, alpha, scale):
    p = cluster_probabilities(sizes, alpha)
    assert abs(p.sum() - 1) < 1e-12
    np.testing.assert_allclose(cluster_probabilities([s * scale for s in sizes], alpha), p,
                               rtol=1e-9, atol=1e-15)
    if alpha > 0:
        order = np.argsort(sizes, kind="stable")
        assert np.all(np.diff(p[order]) >= -1e-15)


def make_clustering(sizes):
    labels = np.concatenate([[c] * n for c, n in enumerate(sizes)])
    ids = tuple(f"doc{i}" for i in range(len(labels)))
    return ClusteringResult(ids, labels, len(sizes), list(sizes), np.zeros(len(labels), bool),
                            None, normalized_entropy(sizes), None)


def test_ic_batch_is_single_cluster():
    cl = make_clustering([10, 40, 50])
    rng = np.random.default_rng(0)
    for _ in range(200):
        batch = draw_seed_batch(cl, SamplingConfig("IC", 1.0, 6), rng)
        assert len(set(batch.clusters)) == 1
        assert {cl.labels[cl.doc_ids.index(d)] for d in batch.doc_ids} == {batch.clusters[0]}


def test_ic_small_cluster_with_replacement():
    cl = make_clustering([3])
    batch = draw_seed_batch(cl, SamplingConfig("IC", 1.0, 6), np.random.default_rng(1))
    assert len(batch.doc_ids) == 6 and batch.with_replacement
    assert set(batch.doc_ids) <= set(cl.doc_ids)


def test_cc_single_cluster_fraction():
    cl = make_clustering([10, 10])
    rng = np.random.default_rng(5)
    trials = 10_000
    single = sum(len(set(draw_seed_batch(cl, SamplingConfig("CC", 0.0, 6), rng).clusters)) == 1
                 for _ in range(trials))
    expected = 2 * 0.5 ** 6
    sd = math.sqrt(expected * (1 - expected) / trials)
    assert abs(single / trials - expected) < 4 * sd


def test_draw_seeds_returns_valid_ids():
    cl = make_clustering([4, 5])
    ids = draw_seeds(cl, SamplingConfig("CC", 1.0, 10), np.random.default_rng(2))
    assert len(ids) == 10 and set(ids) <= set(cl.doc_ids)


def test_sampling_config_validation():
    with pytest.raises(ValueError):
        SamplingConfig("XX")
    with pytest.raises(ValueError):
        SamplingConfig("CC", float("inf"))
    with pytest.raises(ValueError):
        SamplingConfig("CC", 1.0, 0)
    assert SamplingConfig("ic").strategy == "IC"


def test_empirical_frequencies_chi_square():
    from scipy.stats import chisquare

    sizes = [10, 40, 50]
    cl = make_clustering(sizes)
    rng = np.random.default_rng(11)
    n = 100_000
    clusters = [draw_seed_batch(cl, SamplingConfig("IC", 0.75, 1), rng).clusters[0] for _ in range(n)]
    observed = np.bincount(clusters, minlength=3)
    expected = cluster_probabilities(sizes, 0.75) * n
    assert chisquare(observed, expected).pvalue > 0.001


def test_kernel_backends_agree_on_levenshtein():
    for a, b in [("kitten", "sitting"), ("", "abc"), ("flaw", "lawn"), ("ümlaut", "umlaut")]:
        assert kernels.levenshtein(a, b) == _pycore.levenshtein(a, b)


@pytest.mark.parametrize("pure,expected", [("1", "python"), ("", None)])
def test_backend_choice_at_import(pure, expected):
    import os
    import subprocess
    import sys
    env = {**os.environ, "DOCDJINN_PURE": pure}
    out = subprocess.run([sys.executable, "-c", "from docdjinn import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    import importlib.util
    built = importlib.util.find_spec("docdjinn._core") is not None
    assert out == (expected or ("cython" if built else "python"))
