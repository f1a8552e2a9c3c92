"""Seed document selection: embedding fusion, clustering, scoring and sampling.

Reducer and clusterer backends are injected; the defaults wrap UMAP (when
``umap-learn`` is installed, otherwise PCA) and scikit-learn's HDBSCAN.
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .kernels import silhouette_samples

logger = logging.getLogger(__name__)

MODALITIES = ("layout", "clip", "sentence", "pooled", "combined", "reduced")
NOISE = -1


@dataclass(frozen=True)
class EmbeddingMatrix:
    doc_ids: tuple[str, ...]
    modality: str
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D matrix")
        if vectors.shape[0] != len(self.doc_ids):
            raise ValueError(f"{vectors.shape[0]} rows for {len(self.doc_ids)} doc ids")
        if vectors.shape[0] and vectors.shape[1] < 1:
            raise ValueError("embedding dimension must be >= 1")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("non-finite values in embedding matrix")
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        object.__setattr__(self, "doc_ids", tuple(self.doc_ids))
        object.__setattr__(self, "vectors", vectors)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def load_embeddings(path: str | Path, modality: str | None = None) -> dict[str, EmbeddingMatrix]:
    """Read a JSONL embedding file (``doc_id``, ``modality``, ``vector`` per line).

    Returns one matrix per modality, rows in first-seen order.
    """
    rows: dict[str, dict[str, list[float]]] = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if modality is not None and rec["modality"] != modality:
                continue
            if rec["doc_id"] in rows[rec["modality"]]:
                raise ValueError(f"line {lineno}: duplicate {rec['modality']} vector for {rec['doc_id']}")
            rows[rec["modality"]][rec["doc_id"]] = rec["vector"]
    return {
        mod: EmbeddingMatrix(tuple(vecs), mod, np.array(list(vecs.values()), dtype=np.float64))
        for mod, vecs in rows.items()
    }


def save_embeddings(path: str | Path, matrices: Iterable[EmbeddingMatrix]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in matrices:
            for doc_id, vec in zip(m.doc_ids, m.vectors):
                fh.write(json.dumps({"doc_id": doc_id, "modality": m.modality,
                                     "vector": [float(v) for v in vec]}) + "\n")


def zscore_concat(modalities: Sequence[EmbeddingMatrix]) -> EmbeddingMatrix:
    """Standardize every column (population std) and concatenate modalities."""
    if not modalities:
        raise ValueError("no modalities given")
    doc_ids = modalities[0].doc_ids
    for m in modalities[1:]:
        if m.doc_ids != doc_ids:
            raise ValueError(f"doc_ids of {m.modality!r} do not match {modalities[0].modality!r}")
    if len(doc_ids) < 2:
        raise ValueError("z-scoring needs at least 2 documents")
    blocks = []
    for m in modalities:
        mean = m.vectors.mean(axis=0)
        std = m.vectors.std(axis=0)
        centered = m.vectors - mean
        safe = np.where(std > 0, std, 1.0)
        blocks.append(np.where(std > 0, centered / safe, 0.0))
    return EmbeddingMatrix(doc_ids, "combined", np.hstack(blocks))


class Reducer(Protocol):
    def fit_transform(self, X: np.ndarray, n_components: int, seed: int) -> np.ndarray: ...


class PCAReducer:
    """Linear fallback; pads with zero columns when N < n_components."""

    def fit_transform(self, X: np.ndarray, n_components: int, seed: int) -> np.ndarray:
        from sklearn.decomposition import PCA

        k = min(n_components, X.shape[0], X.shape[1])
        out = PCA(n_components=k, svd_solver="full", random_state=seed).fit_transform(X)
        if k < n_components:
            out = np.hstack([out, np.zeros((X.shape[0], n_components - k))])
        return out


class UMAPReducer:
    def __init__(self, n_neighbors: int = 15, metric: str = "euclidean"):
        self.n_neighbors = n_neighbors
        self.metric = metric

    def fit_transform(self, X: np.ndarray, n_components: int, seed: int) -> np.ndarray:
        import umap

        n = X.shape[0]
        # spectral init needs n_components < N - 1
        init = "spectral" if n_components < n - 1 else "random"
        model = umap.UMAP(
            n_components=n_components,
            n_neighbors=min(self.n_neighbors, max(n - 1, 2)),
            metric=self.metric,
            init=init,
            random_state=seed,
            n_jobs=1,
        )
        return np.asarray(model.fit_transform(X), dtype=np.float64)


def default_reducer() -> Reducer:
    try:
        import umap  # noqa: F401
    except ImportError:
        logger.info("umap-learn not installed; using PCA reducer")
        return PCAReducer()
    return UMAPReducer()


def reduce(m: EmbeddingMatrix, d_target: int = 100, seed: int = 0,
           reducer: Reducer | None = None) -> EmbeddingMatrix:
    if m.n == 0:
        raise ValueError("empty embedding matrix")
    if m.dim <= d_target:
        return EmbeddingMatrix(m.doc_ids, "reduced", m.vectors.copy())
    reducer = reducer or default_reducer()
    out = reducer.fit_transform(m.vectors, d_target, seed)
    return EmbeddingMatrix(m.doc_ids, "reduced", out)


class Clusterer(Protocol):
    def fit_predict(self, X: np.ndarray, min_cluster_size: int) -> np.ndarray:
        """Integer labels, ``-1`` for noise."""


class HDBSCANClusterer:
    def __init__(self, min_samples: int | None = None):
        self.min_samples = min_samples

    def fit_predict(self, X: np.ndarray, min_cluster_size: int) -> np.ndarray:
        from sklearn.cluster import HDBSCAN

        model = HDBSCAN(min_cluster_size=min_cluster_size, min_samples=self.min_samples,
                        copy=True)
        return model.fit_predict(X)


@dataclass
class ClusteringResult:
    doc_ids: tuple[str, ...]
    labels: np.ndarray
    k: int
    sizes: list[int]
    pre_reassignment_noise: np.ndarray
    silhouette: float | None
    norm_entropy: float
    final_score: float | None
    embedding: str = "reduced"
    kappa: int | None = None

    @property
    def selectable(self) -> bool:
        return self.final_score is not None

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def to_json(self) -> dict:
        return {
            "embedding": self.embedding,
            "kappa": self.kappa,
            "k": self.k,
            "sizes": list(self.sizes),
            "silhouette": self.silhouette,
            "norm_entropy": self.norm_entropy,
            "final_score": self.final_score,
            "doc_ids": list(self.doc_ids),
            "labels": [int(x) for x in self.labels],
            "noise": [bool(x) for x in self.pre_reassignment_noise],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ClusteringResult":
        return cls(
            doc_ids=tuple(data["doc_ids"]),
            labels=np.asarray(data["labels"], dtype=np.intp),
            k=int(data["k"]),
            sizes=[int(s) for s in data["sizes"]],
            pre_reassignment_noise=np.asarray(data["noise"], dtype=bool),
            silhouette=data["silhouette"],
            norm_entropy=float(data["norm_entropy"]),
            final_score=data["final_score"],
            embedding=data.get("embedding", "reduced"),
            kappa=data.get("kappa"),
        )


def knn_reassign(X: np.ndarray, labels: np.ndarray, k: int = 5) -> np.ndarray:
    """Relabel noise points by majority vote of their k nearest labelled points.

    Vote ties go to the smallest cluster index; distance ties to the lower row.
    """
    labels = np.asarray(labels).copy()
    noise = labels == NOISE
    if not noise.any():
        return labels
    ref_idx = np.flatnonzero(~noise)
    if ref_idx.size == 0:
        raise ValueError("no clusters: every point is noise")
    ref = X[ref_idx]
    kk = min(k, ref_idx.size)
    for i in np.flatnonzero(noise):
        d = np.sqrt(((ref - X[i]) ** 2).sum(axis=1))
        nearest = np.argsort(d, kind="stable")[:kk]
        votes = np.bincount(labels[ref_idx[nearest]])
        labels[i] = int(np.argmax(votes))  # argmax returns the first (smallest) max
    return labels


def silhouette(m: EmbeddingMatrix | np.ndarray, labels: Sequence[int]) -> float:
    X = m.vectors if isinstance(m, EmbeddingMatrix) else np.asarray(m, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    uniq, dense = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    return float(silhouette_samples(X, dense, uniq.size).mean())


def normalized_entropy(sizes: Sequence[int]) -> float:
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        raise ValueError("empty cluster sizes")
    if np.any(sizes < 1):
        raise ValueError("cluster sizes must be >= 1")
    if sizes.size == 1:
        return 0.0
    p = sizes / sizes.sum()
    return float(-(p * np.log(p)).sum() / math.log(sizes.size))


def final_score(s: float, h: float) -> float:
    """Mean of silhouette and normalized entropy."""
    return (s + h) / 2.0


def cluster_with_reassignment(m: EmbeddingMatrix, kappa: int, k: int = 5,
                              clusterer: Clusterer | None = None) -> ClusteringResult:
    if m.n <= kappa:
        raise ValueError(f"need more than kappa={kappa} documents, got {m.n}")
    clusterer = clusterer or HDBSCANClusterer()
    raw = np.asarray(clusterer.fit_predict(m.vectors, kappa), dtype=np.intp)
    noise = raw == NOISE
    if noise.all():
        raise ValueError("no clusters: every point is noise")
    # compact arbitrary clusterer ids to 0..K-1 in ascending order
    uniq = np.unique(raw[~noise])
    remap = {int(c): i for i, c in enumerate(uniq)}
    labels = np.array([remap[int(c)] if c != NOISE else NOISE for c in raw], dtype=np.intp)
    labels = knn_reassign(m.vectors, labels, k)
    n_clusters = len(uniq)
    sizes = np.bincount(labels, minlength=n_clusters).tolist()
    h = normalized_entropy(sizes)
    if n_clusters < 2:
        logger.warning("single cluster for kappa=%s; configuration not selectable", kappa)
        s, score = None, None
    else:
        s = silhouette(m, labels)
        score = final_score(s, h)
    return ClusteringResult(m.doc_ids, labels, n_clusters, sizes, noise, s, h, score,
                            embedding=m.modality, kappa=kappa)


@dataclass(frozen=True)
class RankEntry:
    embedding: str
    kappa: int
    score: int


@dataclass
class ConfigRanking:
    entries: list[RankEntry] = field(default_factory=list)

    def top(self) -> RankEntry:
        return self.entries[0]


def rank_configurations(per_dataset_scores: Mapping[str, Mapping[tuple[str, int], float | None]],
                        top_n: int) -> ConfigRanking:
    """Cumulative position scores: top-N configs per dataset earn N..1 points."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    points: dict[tuple[str, int], int] = defaultdict(int)
    for scores in per_dataset_scores.values():
        valid = [(cfg, s) for cfg, s in scores.items() if s is not None]
        for cfg, _ in valid:
            points[cfg] += 0
        ordered = sorted(valid, key=lambda cs: (-cs[1], cs[0][0], cs[0][1]))
        for pos, (cfg, _) in enumerate(ordered[:top_n]):
            points[cfg] += top_n - pos
    entries = [RankEntry(emb, kappa, pts) for (emb, kappa), pts in points.items()]
    entries.sort(key=lambda e: (-e.score, e.embedding, e.kappa))
    return ConfigRanking(entries)


def select_configuration(results: Sequence[ClusteringResult],
                         override: tuple[str, int] | None = None) -> ClusteringResult:
    """Argmax of final score, or the explicitly requested (embedding, kappa)."""
    if override is not None:
        for r in results:
            if (r.embedding, r.kappa) == tuple(override):
                return r
        raise KeyError(f"no clustering for {override}")
    candidates = [r for r in results if r.selectable]
    if not candidates:
        raise ValueError("no selectable clustering configuration")
    return max(candidates, key=lambda r: r.final_score)


@dataclass(frozen=True)
class SamplingConfig:
    strategy: str = "IC"
    alpha: float = 1.0
    n_seeds: int = 6

    def __post_init__(self):
        strategy = self.strategy.upper()
        if strategy not in ("CC", "IC"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        object.__setattr__(self, "strategy", strategy)
        if not math.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError("alpha must be finite and >= 0")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")


def cluster_probabilities(sizes: Sequence[int], alpha: float) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        raise ValueError("empty cluster sizes")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    # log-space keeps large sizes/alpha from overflowing
    logw = alpha * np.log(sizes)
    w = np.exp(logw - logw.max())
    return w / w.sum()


@dataclass(frozen=True)
class SeedBatch:
    doc_ids: tuple[str, ...]
    clusters: tuple[int, ...]
    with_replacement: bool = False


def draw_seed_batch(clustering: ClusteringResult, cfg: SamplingConfig,
                    rng: np.random.Generator) -> SeedBatch:
    if clustering.k < 1 or not clustering.doc_ids:
        raise ValueError("empty clustering")
    p = cluster_probabilities(clustering.sizes, cfg.alpha)
    members = [clustering.members(c) for c in range(clustering.k)]
    ids = clustering.doc_ids
    if cfg.strategy == "CC":
        clusters = rng.choice(clustering.k, size=cfg.n_seeds, p=p)
        picks = [members[c][rng.integers(len(members[c]))] for c in clusters]
        return SeedBatch(tuple(ids[i] for i in picks), tuple(int(c) for c in clusters))
    c = int(rng.choice(clustering.k, p=p))
    replace = len(members[c]) < cfg.n_seeds
    if replace:
        logger.info("cluster %d has %d members < %d seeds; sampling with replacement",
                    c, len(members[c]), cfg.n_seeds)
    picks = rng.choice(members[c], size=cfg.n_seeds, replace=replace)
    return SeedBatch(tuple(ids[i] for i in picks), (c,) * cfg.n_seeds, replace)


def draw_seeds(clustering: ClusteringResult, cfg: SamplingConfig,
               rng: np.random.Generator) -> list[str]:
    return list(draw_seed_batch(clustering, cfg, rng).doc_ids)


def layout_descriptor(image, profile_bins: int = 64, thumb: int = 16) -> np.ndarray:
    """Pixel-only page descriptor: ink projection profiles plus a grayscale thumbnail.

    Stands in for learned layout encoders when none is available.
    """
    from PIL import Image

    gray = image.convert("L") if isinstance(image, Image.Image) else Image.open(image).convert("L")
    ink = 1.0 - np.asarray(gray, dtype=np.float64) / 255.0
    rows = np.interp(np.linspace(0, ink.shape[0] - 1, profile_bins),
                     np.arange(ink.shape[0]), ink.mean(axis=1))
    cols = np.interp(np.linspace(0, ink.shape[1] - 1, profile_bins),
                     np.arange(ink.shape[1]), ink.mean(axis=0))
    small = np.asarray(gray.resize((thumb, thumb), Image.Resampling.BILINEAR), dtype=np.float64) / 255.0
    return np.concatenate([rows, cols, small.ravel()])
