"""Command line entry point: ``docdjinn <command>``."""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import pipeline as pl
from .metrics import ThumbnailEmbeddingClient, layout_fid
from .seed_selection import (
    ClusteringResult,
    EmbeddingMatrix,
    PCAReducer,
    UMAPReducer,
    cluster_with_reassignment,
    draw_seed_batch,
    layout_descriptor,
    load_embeddings,
    rank_configurations,
    reduce,
    save_embeddings,
    select_configuration,
    zscore_concat,
)

EXIT_PAUSED = 75
_IMAGES = {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp", ".webp"}


def _common(fn):
    """Options every command accepts."""
    @click.option("--config", "config", type=click.Path(exists=True, dir_okay=False),
                  help="Dataset definition YAML.")
    @click.option("--seed", type=int, default=0, show_default=True)
    @click.option("--workers", type=int, default=1, show_default=True)
    @click.option("--backend", default="stub", show_default=True, help="Generation backend name.")
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)
    return wrapper


def _definition(config: str | None) -> pl.DatasetDefinition:
    if not config:
        raise click.UsageError("--config is required for this command")
    return pl.DatasetDefinition.from_yaml(config)


def _engines(backend: str, definition: pl.DatasetDefinition) -> pl.Engines:
    try:
        return pl.default_engines(backend, definition)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


def _emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def _image_files(directory: str, recursive: bool = False) -> list[Path]:
    found = Path(directory).rglob("*") if recursive else Path(directory).iterdir()
    return sorted(p for p in found if p.is_file() and p.suffix.lower() in _IMAGES)


def _load_clustering(path: str) -> ClusteringResult:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "configs" in data:
        return ClusteringResult.from_json(data["configs"][data["selected"]])
    return ClusteringResult.from_json(data)


@click.group()
@click.option("-v", "--verbose", count=True)
def main(verbose: int) -> None:
    """Synthetic document dataset generation."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
@_common
def embed(corpus_dir, out, config, seed, workers, backend):
    """Write layout descriptors of seed page images to a JSONL embedding file."""
    files = _image_files(corpus_dir)
    if not files:
        raise click.ClickException(f"no images in {corpus_dir}")
    vectors = np.vstack([layout_descriptor(p) for p in files])
    save_embeddings(out, [EmbeddingMatrix(tuple(p.stem for p in files), "layout", vectors)])
    click.echo(f"{len(files)} documents -> {out}")


@main.command()
@click.argument("embeddings", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
@click.option("--kappa", "kappas", type=int, multiple=True, default=(5, 10, 20), show_default=True)
@click.option("--d-target", type=int, default=100, show_default=True)
@click.option("--knn", type=int, default=5, show_default=True)
@click.option("--select", "override", default=None, help="Force EMBEDDING:KAPPA.")
@click.option("--reducer", "reducer_name", type=click.Choice(["auto", "umap", "pca"]), default="auto",
              show_default=True, help="auto uses UMAP when umap-learn is importable.")
@_common
def cluster(embeddings, out, kappas, d_target, knn, override, reducer_name, config, seed, workers, backend):
    """Cluster every (embedding, kappa) configuration and pick the best scoring one."""
    mats = load_embeddings(embeddings)
    spaces = dict(mats)
    if len(mats) > 1:
        spaces["combined"] = zscore_concat([mats[k] for k in sorted(mats)])
    reducer = {"auto": None, "umap": UMAPReducer(), "pca": PCAReducer()}[reducer_name]
    results = []
    for name in sorted(spaces):
        reduced = reduce(spaces[name], d_target, seed, reducer)
        for kappa in kappas:
            try:
                res = cluster_with_reassignment(reduced, kappa, knn)
            except ValueError as exc:
                click.echo(f"skip {name} kappa={kappa}: {exc}", err=True)
                continue
            res.embedding = name
            results.append(res)
    if not results:
        raise click.ClickException("no clustering configuration succeeded")
    forced = None
    if override:
        emb, _, kap = override.partition(":")
        forced = (emb, int(kap))
    best = select_configuration(results, forced)
    selected = next(i for i, r in enumerate(results) if r is best)
    Path(out).write_text(json.dumps({"configs": [r.to_json() for r in results], "selected": selected}),
                         encoding="utf-8")
    _emit([{"embedding": r.embedding, "kappa": r.kappa, "k": r.k, "silhouette": r.silhouette,
            "norm_entropy": r.norm_entropy, "final_score": r.final_score,
            "selected": r is best} for r in results])


@main.command("rank-configs")
@click.argument("clusterings", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--top-n", type=int, default=3, show_default=True)
@_common
def rank_configs(clusterings, top_n, config, seed, workers, backend):
    """Cumulative position ranking of configurations across datasets (one file per dataset)."""
    per_dataset = {}
    for path in clusterings:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        per_dataset[Path(path).stem] = {(c["embedding"], c["kappa"]): c["final_score"]
                                        for c in data["configs"]}
    ranking = rank_configurations(per_dataset, top_n)
    _emit([{"embedding": e.embedding, "kappa": e.kappa, "points": e.score} for e in ranking.entries])


@main.command()
@click.option("--clustering", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--batches", type=int, default=1, show_default=True)
@_common
def sample(clustering, batches, config, seed, workers, backend):
    """Draw seed batches with the definition's sampling strategy."""
    definition = _definition(config)
    clus = _load_clustering(clustering)
    for b in range(batches):
        batch = draw_seed_batch(clus, definition.sampling, np.random.default_rng([seed, b]))
        click.echo(json.dumps({"batch": b, "doc_ids": list(batch.doc_ids),
                               "clusters": list(batch.clusters),
                               "with_replacement": batch.with_replacement}))


def _corpus(definition: pl.DatasetDefinition, corpus_dir: str | None, seed: int) -> pl.Corpus:
    path = corpus_dir or definition.corpus
    return pl.Corpus.from_directory(path) if path else pl.Corpus.synthetic(seed=seed)


@main.command()
@click.option("--out", "-o", required=True, type=click.Path(file_okay=False))
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--clustering", type=click.Path(exists=True, dir_okay=False))
@_common
def generate(out, corpus_dir, clustering, config, seed, workers, backend):
    """Run the full pipeline into OUT (resumes an existing manifest)."""
    definition = _definition(config)
    engines = _engines(backend, definition)
    clus_path = clustering or definition.clustering
    clus = _load_clustering(clus_path) if clus_path else None
    try:
        manifest = pl.run(definition, _corpus(definition, corpus_dir, seed), engines, seed=seed,
                          out_dir=out, clustering=clus, workers=workers)
    except pl.RunPaused as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_PAUSED)
    _emit(manifest.stats)


def _single(html_file: str, config: str | None, seed: int, backend: str) -> pl.Outcome:
    definition = _definition(config)
    engines = _engines(backend, definition)
    html = Path(html_file).read_text(encoding="utf-8")
    return pl.process_document(Path(html_file).stem, html, definition, engines,
                               pl.AssetBank(definition.banks), np.random.default_rng(seed))


@main.command()
@click.argument("html_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", required=True, type=click.Path(file_okay=False))
@_common
def enhance(html_file, out, config, seed, workers, backend):
    """Render one HTML document, add handwriting and visual elements, write page.png."""
    outcome = _single(html_file, config, seed, backend)
    rel = pl.write_artifacts(Path(out), outcome.doc)
    if rel is None:
        raise click.ClickException(f"not rendered: {outcome.doc.reason.value} {outcome.doc.detail}")
    click.echo(str(Path(out) / rel / "page.png"))


@main.command()
@click.argument("html_file", type=click.Path(exists=True, dir_okay=False))
@_common
def verify(html_file, config, seed, workers, backend):
    """Process one HTML document and print its verdict."""
    outcome = _single(html_file, config, seed, backend)
    doc = outcome.doc
    _emit({"id": doc.id, "status": doc.status.value,
           "reason": doc.reason.value if doc.reason else None, "detail": doc.detail,
           "checks": outcome.checks, "mean_anls": outcome.mean_anls})
    sys.exit(0 if doc.reason is None else 1)


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@_common
def stats(manifest, config, seed, workers, backend):
    """Recompute statistics from manifest records; exit 1 if they differ from the stored block."""
    m = pl.Manifest.load(manifest)
    fresh = pl.stats(m)
    _emit(fresh)
    if m.stats is not None and m.stats != fresh:
        click.echo("stored stats differ from recomputed stats", err=True)
        sys.exit(1)


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--out", "-o", required=True, type=click.Path(file_okay=False))
@click.option("--format", "fmt", type=click.Choice(pl.EXPORT_FORMATS), default="pdf", show_default=True)
@_common
def export(manifest, out, fmt, config, seed, workers, backend):
    """Write verified samples as per-sample directories."""
    ids = pl.export(pl.Manifest.load(manifest), out, fmt)
    click.echo(f"exported {len(ids)} samples -> {out}")


@main.command()
@click.argument("real_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("synth_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--size", type=int, default=16, show_default=True, help="Thumbnail side length.")
@_common
def fid(real_dir, synth_dir, size, config, seed, workers, backend):
    """Frechet distance between thumbnail-feature fits of two image trees."""
    real, synth = _image_files(real_dir, True), _image_files(synth_dir, True)
    if len(real) < 2 or len(synth) < 2:
        raise click.ClickException("each folder needs at least 2 images")
    click.echo(f"{layout_fid(real, synth, ThumbnailEmbeddingClient(size)):.6f}")


if __name__ == "__main__":
    main()
