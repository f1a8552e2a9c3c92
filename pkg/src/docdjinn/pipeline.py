"""Dataset runs: definitions, per-call document processing, JSONL manifest, stats and export."""

from __future__ import annotations

import io
import json
import logging
import math
import re
import shutil
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml
from PIL import Image, ImageDraw

from . import handwriting as hw
from .documents import (
    Box,
    DocumentRejected,
    KIEEntities,
    LayoutRegions,
    RejectReason,
    Status,
    SynthesizedDocument,
)
from .rendering import (
    DEFAULT_MAX_PAGE_HEIGHT,
    OCRBackend,
    Renderer,
    SidecarOCR,
    SimpleLayoutRenderer,
    extract_text_boxes,
    plant_sidecar,
)
from .seed_selection import ClusteringResult, SamplingConfig, draw_seed_batch
from .synthesis import (
    GenerationBackend,
    PromptSpec,
    RetryPolicy,
    StubBackend,
    extract_handwriting_regions,
    extract_macro_gt,
    extract_micro_annotations,
    extract_placeholders,
    generate,
    instantiate_prompt,
    split_response,
)
from .verification import DEFAULT_TAU, accept_document
from .visual_elements import (
    BANK_TYPES,
    AssetBank,
    EmptyBankError,
    Overlay,
    augment_dla_gt,
    composite,
    fit_into,
    pick_asset,
    render_barcode,
    render_stamp,
)

logger = logging.getLogger(__name__)

TASKS = ("VQA", "KIE", "CLS", "DLA")
PROMPT_TYPES = {"JSON": "macro", "ANNOTATION": "micro"}
DEFAULT_M = {"VQA": 3, "KIE": 3, "CLS": 3, "DLA": 2}
MANIFEST_NAME = "manifest.jsonl"
WORK_DIR = "work"

_LABEL_LINE = re.compile(r"""^\s*(?:[-*]\s*)?["'`]?([A-Za-z][\w\-]*)["'`]?\s*(?::|$)""")
_GROUP_TOKEN = re.compile(r"\b([A-Z][A-Z0-9]*)_(?:\d+\b|<\w+>|\{\w+\}|N\b|IDX\b)")


# --- definitions ---------------------------------------------------------------------

@dataclass
class HandwritingConfig:
    writers: tuple[int, ...] = hw.DEFAULT_WRITERS
    word_spacing: int = hw.DEFAULT_WORD_SPACING
    jitter: float = hw.DEFAULT_JITTER
    tau: int = hw.DEFAULT_TAU
    postprocess: hw.PostprocessParams = field(default_factory=hw.PostprocessParams)


@dataclass
class DatasetDefinition:
    name: str
    task_type: str
    prompt_type: str
    doc_type: str
    gt_type: str
    gt_format: str = ""
    num_solutions: int | None = None
    language: str = "English"
    target_count: int = 60
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    clustering: str | None = None
    corpus: str | None = None
    labels: list[str] | None = None
    group_pattern: str | None = None
    anls_tau: float = DEFAULT_TAU
    max_page_height: int = DEFAULT_MAX_PAGE_HEIGHT
    banks: dict[str, str] = field(default_factory=dict)
    handwriting: HandwritingConfig = field(default_factory=HandwritingConfig)
    backend: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.task_type = self.task_type.upper()
        if self.task_type not in TASKS:
            raise ValueError(f"task_type must be one of {TASKS}")
        if self.prompt_type.upper() not in PROMPT_TYPES:
            raise ValueError("prompt_type must be JSON or annotation")
        self.prompt_type = "JSON" if self.prompt_type.upper() == "JSON" else "annotation"
        if self.num_solutions is None:
            self.num_solutions = DEFAULT_M[self.task_type]
        if self.num_solutions < 1 or self.target_count < 1:
            raise ValueError("num_solutions and target_count must be positive")
        if self.template_kind == "macro" and self.task_type == "DLA":
            raise ValueError("DLA ground truth needs element annotations (prompt_type annotation)")
        want = 2 * self.num_solutions
        if self.sampling.n_seeds != want:
            self.sampling = SamplingConfig(self.sampling.strategy, self.sampling.alpha, want)

    @property
    def template_kind(self) -> str:
        return PROMPT_TYPES[self.prompt_type.upper()]

    def prompt_spec(self) -> PromptSpec:
        return PromptSpec(self.template_kind, self.language, self.doc_type, self.gt_type,
                          self.gt_format, self.num_solutions)

    def vocabulary(self) -> list[str]:
        """Label set: explicit ``labels`` or the names listed in ``gt_type``."""
        if self.labels:
            return list(self.labels)
        if self.task_type == "VQA":
            return []
        found = []
        lines = [ln for ln in self.gt_type.splitlines() if ln.strip()]
        if len(lines) > 1 or ":" in self.gt_type:
            for ln in lines:
                m = _LABEL_LINE.match(ln)
                if m and m.group(1) not in found:
                    found.append(m.group(1))
        else:
            found = [t.strip().strip("\"'`") for t in self.gt_type.split(",") if t.strip()]
        return found

    def kie_group_pattern(self) -> str | None:
        if self.task_type != "KIE" or self.template_kind != "micro":
            return None
        if self.group_pattern:
            return self.group_pattern
        prefixes = sorted(set(_GROUP_TOKEN.findall(self.gt_format or "")))
        return rf"(?:{'|'.join(prefixes)})_\d+" if prefixes else r"[A-Z]+_\d+"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DatasetDefinition":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown dataset definition keys: {sorted(unknown)}")
        if isinstance(data.get("sampling"), Mapping):
            data["sampling"] = SamplingConfig(**data["sampling"])
        if isinstance(data.get("handwriting"), Mapping):
            h = dict(data["handwriting"])
            if "writers" in h:
                h["writers"] = tuple(int(w) for w in h["writers"])
            if isinstance(h.get("postprocess"), Mapping):
                pp = {k: tuple(v) if isinstance(v, list) else v for k, v in h["postprocess"].items()}
                h["postprocess"] = hw.PostprocessParams(**pp)
            data["handwriting"] = HandwritingConfig(**h)
        return cls(**data)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "DatasetDefinition":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def to_dict(self) -> dict[str, Any]:
        pp = self.handwriting.postprocess
        return {
            "name": self.name, "task_type": self.task_type, "prompt_type": self.prompt_type,
            "doc_type": self.doc_type, "gt_type": self.gt_type, "gt_format": self.gt_format,
            "num_solutions": self.num_solutions, "language": self.language,
            "target_count": self.target_count,
            "sampling": {"strategy": self.sampling.strategy, "alpha": self.sampling.alpha,
                         "n_seeds": self.sampling.n_seeds},
            "clustering": self.clustering, "corpus": self.corpus, "labels": self.vocabulary(),
            "group_pattern": self.kie_group_pattern(), "anls_tau": self.anls_tau,
            "max_page_height": self.max_page_height, "banks": dict(self.banks),
            "handwriting": {
                "writers": list(self.handwriting.writers),
                "word_spacing": self.handwriting.word_spacing,
                "jitter": self.handwriting.jitter, "tau": self.handwriting.tau,
                "postprocess": {k: list(v) if isinstance(v, tuple) else v
                                for k, v in pp.__dict__.items()},
            },
            "backend": dict(self.backend),
        }


# --- corpus ----------------------------------------------------------------------------

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp", ".webp"}


class Corpus:
    """Seed documents: id -> encoded image bytes."""

    def __init__(self, images: Mapping[str, bytes]):
        if not images:
            raise ValueError("empty corpus")
        self._images = dict(sorted(images.items()))

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(self._images)

    def image(self, doc_id: str) -> bytes:
        return self._images[doc_id]

    @classmethod
    def from_directory(cls, path: str | Path) -> "Corpus":
        files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
        return cls({p.stem: p.read_bytes() for p in files})

    @classmethod
    def synthetic(cls, n: int = 12, seed: int = 0, size: tuple[int, int] = (64, 90)) -> "Corpus":
        """Tiny procedurally drawn page thumbnails for offline runs."""
        rng = np.random.default_rng(seed)
        images = {}
        for i in range(n):
            img = Image.new("L", size, 255)
            draw = ImageDraw.Draw(img)
            y = 6
            while y < size[1] - 6:
                w = int(rng.integers(size[0] // 3, size[0] - 8))
                draw.rectangle([4, y, 4 + w, y + 2], fill=int(rng.integers(0, 120)))
                y += int(rng.integers(5, 12))
            buf = io.BytesIO()
            img.save(buf, format="PNG")
            images[f"seed{i:04d}"] = buf.getvalue()
        return cls(images)

    def single_cluster(self) -> ClusteringResult:
        n = len(self._images)
        return ClusteringResult(self.doc_ids, np.zeros(n, dtype=np.intp), 1, [n],
                                np.zeros(n, dtype=bool), None, 0.0, None)


# --- per-document processing -------------------------------------------------------------

@dataclass
class Engines:
    backend: GenerationBackend
    renderer: Renderer = field(default_factory=SimpleLayoutRenderer)
    ocr: OCRBackend = field(default_factory=SidecarOCR)
    generator: hw.HandwritingGenerator = field(default_factory=hw.StubHandwritingGenerator)
    retry: RetryPolicy = field(default_factory=RetryPolicy)


@dataclass
class Outcome:
    doc: SynthesizedDocument
    words: int = 0
    hw_elems: int = 0
    visual_elems: int = 0
    dropped: Counter = field(default_factory=Counter)
    checks: list = field(default_factory=list)
    mean_anls: float | None = None


def _attach_boxes(doc: SynthesizedDocument) -> None:
    boxes = doc.render.element_boxes
    if isinstance(doc.gt, LayoutRegions):
        for r in doc.gt.regions:
            if r.ref is not None:
                r.box = boxes.get(r.ref)
    elif isinstance(doc.gt, KIEEntities):
        for e in doc.gt.entities:
            if e.ref is not None:
                e.box = boxes.get(e.ref)
    for region in doc.handwriting_regions:
        region.box = boxes.get(region.ref)
        region.word_boxes = [w.box for w in doc.render.words_in(region.ref)]
    for p in doc.placeholders:
        p.box = boxes.get(p.ref)


def _enhance(doc: SynthesizedDocument, definition: DatasetDefinition, engines: Engines,
             banks: AssetBank, rng: np.random.Generator, out: Outcome) -> None:
    render = doc.render
    page = render.page_image.convert("RGB")
    cfg = definition.handwriting
    overlays: list[Overlay] = []
    kept_regions = []
    for region in doc.handwriting_regions:
        if region.box is None or not region.word_boxes:
            out.dropped["handwriting_no_box"] += 1
            continue
        region.writer_id = hw.writer_for_author(doc.id, region.author_id, cfg.writers)
        line = hw.render_text_line(engines.generator, region.text, region.writer_id, rng,
                                   cfg.word_spacing, cfg.tau)
        line = hw.postprocess(hw.trim_to_ink(line), cfg.postprocess, rng)
        try:
            overlays.append(hw.place_line(line, region, rng, cfg.jitter, render.page_size))
        except ValueError:
            out.dropped["handwriting_degenerate"] += 1
            continue
        draw = ImageDraw.Draw(page)
        for b in region.word_boxes:  # erase the typeset stand-in text
            draw.rectangle([b.x0, b.y0, b.x1 - 1, b.y1 - 1], fill="white")
        kept_regions.append(region)
    doc.handwriting_regions = kept_regions
    out.hw_elems = len(kept_regions)

    placed: list[Overlay] = []
    kept_placeholders = []
    for p in doc.placeholders:
        if p.canonical_type is None:
            out.dropped["unknown_type"] += 1
            continue
        if p.box is None:
            out.dropped["placeholder_no_box"] += 1
            continue
        size = (p.box.width, p.box.height)
        meta: dict[str, Any] = {"ref": p.ref}
        if p.canonical_type == "stamp":
            img = render_stamp(p.content, size, rng)
        elif p.canonical_type == "barcode":
            result = render_barcode(p.content, size, rng)
            img, meta["digits"], meta["fallback"] = result.image, result.digits, result.fallback
        else:
            try:
                img = fit_into(pick_asset(banks, p.canonical_type, rng), size)
            except EmptyBankError:
                out.dropped["empty_bank"] += 1
                continue
        placed.append(Overlay(img, p.box, p.z_order, p.canonical_type, meta))
        kept_placeholders.append(p)
    doc.placeholders = kept_placeholders
    out.visual_elems = len(placed)

    page = composite(page, overlays + placed)
    if isinstance(doc.gt, LayoutRegions):
        doc.gt = augment_dla_gt(doc.gt, [o for o in placed if o.kind in BANK_TYPES],
                                definition.vocabulary(), definition.task_type)
    # the test OCR reads words planted here; real OCR ignores the metadata
    plant_sidecar(page, render.word_boxes)
    render.page_image = page


def process_document(doc_id: str, html: str, definition: DatasetDefinition, engines: Engines,
                     banks: AssetBank, rng: np.random.Generator) -> Outcome:
    """Take one generated HTML document to a terminal status."""
    doc = SynthesizedDocument(doc_id, html)
    out = Outcome(doc)
    task = definition.task_type
    vocab = definition.vocabulary()
    try:
        if definition.template_kind == "macro":
            doc.gt = extract_macro_gt(html, task)
        else:
            doc.gt = extract_micro_annotations(html, vocab, definition.kie_group_pattern())
        doc.handwriting_regions = extract_handwriting_regions(html)
        doc.placeholders = extract_placeholders(html)
        doc.render = engines.renderer.render(html)
        doc.advance(Status.RENDERED)
        _attach_boxes(doc)
        if doc.render.page_count == 1:
            _enhance(doc, definition, engines, banks, rng, out)
            doc.advance(Status.ENHANCED)
        words = extract_text_boxes(doc, engines.ocr) if doc.render.page_count == 1 else []
        out.words = len(words)
        report = accept_document(doc, task, words, vocab, definition.anls_tau)
        out.checks = report.to_json()["checks"]
        out.mean_anls = report.mean_anls
        if report.accepted:
            doc.advance(Status.VERIFIED)
        else:
            doc.reject(report.reason, next((c.detail for c in report.checks if not c.passed), ""))
    except DocumentRejected as exc:
        doc.reject(exc.reason, exc.detail)
    return out


# --- manifest -------------------------------------------------------------------------

def _dumps(record: Mapping) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


class RunPaused(RuntimeError):
    """Backend unavailable; the manifest on disk is a valid resume point."""


@dataclass
class Manifest:
    path: Path
    header: dict
    calls: list[dict]
    samples: list[dict]
    stats: dict | None

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        header, calls, samples, stats = {}, [], [], None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                kind = rec.get("type")
                if kind == "header":
                    header = rec
                elif kind == "call":
                    calls.append(rec)
                elif kind == "sample":
                    samples.append(rec)
                elif kind == "stats":
                    stats = rec["stats"]
        return cls(path, header, calls, samples, stats)

    @property
    def root(self) -> Path:
        return self.path.parent

    @property
    def definition(self) -> DatasetDefinition:
        return DatasetDefinition.from_dict(self.header["definition"])


def compute_stats(calls: Iterable[Mapping], samples: Sequence[Mapping]) -> dict:
    """Dataset statistics; per-document averages are over valid samples only."""
    calls = list(calls)
    valid = [s for s in samples if s["status"] == Status.VERIFIED.value]
    reasons = Counter(s["reason"] for s in samples if s["status"] == Status.REJECTED.value)
    dropped: Counter = Counter()
    for s in samples:
        dropped.update(s.get("dropped", {}))
    ok = [c for c in calls if c["status"] == "ok"]

    def avg(key: str) -> float:
        return sum(s[key] for s in valid) / len(valid) if valid else 0.0

    return {
        "total_samples": len(samples),
        "total_valid": len(valid),
        "input_tokens": sum(c["input_tokens"] for c in ok),
        "output_tokens": sum(c["output_tokens"] for c in ok),
        "avg_words": avg("words"),
        "avg_hw_elems": avg("hw_elems"),
        "avg_visual_elems": avg("visual_elems"),
        "calls": len(ok),
        "failed_calls": len(calls) - len(ok),
        "rejects": dict(sorted(reasons.items())),
        "dropped_elements": dict(sorted(dropped.items())),
    }


def stats(manifest: Manifest) -> dict:
    return compute_stats(manifest.calls, manifest.samples)


def write_artifacts(root: Path, doc: SynthesizedDocument) -> str | None:
    if doc.render is None or doc.render.page_image is None:
        return None
    rel = f"{WORK_DIR}/{doc.id}"
    d = root / rel
    d.mkdir(parents=True, exist_ok=True)
    (d / "document.html").write_text(doc.html, encoding="utf-8")
    doc.render.page_image.save(d / "page.png", format="PNG")
    boxes = {
        "page_size": list(doc.render.page_size),
        "elements": {k: v.to_list() for k, v in doc.render.element_boxes.items()},
        "words": [w.to_json() for w in doc.render.word_boxes],
        "handwriting": [{"ref": r.ref, "text": r.text, "author": r.author_id,
                         "writer": r.writer_id, "signature": r.signature,
                         "box": r.box.to_list() if r.box else None}
                        for r in doc.handwriting_regions],
        "visual_elements": [{"ref": p.ref, "type": p.canonical_type, "content": p.content,
                             "box": p.box.to_list() if p.box else None}
                            for p in doc.placeholders],
    }
    (d / "boxes.json").write_text(_dumps(boxes), encoding="utf-8")
    return rel


def _sample_record(call_id: int, j: int, out: Outcome, task: str, rel: str | None) -> dict:
    doc = out.doc
    return {
        "type": "sample", "id": doc.id, "call_id": call_id, "index": j, "task": task,
        "status": doc.status.value, "reason": doc.reason.value if doc.reason else None,
        "detail": doc.detail, "gt": doc.gt.to_json() if doc.gt is not None else None,
        "words": out.words, "hw_elems": out.hw_elems, "visual_elems": out.visual_elems,
        "dropped": dict(sorted(out.dropped.items())), "mean_anls": out.mean_anls,
        "checks": out.checks, "path": rel,
    }


def _process_call(call_id: int, definition: DatasetDefinition, clustering: ClusteringResult,
                  corpus: Corpus, engines: Engines, banks: AssetBank, seed: int,
                  root: Path) -> tuple[dict, list[dict]]:
    rng = np.random.default_rng([seed, call_id])
    batch = draw_seed_batch(clustering, definition.sampling, rng)
    images = [corpus.image(d) for d in batch.doc_ids]
    prompt = instantiate_prompt(definition.prompt_spec())
    result = generate(engines.backend, prompt, images, expected_images=definition.sampling.n_seeds,
                      policy=engines.retry, request_id=f"call-{call_id:06d}")
    call = {"type": "call", "call_id": call_id, "seeds": list(batch.doc_ids),
            "retries": result.retries, "input_tokens": result.input_tokens,
            "output_tokens": result.output_tokens}
    if result.failed:
        call.update(status="failed", error=result.error, documents=0, drops=[])
        return call, []
    docs, drops = split_response(result.text)
    call.update(status="ok", error=None, documents=len(docs),
                drops=[{"index": d.index, "reason": d.reason} for d in drops])
    samples = []
    for j, html in enumerate(docs):
        doc_id = f"{definition.name}-{call_id:06d}-{j:02d}"
        doc_rng = np.random.default_rng([seed, call_id, j])
        out = process_document(doc_id, html, definition, engines, banks, doc_rng)
        rel = write_artifacts(root, out.doc)
        samples.append(_sample_record(call_id, j, out, definition.task_type, rel))
    return call, samples


def _recover(path: Path, header: dict) -> tuple[list[dict], list[dict]]:
    """Keep records of committed calls; truncate anything after the last commit."""
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        return [], []
    first = json.loads(lines[0])
    if first.get("type") != "header" or first["definition"] != header["definition"] \
            or first["seed"] != header["seed"]:
        raise ValueError(f"{path} belongs to a different definition or seed")
    calls, samples, pending, keep = [], [], [], [lines[0]]
    for line in lines[1:]:
        try:
            rec = json.loads(line)
        except ValueError:
            break  # torn write
        if rec["type"] == "sample":
            pending.append((line, rec))
        elif rec["type"] == "call":
            if rec["status"] == "ok":
                mine = [(ln, r) for ln, r in pending if r["call_id"] == rec["call_id"]]
                keep += [ln for ln, _ in mine] + [line]
                samples += [r for _, r in mine]
                calls.append(rec)
            pending = []
    path.write_text("\n".join(keep) + "\n", encoding="utf-8")
    return calls, samples


def run(definition: DatasetDefinition, corpus: Corpus, engines: Engines, *, seed: int = 0,
        out_dir: str | Path, clustering: ClusteringResult | None = None, workers: int = 1,
        pause_after: int = 3, max_calls: int | None = None) -> Manifest:
    """Generate until ``target_count`` candidates exist; resumable from ``out_dir``."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    path = root / MANIFEST_NAME
    clustering = clustering or corpus.single_cluster()
    missing = set(clustering.doc_ids) - set(corpus.doc_ids)
    if missing:
        raise ValueError(f"clustering references {len(missing)} documents absent from the corpus")
    header = {"type": "header", "definition": definition.to_dict(), "seed": seed,
              "backend": getattr(engines.backend, "name", "?")}
    header = json.loads(_dumps(header))
    if path.exists():
        calls, samples = _recover(path, header)
    else:
        path.write_text(_dumps(header) + "\n", encoding="utf-8")
        calls, samples = [], []
    done = {c["call_id"] for c in calls}
    banks = AssetBank(definition.banks)
    m = definition.num_solutions
    max_calls = max_calls or 2 * math.ceil(definition.target_count / m) + 10
    next_call, failures = 0, 0
    with open(path, "a", encoding="utf-8") as fh, ThreadPoolExecutor(max(1, workers)) as pool:
        while len(samples) < definition.target_count:
            todo: list[int] = []
            need = math.ceil((definition.target_count - len(samples)) / m)
            while len(todo) < min(need, max(1, workers)) and next_call < max_calls:
                if next_call not in done:
                    todo.append(next_call)
                next_call += 1
            if not todo:
                logger.warning("call budget exhausted with %d candidates", len(samples))
                break
            results = pool.map(lambda c: _process_call(c, definition, clustering, corpus,
                                                        engines, banks, seed, root), todo)
            for call, call_samples in results:
                for s in call_samples:
                    fh.write(_dumps(s) + "\n")
                fh.write(_dumps(call) + "\n")
                fh.flush()
                calls.append(call)
                if call["status"] == "ok":
                    samples.extend(call_samples)
                    done.add(call["call_id"])
                    failures = 0
                else:
                    failures += 1
            if failures >= pause_after:
                raise RunPaused(f"{failures} consecutive backend failures; resume from {path}")
        fh.write(_dumps({"type": "stats", "stats": compute_stats(calls, samples)}) + "\n")
    return Manifest.load(path)


# --- export ----------------------------------------------------------------------------

EXPORT_FORMATS = ("pdf", "raster")


def export(manifest: Manifest, dest: str | Path, fmt: str = "pdf") -> list[str]:
    """Write verified samples as per-sample directories; returns exported ids."""
    if fmt not in EXPORT_FORMATS:
        raise ValueError(f"format must be one of {EXPORT_FORMATS}")
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    exported = []
    for s in manifest.samples:
        if s["status"] != Status.VERIFIED.value or not s.get("path"):
            continue
        src = manifest.root / s["path"]
        d = dest / s["id"]
        d.mkdir(parents=True, exist_ok=True)
        for name in ("document.html", "page.png", "boxes.json"):
            shutil.copyfile(src / name, d / name)
        if fmt == "pdf":
            with Image.open(src / "page.png") as im:
                im.convert("RGB").save(d / "page.pdf", format="PDF", resolution=96.0)
        (d / "gt.json").write_text(_dumps(s["gt"]), encoding="utf-8")
        meta = {k: s[k] for k in ("id", "task", "call_id", "words", "hw_elems",
                                  "visual_elems", "mean_anls")}
        meta["dataset"] = manifest.header.get("definition", {}).get("name")
        (d / "meta.json").write_text(_dumps(meta), encoding="utf-8")
        exported.append(s["id"])
    return exported


def page_box(sample_dir: str | Path) -> Box:
    data = json.loads((Path(sample_dir) / "boxes.json").read_text(encoding="utf-8"))
    w, h = data["page_size"]
    return Box(0, 0, w, h)


def default_engines(backend_name: str, definition: DatasetDefinition) -> Engines:
    """Engines for a named backend; only the offline stub is built in."""
    opts = dict(definition.backend)
    if backend_name != "stub":
        raise ValueError(f"unknown backend {backend_name!r} (built-in: stub)")
    fixture = opts.pop("fixture", {"VQA": "vqa", "CLS": "cls", "DLA": "dla"}.get(
        definition.task_type, "kie" if definition.template_kind == "micro" else "kie_flat"))
    rules = {k: tuple(opts.pop(k)) for k in ("gt_failure", "multi_page") if opts.get(k)}
    rules["down"] = bool(opts.pop("down", False))
    rules["transient_failures"] = {int(k): int(v) for k, v in (opts.pop("transient_failures", None) or {}).items()}
    if opts:
        raise ValueError(f"unknown stub options: {sorted(opts)}")
    # the stub fails deterministically, so backing off would only burn wall time
    return Engines(StubBackend(fixture, **rules), retry=RetryPolicy(base_delay=0.0),
                   renderer=SimpleLayoutRenderer(max_page_height=definition.max_page_height),
                   generator=hw.StubHandwritingGenerator(definition.handwriting.writers))
