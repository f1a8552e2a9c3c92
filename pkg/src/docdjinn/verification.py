"""Ground-truth verification against rendered or recognized document text."""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .documents import (
    Box,
    ClassLabel,
    KIEEntities,
    LayoutRegions,
    QAPairs,
    RejectReason,
    SynthesizedDocument,
)
from .kernels import levenshtein

DEFAULT_TAU = 0.75
_WS = re.compile(r"\s+")
_PUNCT = string.punctuation + "\u2018\u2019\u201c\u201d\u2013\u2014"


def normalize_text(s: str) -> str:
    return _WS.sub(" ", s.casefold()).strip()


def nls(a: str, b: str) -> float:
    """Normalized Levenshtein similarity on case-folded, whitespace-collapsed text."""
    a, b = normalize_text(a), normalize_text(b)
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def _word_texts(words) -> list[str]:
    return [w if isinstance(w, str) else w.text for w in words]


def best_span(needle: str, words: Sequence) -> tuple[float, tuple[int, int] | None]:
    """Best similarity over contiguous word windows plus the winning window ``[i, j)``."""
    texts = _word_texts(words)
    if not texts:
        return 0.0, None
    target = normalize_text(needle)
    max_len = len(target.split()) + 1
    best, where = -1.0, None
    for i in range(len(texts)):
        for n in range(1, max_len + 1):
            if i + n > len(texts):
                break
            window = " ".join(texts[i:i + n])
            score = nls(target, window)
            stripped = normalize_text(window).strip(_PUNCT)
            if stripped:
                score = max(score, nls(target, stripped))
            if score > best:
                best, where = score, (i, i + n)
                if best == 1.0:
                    return best, where
    return best, where


def best_span_similarity(needle: str, words: Sequence) -> float:
    return best_span(needle, words)[0]


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    reason: RejectReason | None = None


@dataclass
class VerificationReport:
    doc_id: str
    task: str
    checks: list[Check] = field(default_factory=list)
    anls_scores: list[float] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def reason(self) -> RejectReason | None:
        for c in self.checks:
            if not c.passed:
                return c.reason
        return None

    @property
    def mean_anls(self) -> float | None:
        return sum(self.anls_scores) / len(self.anls_scores) if self.anls_scores else None

    def add(self, name: str, passed: bool, reason: RejectReason, detail: str = "") -> None:
        self.checks.append(Check(name, passed, detail, None if passed else reason))

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "task": self.task,
            "verdict": "accept" if self.accepted else "reject",
            "reason": self.reason.value if self.reason else None,
            "anls": self.anls_scores,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def _fold_set(labels: Iterable[str]) -> set[str]:
    return {normalize_text(x) for x in labels}


def verify_vqa(gt: QAPairs, words: Sequence, tau: float = DEFAULT_TAU,
               doc_id: str = "") -> VerificationReport:
    report = VerificationReport(doc_id, "VQA")
    if not gt.pairs:
        report.add("qa_present", False, RejectReason.BAD_GT, "no QA pairs")
        return report
    for q, a in gt.pairs.items():
        score = best_span_similarity(str(a), words)
        report.anls_scores.append(score)
        report.add(f"answer:{q}", score >= tau, RejectReason.ANSWER_NOT_IN_TEXT, f"{score:.4f}")
    return report


def verify_cls(gt: ClassLabel, allowed: Iterable[str], doc_id: str = "") -> VerificationReport:
    report = VerificationReport(doc_id, "CLS")
    ok = normalize_text(gt.label) in _fold_set(allowed)
    report.add("label_valid", ok, RejectReason.INVALID_LABEL, gt.label)
    return report


def verify_kie(gt: KIEEntities, words: Sequence, vocabulary: Iterable[str] | None = None,
               tau: float = DEFAULT_TAU, doc_id: str = "") -> VerificationReport:
    """Values must appear in text; entities bound to a region must match inside it.

    ``words`` are word boxes (objects with ``.text`` and ``.box``); plain strings
    are accepted when no entity carries a region.
    """
    report = VerificationReport(doc_id, "KIE")
    vocab = _fold_set(vocabulary) if vocabulary is not None else None
    if not gt.entities:
        report.add("entities_present", False, RejectReason.BAD_GT, "no entities")
        return report
    for n, e in enumerate(gt.entities):
        tag = f"{e.group + ' ' if e.group else ''}{e.field}#{n}"
        if not e.valid or (vocab is not None and normalize_text(e.field) not in vocab):
            report.add(f"label:{tag}", False, RejectReason.INVALID_LABEL, e.field)
            continue
        if not e.value.strip():
            continue
        score = best_span_similarity(e.value, words)
        report.anls_scores.append(score)
        report.add(f"value:{tag}", score >= tau, RejectReason.ANSWER_NOT_IN_TEXT, f"{score:.4f}")
        if score < tau or e.ref is None:
            continue
        if e.box is None:
            report.add(f"region:{tag}", False, RejectReason.OUT_OF_BOUNDS, "region not rendered")
            continue
        inside = [w for w in words if not isinstance(w, str) and e.box.contains_point(*w.box.center)]
        local = best_span_similarity(e.value, inside)
        report.add(f"region:{tag}", local >= tau, RejectReason.OUT_OF_BOUNDS, f"{local:.4f}")
    return report


def verify_dla(gt: LayoutRegions, page_box: Box, vocabulary: Iterable[str],
               doc_id: str = "") -> VerificationReport:
    report = VerificationReport(doc_id, "DLA")
    vocab = _fold_set(vocabulary)
    if not gt.regions:
        report.add("regions_present", False, RejectReason.BAD_GT, "no regions")
        return report
    for n, r in enumerate(gt.regions):
        report.add(f"label:{r.label}#{n}", normalize_text(r.label) in vocab,
                   RejectReason.INVALID_LABEL, r.label)
        if r.box is None:
            report.add(f"bounds:{r.label}#{n}", False, RejectReason.OUT_OF_BOUNDS, "not rendered")
        else:
            report.add(f"bounds:{r.label}#{n}", page_box.contains(r.box) and r.box.area > 0,
                       RejectReason.OUT_OF_BOUNDS, str(r.box.to_list()))
    return report


def accept_document(doc: SynthesizedDocument, task: str, words: Sequence = (),
                    vocabulary: Iterable[str] | None = None,
                    tau: float = DEFAULT_TAU) -> VerificationReport:
    """Multi-page check first, then the task-specific check for ``doc.gt``."""
    task = task.upper()
    render = doc.render
    if render is not None and render.page_count > 1:
        report = VerificationReport(doc.id, task)
        report.add("single_page", False, RejectReason.MULTI_PAGE, f"{render.page_count} pages")
        return report
    gt = doc.gt
    if gt is None:
        report = VerificationReport(doc.id, task)
        report.add("gt_present", False, RejectReason.NO_GT)
        return report
    if task == "VQA" and isinstance(gt, QAPairs):
        report = verify_vqa(gt, words, tau, doc.id)
    elif task == "CLS" and isinstance(gt, ClassLabel):
        report = verify_cls(gt, vocabulary or (), doc.id)
    elif task == "KIE" and isinstance(gt, KIEEntities):
        report = verify_kie(gt, words, vocabulary, tau, doc.id)
    elif task == "DLA" and isinstance(gt, LayoutRegions):
        if render is None:
            raise ValueError("DLA verification needs a rendered document")
        w, h = render.page_size
        report = verify_dla(gt, Box(0, 0, w, h), vocabulary or (), doc.id)
    else:
        report = VerificationReport(doc.id, task)
        report.add("gt_variant", False, RejectReason.BAD_GT, type(gt).__name__)
    return report
