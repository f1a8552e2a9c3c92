"""Split backend responses into documents and pull annotations out of the HTML."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Iterable

from ..documents import (
    ClassLabel,
    DocumentRejected,
    HandwritingRegion,
    KIEEntities,
    KIEEntity,
    LayoutRegion,
    LayoutRegions,
    QAPairs,
    RejectReason,
    VisualElementPlaceholder,
)
from ..htmlutil import class_tokens, element_text, indexed_elements, parse_html, parse_style

logger = logging.getLogger(__name__)

_OPEN, _CLOSE = "<HTML>", "</HTML>"
_AUTHOR = re.compile(r"^author(\d+)$", re.I)


@dataclass(frozen=True)
class Drop:
    index: int
    reason: str


def split_response(raw: str) -> tuple[list[str], list[Drop]]:
    """Return the well-formed ``<HTML>`` blocks in order plus a record per dropped block."""
    docs: list[str] = []
    drops: list[Drop] = []
    chunks = raw.split(_OPEN)[1:]
    for i, chunk in enumerate(chunks):
        end = chunk.find(_CLOSE)
        if end < 0:
            drops.append(Drop(i, "unterminated"))
            continue
        inner = chunk[:end].strip()
        if "<html" not in inner.lower():
            drops.append(Drop(i, "no_html_element"))
            continue
        docs.append(inner)
    for d in drops:
        logger.info("dropped response block %d: %s", d.index, d.reason)
    if not docs:
        logger.warning("response contained no valid <HTML> blocks")
    return docs, drops


def parse_response(raw: str) -> list[str]:
    return split_response(raw)[0]


def _gt_payload(html: str):
    soup = parse_html(html)
    script = soup.find("script", id="GT")
    if script is None:
        raise DocumentRejected(RejectReason.NO_GT, "no GT script element")
    try:
        return json.loads(script.string or script.get_text())
    except (TypeError, ValueError) as exc:
        raise DocumentRejected(RejectReason.BAD_GT, f"malformed GT JSON: {exc}") from None


def _scalar(value) -> str:
    if isinstance(value, bool) or value is None or isinstance(value, (list, dict)):
        raise DocumentRejected(RejectReason.BAD_GT, f"non-scalar GT value {value!r}")
    return str(value)


def extract_macro_gt(html: str, task: str):
    """Document-level GT from the ``<script id="GT">`` JSON payload."""
    task = task.upper()
    payload = _gt_payload(html)
    if not isinstance(payload, dict):
        raise DocumentRejected(RejectReason.BAD_GT, "GT payload is not an object")
    if task == "VQA":
        if not payload:
            raise DocumentRejected(RejectReason.BAD_GT, "no QA pairs")
        return QAPairs({str(q): _scalar(a) for q, a in payload.items()})
    if task == "CLS":
        if "label" not in payload:
            raise DocumentRejected(RejectReason.BAD_GT, "missing 'label'")
        return ClassLabel(_scalar(payload["label"]))
    if task in ("KIE", "KIE-FLAT"):
        if not payload:
            raise DocumentRejected(RejectReason.BAD_GT, "no entities")
        return KIEEntities([KIEEntity(str(k), "" if v is None else _scalar(v))
                            for k, v in payload.items()])
    raise ValueError(f"macro GT is not defined for task {task!r}")


_IGNORED_TOKENS = {"handwritten", "signature"}


def _common_prefix(labels: Iterable[str]) -> str:
    labels = list(labels)
    if len(labels) < 2:
        return ""
    prefix = labels[0]
    for lab in labels[1:]:
        while not lab.startswith(prefix):
            prefix = prefix[:-1]
    # only trust separator-terminated prefixes such as "LE-"
    cut = max(prefix.rfind("-"), prefix.rfind("_"))
    return prefix[:cut + 1] if cut >= 1 else ""


def extract_micro_annotations(html: str, label_vocabulary: Iterable[str],
                              group_pattern: str | re.Pattern | None = None):
    """Element-level GT from class tokens.

    With ``group_pattern`` the result is :class:`KIEEntities` (``PAIR_1 QUESTION``
    style); without it, :class:`LayoutRegions`. Token order is irrelevant.
    """
    vocab = {v.casefold(): v for v in label_vocabulary}
    if not vocab:
        raise ValueError("label vocabulary is empty")
    soup = parse_html(html)
    if group_pattern is None:
        prefix = _common_prefix(vocab.values()).casefold()
        regions = []
        for ref, tag in indexed_elements(soup):
            for tok in class_tokens(tag):
                folded = tok.casefold()
                if folded in vocab:
                    regions.append(LayoutRegion(vocab[folded], ref))
                elif prefix and folded.startswith(prefix):
                    regions.append(LayoutRegion(tok, ref))
        return LayoutRegions(regions)

    pattern = re.compile(group_pattern, re.I) if isinstance(group_pattern, str) else group_pattern
    entities = []
    for ref, tag in indexed_elements(soup):
        tokens = class_tokens(tag)
        groups = [t for t in tokens if pattern.fullmatch(t)]
        if not groups:
            continue
        rest = [t for t in tokens if t not in groups and t.casefold() not in _IGNORED_TOKENS
                and not _AUTHOR.match(t)]
        fields = [t for t in rest if t.casefold() in vocab]
        valid = len(set(groups)) == 1 and len(fields) == 1
        if fields:
            field = vocab[fields[0].casefold()]
        else:
            field = rest[0] if rest else ""
        if not valid:
            logger.info("invalid annotation %s on %s", tokens, ref)
        entities.append(KIEEntity(field, element_text(tag), groups[0].upper(), ref, valid=valid))
    return KIEEntities(entities)


def extract_handwriting_regions(html: str) -> list[HandwritingRegion]:
    soup = parse_html(html)
    regions = []
    for ref, tag in indexed_elements(soup):
        tokens = [t.casefold() for t in class_tokens(tag)]
        if "handwritten" not in tokens:
            continue
        if any("handwritten" in [t.casefold() for t in class_tokens(p)] for p in tag.parents
               if hasattr(p, "get")):
            continue
        text = element_text(tag)
        if not text:
            logger.warning("handwritten element %s has no text; dropped", ref)
            continue
        authors = [int(m.group(1)) for t in tokens if (m := _AUTHOR.match(t))]
        if not authors:
            logger.warning("handwritten element %s has no author class; using author1", ref)
        regions.append(HandwritingRegion(ref, text, authors[0] if authors else 1,
                                         signature="signature" in tokens))
    return regions


def extract_placeholders(html: str) -> list[VisualElementPlaceholder]:
    from ..visual_elements import map_type

    soup = parse_html(html)
    out = []
    for ref, tag in indexed_elements(soup):
        raw = tag.get("data-placeholder")
        if raw is None:
            continue
        style = parse_style(tag.get("style"))
        try:
            z = int(style.get("z-index", "0"))
        except ValueError:
            z = 0
        canonical = map_type(raw)
        if canonical == "stamp":
            z = max(z, 10)
        out.append(VisualElementPlaceholder(ref, str(raw), tag.get("data-content", "") or "",
                                            style, canonical, z))
    return out
