"""Macro (document-level JSON GT) and micro (element-level class GT) prompts."""

from __future__ import annotations

import re
from dataclasses import dataclass

_FIELD = re.compile(r"\{(\w+)\}")

_HEADER = """\
Role: you write HTML reproductions of real-world documents. You receive seed \
document images; study their structure and content and produce new, realistic \
variations. The output will be printed on paper.

## Rules
1. Stay close to the look and feel of the seeds, but never copy their text or layout one-to-one.
2. Each document fits on a single page sized for its document type.
3. Language: {language}
4. Static content only: no animation, transitions or scripted behaviour.

## HTML
- Put every document inside its own `<HTML>...</HTML>` wrapper and number the documents 1, 2, 3, ...
- Use only static CSS that keeps the document on one page.
- Minify all HTML, CSS and JS.

## Style guidance
Vary layout, colours and typography and adapt regional conventions. Do not reuse whole \
sections between documents.

## Handwriting (only where the document type calls for it)
- Give handwritten text the class `handwritten` and write it as plain text.
- Do not style `handwritten` elements beyond a noticeably larger font size.
- Tell writers apart with an author class: `author1`, `author2`, ...
- Signatures additionally get the class `signature`.

## Non-text elements (only where the document type calls for it)
- Reserve space with `<div data-placeholder="TYPE" style="...">` at the intended position.
- TYPE is one of: stamp, logo, figure, barcode, photo.
- Describe the intended content in a `data-content` attribute.
- Stamps use `position:absolute;z-index:10;` together with `top` and `right`.
- Always give explicit width and height.
- Example: `<div data-placeholder="stamp" data-content="PAID 2023-11-02" style="position:absolute;top:40mm;right:25mm;width:30mm;height:30mm;z-index:10;"></div>`

## Output layout
```
1. <HTML><!DOCTYPE html><html>...first document...</html></HTML>
2. <HTML><!DOCTYPE html><html>...second document...</html></HTML>
```
"""

_MACRO_GT = """\
## Ground truth
Embed the ground truth of each document as JSON inside \
`<script type="application/json" id="GT">...</script>`.
What to annotate: {gt_type}
JSON format: {gt_format}
"""

_MICRO_GT = """\
## Ground truth
Annotate by giving each relevant HTML element one class from this list so its role is unambiguous:
{gt_type}
{gt_format}
"""

_FOOTER = """
## Before answering, check
- variations are original, not copies of the seeds
- styling is static and the page count is one
- content is written in {language}
- {gt_check}
- non-text elements fit the document

Generate {num_solutions} distinct {doc_type} documents based on {num_seed_images} seed images.
"""

_GT_CHECK = {
    "macro": "every document carries a well-formed GT JSON block",
    "micro": "every relevant element carries its class label",
}

TEMPLATES = {
    "macro": _HEADER + "\n" + _MACRO_GT + _FOOTER,
    "micro": _HEADER + "\n" + _MICRO_GT + _FOOTER,
}


@dataclass(frozen=True)
class PromptSpec:
    template_kind: str
    language: str
    doc_type: str
    gt_type: str
    gt_format: str
    num_solutions: int

    @property
    def num_seed_images(self) -> int:
        return 2 * self.num_solutions

    def validate(self) -> None:
        if self.template_kind not in TEMPLATES:
            raise ValueError(f"unknown template kind {self.template_kind!r}")
        required = {"language": self.language, "doc_type": self.doc_type, "gt_type": self.gt_type}
        if self.template_kind == "macro":
            required["gt_format"] = self.gt_format
        for name, value in required.items():
            if not value or not str(value).strip():
                raise ValueError(f"prompt parameter {name!r} is empty")
        if self.num_solutions < 1:
            raise ValueError("num_solutions must be >= 1")


def instantiate_prompt(spec: PromptSpec) -> str:
    spec.validate()
    values = {
        "language": spec.language,
        "doc_type": spec.doc_type,
        "gt_type": spec.gt_type.strip(),
        "gt_format": (spec.gt_format or "").strip(),
        "num_solutions": str(spec.num_solutions),
        "num_seed_images": str(spec.num_seed_images),
        "gt_check": _GT_CHECK[spec.template_kind],
    }
    # single substitution pass: braces inside parameter values stay literal
    return _FIELD.sub(lambda m: values[m.group(1)], TEMPLATES[spec.template_kind])
