"""Deterministic offline backend producing canned documents with planted defects.

Documents are numbered globally as ``call_index * M + j``. A planted GT
failure or a planted multi-page overflow is selected by ``(period, phase)``
on that number, so the expected rejects of any run are known in advance.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from html import escape
from typing import Callable, Sequence

import numpy as np

from .backends import BackendError, BackendResponse, TransientBackendError

FIXTURES = ("vqa", "cls", "kie", "kie_flat", "dla")

_COMPANIES = ["Northwind Traders", "Contoso Supply", "Blue Harbor Foods", "Alder Print Works",
              "Granite Logistics", "Maple Street Bakery", "Orion Medical", "Lakeside Hardware"]
_ITEMS = ["Office chairs", "Printer toner", "Cleaning service", "Consulting hours",
          "Shipping crates", "Laptop stands", "Paper reams", "Coffee beans"]
_PEOPLE = ["John Doe", "Maria Lopez", "Wei Chen", "Amir Khan", "Olga Petrova", "Sam Taylor"]
_CITIES = ["Springfield", "Riverton", "Fairview", "Georgetown", "Franklin", "Madison"]
_CLS_LABELS = ["memo", "letter", "invoice", "report"]
_ABSENT = "Zyqxwv Jkvvpz"  # shares no window with any fixture text
_M_PATTERN = re.compile(r"Generate (\d+) distinct")
_CALL_PATTERN = re.compile(r"(\d+)$")

DLA_LABELS = ("LE-TITLE", "LE-TEXT", "LE-TABLE", "LE-FIGURE")
KIE_FIELDS = ("HEADER", "QUESTION", "ANSWER", "OTHER")
CLS_LABELS = tuple(_CLS_LABELS)


@dataclass(frozen=True)
class DocPlan:
    index: int
    gt_failure: bool
    multi_page: bool


def _hit(index: int, rule: tuple[int, int] | None) -> bool:
    return rule is not None and rule[0] > 0 and index % rule[0] == rule[1]


def _fields(rng: np.random.Generator, index: int) -> dict:
    pick = lambda seq: seq[int(rng.integers(len(seq)))]  # noqa: E731
    month, day = int(rng.integers(1, 13)), int(rng.integers(1, 29))
    return {
        "company": pick(_COMPANIES),
        "item": pick(_ITEMS),
        "person": pick(_PEOPLE),
        "city": pick(_CITIES),
        "invoice": f"INV-{index:05d}",
        "digits": f"{int(rng.integers(10**9, 10**10)):010d}",
        "date": f"2024-{month:02d}-{day:02d}",
        "amount": f"${int(rng.integers(100, 9999))}.{int(rng.integers(0, 100)):02d}",
        "author": int(rng.integers(1, 3)),
    }


def _shell(body: str, multi_page: bool, gt_json: dict | None = None) -> str:
    filler = '<div style="height:2400px"></div>' if multi_page else ""
    script = (f'<script type="application/json" id="GT">{json.dumps(gt_json)}</script>'
              if gt_json is not None else "")
    return ("<!DOCTYPE html><html><head><title>doc</title></head>"
            f'<body style="width:794px">{body}{filler}{script}</body></html>')


def _visuals(f: dict) -> str:
    return (f'<div data-placeholder="stamp" data-content="PAID {f["date"]}" '
            'style="position:absolute;top:24px;left:560px;width:45mm;height:25mm;z-index:10"></div>'
            f'<div data-placeholder="barcode" data-content="{f["digits"]}" '
            'style="width:60mm;height:14mm"></div>')


def _vqa(plan: DocPlan, f: dict) -> str:
    body = (f"<h1>{escape(f['company'])}</h1>"
            f"<p>Invoice number: {f['invoice']}</p><p>Date: {f['date']}</p>"
            f"<table><tr><th>Item</th><th>Amount</th></tr>"
            f"<tr><td>{escape(f['item'])}</td><td>{f['amount']}</td></tr></table>"
            f"<p>Approved by: <span class=\"handwritten author{f['author']}\">{f['person']}</span></p>"
            + _visuals(f))
    gt = {"What is the invoice number?": f["invoice"],
          "Who issued the invoice?": f["company"],
          "What is the total amount?": f["amount"]}
    if plan.gt_failure:
        gt["Who received the goods?"] = _ABSENT
    return _shell(body, plan.multi_page, gt)


def _cls(plan: DocPlan, f: dict) -> str:
    label = "hologram" if plan.gt_failure else _CLS_LABELS[plan.index % len(_CLS_LABELS)]
    body = (f"<h2>{label.upper() if not plan.gt_failure else 'NOTICE'}</h2>"
            f"<p>From: {escape(f['company'])}</p><p>To: {f['person']}</p>"
            f"<p>Date: {f['date']}</p><p>Regarding the delivery of {escape(f['item'].lower())} "
            f"to our {f['city']} office.</p>"
            f"<p>Signed: <span class=\"handwritten signature author1\">{f['person']}</span></p>"
            + _visuals(f))
    return _shell(body, plan.multi_page, {"label": label})


def _kie(plan: DocPlan, f: dict) -> str:
    bad = "QUESTIONX" if plan.gt_failure else "QUESTION"
    body = (f'<h2 class="PAIR_0 HEADER">Registration form</h2>'
            f'<p><span class="PAIR_1 {bad}">Name:</span> '
            f'<span class="PAIR_1 ANSWER handwritten author{f["author"]}">{f["person"]}</span></p>'
            f'<p><span class="PAIR_2 QUESTION">City:</span> '
            f'<span class="ANSWER PAIR_2">{f["city"]}</span></p>'
            f'<p><span class="PAIR_3 QUESTION">Date:</span> '
            f'<span class="PAIR_3 ANSWER">{f["date"]}</span></p>'
            + _visuals(f))
    return _shell(body, plan.multi_page)


def _kie_flat(plan: DocPlan, f: dict) -> str:
    body = (f"<h1>{escape(f['company'])}</h1><p>{f['city']}</p>"
            f"<p>Receipt {f['invoice']} on {f['date']}</p>"
            f"<table><tr><td>{escape(f['item'])}</td><td>{f['amount']}</td></tr></table>"
            f"<p>Cashier: <span class=\"handwritten author1\">{f['person']}</span></p>"
            + _visuals(f))
    gt = {"company": f["company"], "date": f["date"], "total": f["amount"]}
    if plan.gt_failure:
        gt["address"] = _ABSENT
    return _shell(body, plan.multi_page, gt)


def _dla(plan: DocPlan, f: dict) -> str:
    bad = '<div class="LE-HOLOGRAM">Security strip</div>' if plan.gt_failure else ""
    body = (f'<h1 class="LE-TITLE">{escape(f["company"])} annual summary</h1>'
            f'<p class="LE-TEXT">Operations in {f["city"]} grew steadily. Orders of '
            f'{escape(f["item"].lower())} doubled compared with last year.</p>'
            f'<div class="LE-TABLE"><table><tr><td>Quarter</td><td>Revenue</td></tr>'
            f'<tr><td>Q1</td><td>{f["amount"]}</td></tr></table></div>'
            f'<div data-placeholder="figure" data-content="bar chart of revenue" '
            'style="width:80mm;height:40mm"></div>'
            f'<p class="LE-TEXT">Prepared by <span class="handwritten author1">{f["person"]}</span></p>'
            + bad)
    return _shell(body, plan.multi_page)


_BUILDERS: dict[str, Callable[[DocPlan, dict], str]] = {
    "vqa": _vqa, "cls": _cls, "kie": _kie, "kie_flat": _kie_flat, "dla": _dla,
}


@dataclass
class StubBackend:
    """Canned multi-document responses keyed by fixture.

    ``gt_failure`` and ``multi_page`` are ``(period, phase)`` rules over the
    global document index. ``transient_failures`` maps a call index to the
    number of transient errors raised before it succeeds; ``down`` makes
    every call fail.
    """

    fixture: str = "vqa"
    gt_failure: tuple[int, int] | None = None
    multi_page: tuple[int, int] | None = None
    transient_failures: dict[int, int] = field(default_factory=dict)
    down: bool = False
    name: str = "stub"
    _attempts: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.fixture not in _BUILDERS:
            raise ValueError(f"unknown stub fixture {self.fixture!r}")

    def plan(self, call_index: int, m: int) -> list[DocPlan]:
        out = []
        for j in range(m):
            g = call_index * m + j
            out.append(DocPlan(g, _hit(g, self.gt_failure), _hit(g, self.multi_page)))
        return out

    def complete(self, prompt: str, images: Sequence[bytes], *,
                 request_id: str | None = None) -> BackendResponse:
        if self.down:
            raise TransientBackendError("stub backend is down")
        match = _M_PATTERN.search(prompt)
        if match is None:
            raise BackendError("prompt carries no document count")
        m = int(match.group(1))
        call = _CALL_PATTERN.search(request_id or "0")
        call_index = int(call.group(1)) if call else 0
        seen = self._attempts.get(call_index, 0)
        if seen < self.transient_failures.get(call_index, 0):
            self._attempts[call_index] = seen + 1
            raise TransientBackendError(f"planted transient failure {seen + 1}")
        blocks = []
        for n, plan in enumerate(self.plan(call_index, m), 1):
            rng = np.random.default_rng([plan.index, 7919])
            html = _BUILDERS[self.fixture](plan, _fields(rng, plan.index))
            blocks.append(f"{n}. <HTML>{html}</HTML>")
        text = "\n".join(blocks)
        return BackendResponse(text, input_tokens=len(prompt) // 4 + 85 * len(images),
                               output_tokens=len(text) // 4)
