"""HTML to single-page raster with element and word boxes.

``SimpleLayoutRenderer`` is a deterministic block/inline layout engine for a
small HTML subset (fixed-advance glyphs, stacked blocks, column tables,
absolute positioning). ``BrowserRenderer`` drives headless Chromium through
Playwright when it is installed.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Protocol

from bs4 import NavigableString, Tag
from bs4.element import PreformattedString
from PIL import Image, ImageDraw, ImageFont

from .documents import Box, DocumentRejected, RejectReason, SynthesizedDocument, WordBox
from .htmlutil import class_tokens, css_px, indexed_elements, parse_html, parse_style

logger = logging.getLogger(__name__)

DEFAULT_WIDTH = 794  # A4 width at 96 dpi
DEFAULT_MAX_PAGE_HEIGHT = 2246  # two A4 heights; taller content paginates
MARGIN = 24
BASE_FONT_PX = 16.0
ADVANCE = 0.6
LINE_HEIGHT = 1.25
HANDWRITING_FONT_PX = 20.0
CELL_PAD = 4
LIST_INDENT = 24

BLOCK_TAGS = {
    "html", "body", "div", "p", "section", "article", "main", "header", "footer", "nav",
    "aside", "form", "fieldset", "address", "blockquote", "pre", "figure", "figcaption",
    "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "li", "dl", "dt", "dd", "table",
    "hr", "center",
}
SKIP_TAGS = {"head", "script", "style", "title", "meta", "link", "noscript", "template"}
HEADING_PX = {"h1": 32.0, "h2": 24.0, "h3": 18.72, "h4": 16.0, "h5": 13.28, "h6": 10.72}


@dataclass
class RenderResult:
    page_count: int
    page_size: tuple[int, int]
    page_image: Image.Image | None
    element_boxes: dict[str, Box]
    word_boxes: list[WordBox]
    element_words: dict[str, list[int]] = field(default_factory=dict)

    def words_in(self, ref: str) -> list[WordBox]:
        return [self.word_boxes[i] for i in self.element_words.get(ref, [])]


class Renderer(Protocol):
    def measure(self, html: str) -> tuple[int, int]: ...

    def render(self, html: str, page_size: tuple[int, int] | None = None) -> RenderResult: ...


# --- deterministic layout ---------------------------------------------------------

@dataclass
class _Token:
    text: str | None  # None for atomic boxes
    font: float
    owners: tuple[str, ...]
    w: float
    h: float
    x: float = 0.0
    y: float = 0.0


@dataclass
class _Break:
    font: float


class _Layout:
    def __init__(self, soup, width: int, margin: int, hw_font: float):
        self.soup = soup
        self.width = width
        self.margin = margin
        self.hw_font = hw_font
        self.refs = {id(tag): ref for ref, tag in indexed_elements(soup)}
        self.rects: dict[str, list[float]] = {}
        self.tokens: list[_Token] = []
        self.cells: list[str] = []
        self.rules: list[tuple[float, float, float]] = []
        self._owners: dict[int, tuple[str, ...]] = {}

    def owners(self, tag) -> tuple[str, ...]:
        key = id(tag)
        if key not in self._owners:
            parent = tag.parent
            chain = self.owners(parent) if isinstance(parent, Tag) else ()
            ref = self.refs.get(key)
            self._owners[key] = chain + ((ref,) if ref else ())
        return self._owners[key]

    def _grow(self, ref: str, x0: float, y0: float, x1: float, y1: float) -> None:
        r = self.rects.get(ref)
        if r is None:
            self.rects[ref] = [x0, y0, x1, y1]
        else:
            r[0], r[1], r[2], r[3] = min(r[0], x0), min(r[1], y0), max(r[2], x1), max(r[3], y1)

    @staticmethod
    def _is_hw(tag: Tag) -> bool:
        return "handwritten" in (t.casefold() for t in class_tokens(tag))

    def font_for(self, tag: Tag, parent_font: float, hw: bool) -> float:
        if hw:
            return self.hw_font
        font = HEADING_PX.get(tag.name, parent_font) if tag.name in HEADING_PX else parent_font
        if tag.name == "small":
            font = parent_font * 0.83
        size = css_px(parse_style(tag.get("style")).get("font-size"), em=parent_font)
        return size if size and size > 0 else font

    def is_block(self, tag: Tag) -> bool:
        display = parse_style(tag.get("style")).get("display", "")
        if display in ("inline", "inline-block"):
            return False
        return tag.name in BLOCK_TAGS or tag.name in ("tr", "td", "th") or display == "block"

    # inline collection
    def collect(self, node, font: float, hw: bool, out: list) -> None:
        for child in node.children:
            if isinstance(child, Tag) and child.name in SKIP_TAGS:
                continue
            self._collect_one(node, child, font, hw, out)

    def _atom_size(self, tag: Tag, font: float):
        style = parse_style(tag.get("style"))
        w = css_px(style.get("width"), em=font)
        h = css_px(style.get("height"), em=font)
        if tag.name == "img":
            w = w or css_px(tag.get("width")) or 100.0
            h = h or css_px(tag.get("height")) or 60.0
        if w is None or h is None or (tag.get("data-placeholder") is None and tag.name != "img"):
            return None
        return max(w, 0.0), max(h, 0.0)

    def flow(self, tokens: list, x: float, y: float, width: float) -> float:
        lines: list[list[_Token]] = []
        heights: list[float] = []
        cur: list[_Token] = []
        cx = 0.0
        for tok in tokens:
            if isinstance(tok, _Break):
                lines.append(cur)
                heights.append(LINE_HEIGHT * tok.font)
                cur, cx = [], 0.0
                continue
            space = ADVANCE * tok.font if cur else 0.0
            if cur and cx + space + tok.w > width:
                lines.append(cur)
                heights.append(0.0)
                cur, cx, space = [], 0.0, 0.0
            tok.x = cx + space
            cx = tok.x + tok.w
            cur.append(tok)
        if cur:
            lines.append(cur)
            heights.append(0.0)
        for line, min_h in zip(lines, heights):
            lh = max([t.h for t in line] + [min_h])
            for t in line:
                t.x += x
                t.y = y + lh - t.h
                self.tokens.append(t)
                for ref in t.owners:
                    self._grow(ref, t.x, t.y, t.x + t.w, t.y + t.h)
            y += lh
        return y

    # block layout
    def block(self, tag: Tag, x: float, y: float, width: float, font: float, hw: bool) -> float:
        style = parse_style(tag.get("style"))
        hw = hw or self._is_hw(tag)
        font = self.font_for(tag, font, hw)
        ref = self.refs.get(id(tag))
        sized = tag.name not in ("html", "body")
        if style.get("position") in ("absolute", "fixed"):
            left = css_px(style.get("left"), em=font)
            top = css_px(style.get("top"), em=font)
            ax = left if left is not None else x
            ay = top if top is not None else y
            aw = (css_px(style.get("width"), em=font) if sized else None) or max(width - (ax - x), 0.0)
            self._block_body(tag, ref, style, ax, ay, aw, font, hw, sized)
            return y
        if sized:
            declared_w = css_px(style.get("width"), em=font)
            if declared_w is not None:
                width = declared_w
        return self._block_body(tag, ref, style, x, y, width, font, hw, sized)

    def _block_body(self, tag, ref, style, x, y, width, font, hw, sized) -> float:
        if tag.name == "table":
            bottom = self.table(tag, x, y, width, font, hw)
        elif tag.name == "hr":
            self.rules.append((x, y + 4, x + width))
            bottom = y + 8
        else:
            indent = LIST_INDENT if tag.name in ("ul", "ol") else 0
            pad = css_px(style.get("padding"), em=font) or 0.0
            bottom = self.children(tag, x + indent + pad, y + pad, width - indent - 2 * pad, font, hw) + pad
        declared_h = css_px(style.get("height"), em=font) if sized else None
        if declared_h is not None:
            bottom = max(bottom, y + declared_h)
        if ref is not None and bottom > y and width > 0:
            self._grow(ref, x, y, x + width, bottom)
        if tag.name in HEADING_PX or tag.name == "p":
            bottom += 0.5 * font
        return bottom

    def children(self, node, x: float, y: float, width: float, font: float, hw: bool) -> float:
        run: list = []
        for child in node.children:
            if isinstance(child, Tag) and child.name in SKIP_TAGS:
                continue
            if isinstance(child, Tag) and child.name != "br" and self.is_block(child):
                if run:
                    y = self.flow(run, x, y, width)
                    run = []
                y = self.block(child, x, y, width, font, hw)
            else:
                self._collect_one(node, child, font, hw, run)
        if run:
            y = self.flow(run, x, y, width)
        return y

    def _collect_one(self, parent, child, font, hw, run) -> None:
        if isinstance(child, PreformattedString):  # comments, doctype, CDATA
            return
        if isinstance(child, NavigableString):
            owners = self.owners(parent) if isinstance(parent, Tag) else ()
            for word in str(child).split():
                run.append(_Token(word, font, owners, len(word) * ADVANCE * font, LINE_HEIGHT * font))
            return
        if child.name == "br":
            run.append(_Break(font))
            return
        child_hw = hw or self._is_hw(child)
        child_font = self.font_for(child, font, child_hw)
        atom = self._atom_size(child, child_font)
        if atom is not None:
            run.append(_Token(None, child_font, self.owners(child), *atom))
        else:
            self.collect(child, child_font, child_hw, run)

    def table(self, tag: Tag, x: float, y: float, width: float, font: float, hw: bool) -> float:
        rows = [tr for tr in tag.find_all("tr") if tr.find_parent("table") is tag]

        def span(cell):
            try:
                return max(int(cell.get("colspan", 1)), 1)
            except (TypeError, ValueError):
                return 1

        grid = [tr.find_all(["td", "th"], recursive=False) for tr in rows]
        ncols = max([sum(span(c) for c in cells) for cells in grid] + [1])
        col_w = width / ncols
        for tr, cells in zip(rows, grid):
            cx, bottom, placed = x, y, []
            for cell in cells:
                cw = col_w * span(cell)
                cell_hw = hw or self._is_hw(cell)
                cfont = self.font_for(cell, font, cell_hw)
                end = self.children(cell, cx + CELL_PAD, y + CELL_PAD, cw - 2 * CELL_PAD, cfont, cell_hw) + CELL_PAD
                end = max(end, y + LINE_HEIGHT * cfont + 2 * CELL_PAD)
                placed.append((cell, cx, cw))
                bottom = max(bottom, end)
                cx += cw
            for cell, cx0, cw in placed:
                ref = self.refs.get(id(cell))
                if ref:
                    self._grow(ref, cx0, y, cx0 + cw, bottom)
                    self.cells.append(ref)
            tr_ref = self.refs.get(id(tr))
            if tr_ref and bottom > y:
                self._grow(tr_ref, x, y, x + width, bottom)
                for owner in self.owners(tr)[:-1]:
                    if owner in self.rects and owner != self.refs.get(id(tag)):
                        self._grow(owner, x, y, x + width, bottom)
            y = bottom
        return y

    def run(self) -> float:
        return self.children(self.soup, self.margin, self.margin, self.width - 2 * self.margin,
                             BASE_FONT_PX, False)


def _declared_page(soup) -> tuple[float | None, float | None]:
    w = h = None
    for name in ("html", "body"):
        tag = soup.find(name)
        if tag is not None:
            style = parse_style(tag.get("style"))
            w = css_px(style.get("width")) or w
            h = css_px(style.get("height")) or h
    return w, h


def _floor_box(r) -> Box:
    return Box(int(math.floor(r[0])), int(math.floor(r[1])), int(math.ceil(r[2])), int(math.ceil(r[3])))


_FONT_CACHE: dict[int, ImageFont.FreeTypeFont] = {}


def _font(px: float):
    key = max(int(round(px)), 6)
    if key not in _FONT_CACHE:
        _FONT_CACHE[key] = ImageFont.load_default(size=key)
    return _FONT_CACHE[key]


class SimpleLayoutRenderer:
    """Deterministic renderer for a constrained HTML subset."""

    name = "simple"

    def __init__(self, default_width: int = DEFAULT_WIDTH, margin: int = MARGIN,
                 max_page_height: int = DEFAULT_MAX_PAGE_HEIGHT,
                 handwriting_font_px: float = HANDWRITING_FONT_PX, draw: bool = True):
        self.default_width = default_width
        self.margin = margin
        self.max_page_height = max_page_height
        self.handwriting_font_px = handwriting_font_px
        self.draw = draw

    def _layout(self, html: str):
        try:
            soup = parse_html(html)
        except Exception as exc:  # noqa: BLE001 - any parser failure is a render failure
            raise DocumentRejected(RejectReason.RENDER_FAIL, f"parse error: {exc}") from None
        if soup.find(True) is None:
            raise DocumentRejected(RejectReason.RENDER_FAIL, "no elements")
        dw, dh = _declared_page(soup)
        width = int(math.ceil(dw)) if dw else self.default_width
        layout = _Layout(soup, width, self.margin, self.handwriting_font_px)
        try:
            bottom = layout.run()
        except (ValueError, TypeError, RecursionError) as exc:
            raise DocumentRejected(RejectReason.RENDER_FAIL, f"layout error: {exc}") from None
        extent_x = max([r[2] for r in layout.rects.values()] + [0.0])
        extent_y = max([r[3] for r in layout.rects.values()] + [bottom])
        size = (max(width, int(math.ceil(extent_x))),
                max(int(math.ceil(dh)) if dh else 0, int(math.ceil(extent_y + self.margin))))
        return layout, size

    def measure(self, html: str) -> tuple[int, int]:
        return self._layout(html)[1]

    def render(self, html: str, page_size: tuple[int, int] | None = None) -> RenderResult:
        layout, (mw, mh) = self._layout(html)
        if page_size is None:
            pw = mw
            ph = min(mh, self.max_page_height)
        else:
            pw, ph = int(page_size[0]), int(page_size[1])
        if pw <= 0 or ph <= 0:
            raise ValueError("page size must be positive")
        page_count = max(1, math.ceil(mh / ph))

        element_boxes: dict[str, Box] = {}
        for ref, r in layout.rects.items():
            box = _floor_box(r).clamp(pw, ph)
            if box.area > 0:
                element_boxes[ref] = box
        words: list[WordBox] = []
        element_words: dict[str, list[int]] = {}
        for tok in layout.tokens:
            if tok.text is None:
                continue
            box = _floor_box((tok.x, tok.y, tok.x + tok.w, tok.y + tok.h)).clamp(pw, ph)
            if box.area == 0:
                continue
            idx = len(words)
            words.append(WordBox(tok.text, box))
            for ref in tok.owners:
                element_words.setdefault(ref, []).append(idx)

        image = self._paint(layout, pw, ph, element_boxes) if self.draw else None
        return RenderResult(page_count, (pw, ph), image, element_boxes, words, element_words)

    def _paint(self, layout: _Layout, w: int, h: int, boxes: dict[str, Box]) -> Image.Image:
        img = Image.new("RGB", (w, h), "white")
        draw = ImageDraw.Draw(img)
        for ref in layout.cells:
            if ref in boxes:
                b = boxes[ref]
                draw.rectangle([b.x0, b.y0, b.x1 - 1, b.y1 - 1], outline=(90, 90, 90))
        for x0, y, x1 in layout.rules:
            draw.line([(x0, y), (x1, y)], fill=(60, 60, 60))
        for tok in layout.tokens:
            if tok.text is None or tok.y >= h:
                continue
            draw.text((tok.x, tok.y + (tok.h - tok.font) / 2), tok.text, font=_font(tok.font), fill="black")
        return img


# --- browser backend ------------------------------------------------------------------

_BOXES_JS = """
() => {
  const out = {elements: {}, words: []};
  for (const el of document.querySelectorAll('[data-djinn-ref]')) {
    const r = el.getBoundingClientRect();
    out.elements[el.getAttribute('data-djinn-ref')] = [r.left + scrollX, r.top + scrollY, r.right + scrollX, r.bottom + scrollY];
  }
  const walker = document.createTreeWalker(document.body || document.documentElement, NodeFilter.SHOW_TEXT);
  const range = document.createRange();
  while (walker.nextNode()) {
    const node = walker.currentNode;
    const parent = node.parentElement;
    if (!parent || ['SCRIPT', 'STYLE'].includes(parent.tagName)) continue;
    const re = /\\S+/g; let m;
    while ((m = re.exec(node.data)) !== null) {
      range.setStart(node, m.index); range.setEnd(node, m.index + m[0].length);
      const r = range.getBoundingClientRect();
      if (r.width > 0 && r.height > 0) {
        const owners = [];
        for (let e = parent; e; e = e.parentElement) { const ref = e.getAttribute && e.getAttribute('data-djinn-ref'); if (ref) owners.push(ref); }
        out.words.push([m[0], r.left + scrollX, r.top + scrollY, r.right + scrollX, r.bottom + scrollY, owners]);
      }
    }
  }
  return out;
}
"""


def tag_refs(html: str) -> str:
    """Serialize ``html`` with every element carrying its ``e<N>`` reference."""
    soup = parse_html(html)
    for ref, tag in indexed_elements(soup):
        tag["data-djinn-ref"] = ref
    return str(soup)


class BrowserRenderer:
    """Headless Chromium via Playwright (optional dependency)."""

    name = "browser"

    def __init__(self, max_page_height: int = DEFAULT_MAX_PAGE_HEIGHT, default_width: int = DEFAULT_WIDTH):
        try:
            from playwright.sync_api import sync_playwright
        except ImportError as exc:
            raise RuntimeError("BrowserRenderer needs the 'browser' extra (playwright)") from exc
        self._pw = sync_playwright().start()
        self._browser = self._pw.chromium.launch()
        self.max_page_height = max_page_height
        self.default_width = default_width

    def close(self) -> None:
        self._browser.close()
        self._pw.stop()

    def _page(self, html: str, width: int):
        page = self._browser.new_page(viewport={"width": width, "height": 1000})
        page.set_content(tag_refs(html), wait_until="load")
        return page

    def measure(self, html: str) -> tuple[int, int]:
        try:
            page = self._page(html, self.default_width)
            try:
                w, h = page.evaluate(
                    "() => [document.documentElement.scrollWidth, document.documentElement.scrollHeight]")
            finally:
                page.close()
        except Exception as exc:  # noqa: BLE001
            raise DocumentRejected(RejectReason.RENDER_FAIL, str(exc)) from None
        return int(math.ceil(w)), int(math.ceil(h))

    def render(self, html: str, page_size: tuple[int, int] | None = None) -> RenderResult:
        import io

        mw, mh = self.measure(html)
        pw, ph = page_size or (mw, min(mh, self.max_page_height))
        try:
            page = self._page(html, pw)
            try:
                pdf = page.pdf(width=f"{pw}px", height=f"{ph}px", print_background=True)
                page.set_viewport_size({"width": pw, "height": ph})
                png = page.screenshot(clip={"x": 0, "y": 0, "width": pw, "height": ph})
                data = page.evaluate(_BOXES_JS)
            finally:
                page.close()
        except Exception as exc:  # noqa: BLE001
            raise DocumentRejected(RejectReason.RENDER_FAIL, str(exc)) from None
        page_count = max(1, pdf.count(b"/Type /Page") - pdf.count(b"/Type /Pages"))
        boxes = {}
        for ref, r in data["elements"].items():
            b = _floor_box(r).clamp(pw, ph)
            if b.area > 0:
                boxes[ref] = b
        words, element_words = [], {}
        for text, *r, owners in data["words"]:
            b = _floor_box(r).clamp(pw, ph)
            if b.area == 0:
                continue
            for ref in owners:
                element_words.setdefault(ref, []).append(len(words))
            words.append(WordBox(text, b))
        image = Image.open(io.BytesIO(png)).convert("RGB")
        return RenderResult(page_count, (pw, ph), image, boxes, words, element_words)


def get_renderer(name: str = "simple", **kwargs) -> Renderer:
    if name == "simple":
        return SimpleLayoutRenderer(**kwargs)
    if name == "browser":
        return BrowserRenderer(**kwargs)
    raise ValueError(f"unknown renderer {name!r}")


def measure_page(html: str, renderer: Renderer | None = None) -> tuple[int, int]:
    return (renderer or SimpleLayoutRenderer()).measure(html)


def render(html: str, page_size: tuple[int, int] | None = None,
           renderer: Renderer | None = None) -> RenderResult:
    return (renderer or SimpleLayoutRenderer()).render(html, page_size)


# --- OCR -----------------------------------------------------------------------------

class OCRError(RuntimeError):
    pass


class OCRBackend(Protocol):
    def recognize(self, image: Image.Image) -> list[WordBox]: ...


SIDECAR_KEY = "djinn_words"


def plant_sidecar(image: Image.Image, words: list[WordBox]) -> None:
    image.info[SIDECAR_KEY] = json.dumps([[w.text, w.box.to_list(), w.confidence] for w in words])


class SidecarOCR:
    """Test OCR: returns the words planted in the image metadata."""

    name = "sidecar"

    def recognize(self, image: Image.Image) -> list[WordBox]:
        raw = image.info.get(SIDECAR_KEY) if image is not None else None
        if raw is None:
            raise OCRError("image carries no sidecar words")
        return [WordBox(t, Box.from_list(b), float(c)) for t, b, c in json.loads(raw)]


def needs_ocr(doc: SynthesizedDocument) -> bool:
    return bool(doc.handwriting_regions) or any(p.box is not None for p in doc.placeholders)


def extract_text_boxes(doc: SynthesizedDocument, ocr: OCRBackend | None = None) -> list[WordBox]:
    """Words from the render layer for typeset pages, from OCR once ink or visuals were added."""
    if doc.render is None:
        raise ValueError(f"{doc.id} has not been rendered")
    if not needs_ocr(doc):
        return list(doc.render.word_boxes)
    if ocr is None:
        raise DocumentRejected(RejectReason.OCR_FAIL, "no OCR backend configured")
    try:
        return list(ocr.recognize(doc.render.page_image))
    except Exception as exc:  # noqa: BLE001 - backend failures of any kind
        raise DocumentRejected(RejectReason.OCR_FAIL, str(exc)) from None
