import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docdjinn.documents import Box, DocumentRejected, HandwritingRegion, RejectReason, SynthesizedDocument, WordBox
from docdjinn.htmlutil import css_px
from docdjinn.rendering import (
    ADVANCE,
    BASE_FONT_PX,
    MARGIN,
    SidecarOCR,
    SimpleLayoutRenderer,
    extract_text_boxes,
    measure_page,
    plant_sidecar,
    render,
    tag_refs,
)
from docdjinn.synthesis import extract_micro_annotations


def page(body, style="width:800px"):
    return f'<!DOCTYPE html><html><body style="{style}">{body}</body></html>'


@pytest.mark.parametrize("value,px", [("10px", 10), ("25.4mm", 96), ("1in", 96), ("72pt", 96),
                                      ("2em", 32), ("2.54cm", 96), ("auto", None), (None, None)])
def test_css_px(value, px):
    got = css_px(value)
    assert got == pytest.approx(px) if px is not None else got is None


def test_measure_declared_size():
    assert measure_page(page("<p>short</p>", "width:800px;height:1000px")) == (800, 1000)


def test_measure_overflow_grows():
    html = page("<div style='height:1500px'>tall</div>", "width:800px;height:1000px")
    w, h = measure_page(html)
    assert w >= 800 and h >= 1000 and h == 1500 + 2 * MARGIN


def test_unparseable_rejected():
    for bad in ("", "just prose without tags"):
        with pytest.raises(DocumentRejected) as exc:
            render(bad)
        assert exc.value.reason is RejectReason.RENDER_FAIL


def test_one_table_region():
    html = page('<h1>T</h1><div class="LE-TABLE"><table><tr><td>a</td><td>b</td></tr></table></div>')
    res = render(html)
    regions = extract_micro_annotations(html, ["LE-TABLE"]).regions
    assert len(regions) == 1 and regions[0].ref in res.element_boxes
    assert res.page_count == 1


def test_handwritten_span_fixed_font_and_word_boxes():
    html = page('<p style="font-size:9px">Name: <span class="handwritten author2">John Doe</span></p>')
    res = render(html)
    ref = "e3"  # html, body, p, span
    words = res.words_in(ref)
    assert [w.text for w in words] == ["John", "Doe"]
    assert all(w.box.height == 25 for w in words)  # 20 px font x 1.25
    assert all(res.element_boxes[ref].contains(w.box) for w in words)


def test_two_pages():
    res = SimpleLayoutRenderer(max_page_height=1000).render(page("<div style='height:1500px'></div>"))
    assert res.page_count == 2 and res.page_size[1] == 1000
    assert all(Box(0, 0, *res.page_size).contains(b) for b in res.element_boxes.values())


def test_explicit_page_size():
    res = render(page("<div style='height:900px'>x</div>"), page_size=(800, 500))
    assert res.page_count == 2 and res.page_image.size == (800, 500)


def test_zero_area_elements_missing():
    res = render(page("<div class='LE-TEXT'></div><p>x</p>"))
    assert "e2" not in res.element_boxes and "e3" in res.element_boxes


def test_fixed_advance_metrics():
    res = render(page("<p>abcd efg</p>"))
    a, b = res.word_boxes
    assert a.box.x0 == MARGIN and a.box.width == math.ceil(4 * ADVANCE * BASE_FONT_PX)  # boxes round outward
    assert b.box.x0 == int(MARGIN + 5 * ADVANCE * BASE_FONT_PX)


def test_wrapping_and_table_columns():
    words = " ".join(["word"] * 60)
    res = render(page(f"<p>{words}</p><table><tr><td>l</td><td>r</td></tr></table>"))
    lines = {w.box.y0 for w in res.word_boxes if w.text == "word"}
    assert len(lines) > 1
    assert max(w.box.x1 for w in res.word_boxes) <= 800 - MARGIN
    left, right = [w for w in res.word_boxes if w.text in "lr"]
    assert right.box.x0 - left.box.x0 == pytest.approx((800 - 2 * MARGIN) / 2, abs=1)


def test_absolute_placeholder_box():
    html = page('<p>x</p><div data-placeholder="stamp" style="position:absolute;top:100px;left:500px;width:40mm;height:20mm"></div>')
    res = render(html)
    assert res.element_boxes["e3"] == Box(500, 100, 652, 176)


def test_doctype_and_scripts_invisible():
    res = render(page('<p>seen</p><script>var hidden = 1;</script><!-- gone -->'))
    assert [w.text for w in res.word_boxes] == ["seen"]


_TEXT = st.text(alphabet="abc xyz<>&;", max_size=40)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["p", "div", "h2", "span", "li"]), _TEXT), max_size=8))
def test_render_deterministic_and_in_bounds(parts):
    html = page("".join(f"<{t} class='LE-TEXT'>{x}</{t}>" for t, x in parts))
    r1 = SimpleLayoutRenderer(draw=False).render(html)
    r2 = SimpleLayoutRenderer(draw=False).render(html)
    assert r1.element_boxes == r2.element_boxes and r1.word_boxes == r2.word_boxes
    pb = Box(0, 0, *r1.page_size)
    for b in list(r1.element_boxes.values()) + [w.box for w in r1.word_boxes]:
        assert pb.contains(b) and b.x0 <= b.x1 and b.y0 <= b.y1 and b.area > 0


def test_tag_refs_matches_parser_order():
    tagged = tag_refs(page("<p>a<b>b</b></p>"))
    assert 'data-djinn-ref="e0"' in tagged and 'data-djinn-ref="e3"' in tagged


# --- text extraction routing ---

def _doc(html, **kw):
    d = SynthesizedDocument("d", html, **kw)
    d.render = render(html)
    return d


class ExplodingOCR:
    def recognize(self, image):
        raise RuntimeError("engine crashed")


def test_typeset_route_uses_render_layer():
    d = _doc(page("<p>one two three</p>"))
    words = extract_text_boxes(d, ExplodingOCR())
    assert [w.text for w in words] == ["one", "two", "three"]


def test_handwriting_route_uses_ocr():
    d = _doc(page("<p>x</p>"), handwriting_regions=[HandwritingRegion("e2", "x")])
    planted = [WordBox("planted", Box(1, 2, 3, 4), 0.9)]
    plant_sidecar(d.render.page_image, planted)
    assert extract_text_boxes(d, SidecarOCR()) == planted


def test_ocr_failure_rejects():
    d = _doc(page("<p>x</p>"), handwriting_regions=[HandwritingRegion("e2", "x")])
    for ocr in (ExplodingOCR(), SidecarOCR(), None):
        with pytest.raises(DocumentRejected) as exc:
            extract_text_boxes(d, ocr)
        assert exc.value.reason is RejectReason.OCR_FAIL


def test_page_image_matches_size():
    res = render(page("<h1>Title</h1>"))
    arr = np.asarray(res.page_image)
    assert arr.shape[:2] == (res.page_size[1], res.page_size[0]) and arr.min() < 128
