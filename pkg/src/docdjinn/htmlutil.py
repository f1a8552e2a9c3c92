"""Tolerant HTML parsing helpers and CSS length handling."""

from __future__ import annotations

import re

from bs4 import BeautifulSoup, Tag

DPI = 96
_LENGTH = re.compile(r"^\s*(-?\d+(?:\.\d+)?)\s*(px|mm|cm|in|pt|em)?\s*$", re.I)
_UNIT_PX = {"px": 1.0, "mm": DPI / 25.4, "cm": DPI / 2.54, "in": float(DPI), "pt": DPI / 72.0}


def parse_html(html: str) -> BeautifulSoup:
    return BeautifulSoup(html, "html.parser")


def indexed_elements(soup: BeautifulSoup) -> list[tuple[str, Tag]]:
    """Every element in document order with a stable ``e<N>`` reference."""
    return [(f"e{i}", tag) for i, tag in enumerate(soup.find_all(True))]


def class_tokens(tag: Tag) -> list[str]:
    cls = tag.get("class") or []
    if isinstance(cls, str):
        cls = cls.split()
    return [c for c in cls if c]


def parse_style(style: str | None) -> dict[str, str]:
    out: dict[str, str] = {}
    for decl in (style or "").split(";"):
        if ":" in decl:
            key, value = decl.split(":", 1)
            out[key.strip().lower()] = value.strip()
    return out


def css_px(value: str | None, em: float = 16.0) -> float | None:
    """Convert a CSS length to px at 96 DPI; ``None`` for auto/percentages/garbage."""
    if value is None:
        return None
    m = _LENGTH.match(value)
    if not m:
        return None
    number, unit = float(m.group(1)), (m.group(2) or "px").lower()
    if unit == "em":
        return number * em
    return number * _UNIT_PX[unit]


def element_text(tag: Tag) -> str:
    return " ".join(tag.get_text(" ", strip=True).split())
