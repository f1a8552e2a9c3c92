"""Placeholder canonicalization and rendering of stamps, barcodes and bank assets.

Barcodes use Code 128: subset C for digit pairs (with a switch to subset B for
a trailing odd digit), modulo-103 checksum, 10-module quiet zones.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .documents import Box, LayoutRegion, LayoutRegions

logger = logging.getLogger(__name__)

CANONICAL_TYPES = ("stamp", "logo", "figure", "barcode", "photo")
_ALIASES = {
    "chart": "figure", "diagram": "figure", "plot": "figure", "graph": "figure",
    "illustration": "figure", "infographic": "figure",
    "image": "photo",
    "seal": "stamp",
}
BANK_TYPES = ("logo", "figure", "photo")
REGION_COVER_IOU = 0.5


def map_type(raw: str) -> str | None:
    """Canonical placeholder type, or ``None`` if the raw type is unknown."""
    key = (raw or "").strip().casefold()
    if key in CANONICAL_TYPES:
        return key
    return _ALIASES.get(key)


@dataclass
class Overlay:
    image: Image.Image
    box: Box
    z_order: int = 0
    kind: str = ""
    meta: dict = field(default_factory=dict)


# --- stamps -----------------------------------------------------------------

STAMP_COLORS = {"red": (200, 30, 40), "blue": (30, 60, 190), "violet": (120, 40, 160)}


def _font(size: int) -> ImageFont.FreeTypeFont:
    return ImageFont.load_default(size=max(int(size), 6))


def _fit_lines(draw: ImageDraw.ImageDraw, text: str, max_w: float, max_h: float):
    """Largest font size at which ``text`` wraps into the box."""
    words = text.split()
    for size in range(int(max_h), 5, -1):
        font = _font(size)
        lines, cur = [], ""
        for w in words:
            trial = f"{cur} {w}".strip()
            if draw.textlength(trial, font=font) <= max_w or not cur:
                cur = trial
            else:
                lines.append(cur)
                cur = w
        if cur:
            lines.append(cur)
        widest = max((draw.textlength(ln, font=font) for ln in lines), default=0)
        if widest <= max_w and len(lines) * size * 1.15 <= max_h:
            return font, lines, size
    return _font(6), words, 6


def render_stamp(content: str, size: tuple[int, int], rng: np.random.Generator) -> Image.Image:
    """Office-style ink stamp on a transparent background."""
    w, h = int(size[0]), int(size[1])
    if w <= 0 or h <= 0:
        raise ValueError("stamp box must be positive")
    shape = "circle" if rng.random() < 0.5 else "rect"
    color_name = ["red", "blue", "violet"][int(rng.integers(3))]
    angle = float(rng.uniform(-15, 15))
    color = STAMP_COLORS[color_name]
    img = Image.new("RGBA", (w, h), (0, 0, 0, 0))
    draw = ImageDraw.Draw(img)
    stroke = max(1, round(min(w, h) * 0.04))
    pad = stroke + 1
    if shape == "circle":
        draw.ellipse([pad, pad, w - 1 - pad, h - 1 - pad], outline=color + (235,), width=stroke)
        inner_w, inner_h = (w - 2 * pad) * 0.68, (h - 2 * pad) * 0.5
    else:
        draw.rounded_rectangle([pad, pad, w - 1 - pad, h - 1 - pad], radius=min(w, h) // 8,
                               outline=color + (235,), width=stroke)
        inner_w, inner_h = w - 4 * pad, h - 4 * pad
    if content.strip() and inner_w > 4 and inner_h > 4:
        font, lines, fsize = _fit_lines(draw, content.upper(), inner_w, inner_h)
        total = len(lines) * fsize * 1.15
        y = (h - total) / 2
        for line in lines:
            lw = draw.textlength(line, font=font)
            draw.text(((w - lw) / 2, y), line, font=font, fill=color + (235,))
            y += fsize * 1.15
    rotated = img.rotate(angle, resample=Image.Resampling.BICUBIC, expand=False)
    rotated.info.update({"shape": shape, "color": color_name, "angle": angle})
    return rotated


# --- barcodes -----------------------------------------------------------------

CODE128_PATTERNS = (
    "212222", "222122", "222221", "121223", "121322", "131222", "122213", "122312", "132212",
    "221213", "221312", "231212", "112232", "122132", "122231", "113222", "123122", "123221",
    "223211", "221132", "221231", "213212", "223112", "312131", "311222", "321122", "321221",
    "312212", "322112", "322211", "212123", "212321", "232121", "111323", "131123", "131321",
    "112313", "132113", "132311", "211313", "231113", "231311", "112133", "112331", "132131",
    "113123", "113321", "133121", "313121", "211331", "231131", "213113", "213311", "213131",
    "311123", "311321", "331121", "312113", "312311", "332111", "314111", "221411", "431111",
    "111224", "111422", "121124", "121421", "141122", "141221", "112214", "112412", "122114",
    "122411", "142112", "142211", "241211", "221114", "413111", "241112", "134111", "111242",
    "121142", "121241", "114212", "124112", "124211", "411212", "421112", "421211", "212141",
    "214121", "412121", "111143", "111341", "131141", "114113", "114311", "411113", "411311",
    "113141", "114131", "311141", "411131", "211412", "211214", "211232", "2331112",
)
START_C, CODE_B, STOP = 105, 100, 106
QUIET_ZONE = 10


def code128c_values(digits: str) -> list[int]:
    """Symbol values including start, checksum and stop."""
    if not digits or not digits.isdigit() or not digits.isascii():
        raise ValueError(f"digits only, got {digits!r}")
    values = [START_C]
    pairs, tail = digits[: len(digits) // 2 * 2], digits[len(digits) // 2 * 2:]
    values += [int(pairs[i:i + 2]) for i in range(0, len(pairs), 2)]
    if tail:
        values += [CODE_B, ord(tail) - 32]
    check = (values[0] + sum(i * v for i, v in enumerate(values[1:], 1))) % 103
    return values + [check, STOP]


def code128c_modules(digits: str) -> list[int]:
    """Module sequence (1 = bar, 0 = space) including both quiet zones."""
    modules = [0] * QUIET_ZONE
    for v in code128c_values(digits):
        for k, width in enumerate(CODE128_PATTERNS[v]):
            modules += [1 if k % 2 == 0 else 0] * int(width)
    return modules + [0] * QUIET_ZONE


@dataclass
class BarcodeResult:
    image: Image.Image
    digits: str
    fallback: bool


def barcode_digits(content: str, rng: np.random.Generator | None = None) -> tuple[str, bool]:
    digits = "".join((content or "").split())
    if digits and digits.isdigit() and digits.isascii():
        return digits, False
    if rng is None:
        seed = int.from_bytes(hashlib.sha256((content or "").encode()).digest()[:8], "big")
        rng = np.random.default_rng(seed)
    return "".join(str(int(d)) for d in rng.integers(0, 10, 12)), True


def render_barcode(content: str, size: tuple[int, int],
                   rng: np.random.Generator | None = None) -> BarcodeResult:
    w, h = int(size[0]), int(size[1])
    if w <= 0 or h <= 0:
        raise ValueError("barcode box must be positive")
    digits, fallback = barcode_digits(content, rng)
    modules = np.array(code128c_modules(digits), dtype=np.uint8)
    # nearest-neighbour stretch of the module row to the box width
    cols = np.minimum((np.arange(w) * len(modules)) // w, len(modules) - 1)
    row = np.where(modules[cols] == 1, 0, 255).astype(np.uint8)
    rgb = np.repeat(np.repeat(row[None, :, None], h, axis=0), 3, axis=2)
    alpha = np.full((h, w, 1), 255, dtype=np.uint8)
    img = Image.fromarray(np.concatenate([rgb, alpha], axis=2), "RGBA")
    return BarcodeResult(img, digits, fallback)


# --- image banks --------------------------------------------------------------

class EmptyBankError(LookupError):
    pass


_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp", ".tif", ".tiff"}


class AssetBank:
    """Directories of rasters keyed by canonical type."""

    def __init__(self, directories: Mapping[str, str | Path] | None = None):
        self.directories = {k: Path(v) for k, v in (directories or {}).items()}
        self._cache: dict[str, list[Path]] = {}

    def files(self, kind: str) -> list[Path]:
        if kind not in self._cache:
            d = self.directories.get(kind)
            found = []
            if d is not None and d.is_dir():
                found = sorted(p for p in d.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
            self._cache[kind] = found
        return self._cache[kind]


def pick_asset(bank: AssetBank, kind: str, rng: np.random.Generator) -> Image.Image:
    files = bank.files(kind)
    if not files:
        raise EmptyBankError(f"no assets for {kind!r}")
    path = files[int(rng.integers(len(files)))]
    with Image.open(path) as im:
        img = im.convert("RGBA")
    img.info["source"] = path.name
    return img


def fit_into(img: Image.Image, size: tuple[int, int]) -> Image.Image:
    """Aspect-preserving resize centred on a transparent canvas of ``size``."""
    w, h = size
    scale = min(w / img.width, h / img.height)
    nw, nh = max(1, round(img.width * scale)), max(1, round(img.height * scale))
    canvas = Image.new("RGBA", (w, h), (0, 0, 0, 0))
    canvas.paste(img.resize((nw, nh), Image.Resampling.LANCZOS), ((w - nw) // 2, (h - nh) // 2))
    return canvas


# --- compositing ---------------------------------------------------------------

def composite(page: Image.Image, overlays: Sequence[Overlay]) -> Image.Image:
    """Alpha-composite overlays onto a copy of ``page`` in ascending z order."""
    out = page.convert("RGBA")
    for ov in sorted(overlays, key=lambda o: o.z_order):
        box = ov.box.clamp(out.width, out.height)
        if box.area == 0:
            continue
        img = ov.image.convert("RGBA")
        if img.size != (ov.box.width, ov.box.height):
            img = img.resize((max(ov.box.width, 1), max(ov.box.height, 1)), Image.Resampling.LANCZOS)
        crop = img.crop((box.x0 - ov.box.x0, box.y0 - ov.box.y0,
                         box.x1 - ov.box.x0, box.y1 - ov.box.y0))
        out.alpha_composite(crop, (box.x0, box.y0))
    return out.convert(page.mode) if page.mode != "RGBA" else out


# --- DLA ground truth -----------------------------------------------------------

FIGURE_LABELS = ("LE-FIGURE", "LE-PICTURE")


def figure_label(vocabulary: Iterable[str]) -> str | None:
    vocab = {v.upper() for v in vocabulary}
    for label in FIGURE_LABELS:
        if label in vocab:
            return label
    return None


def augment_dla_gt(gt: LayoutRegions, placed: Sequence[Overlay], vocabulary: Iterable[str],
                   task: str = "DLA") -> LayoutRegions:
    """Add a figure/picture region for each placed asset no existing region covers."""
    if task.upper() != "DLA":
        return gt
    label = figure_label(vocabulary)
    if label is None:
        return gt
    regions = list(gt.regions)
    for ov in placed:
        if ov.kind not in BANK_TYPES:
            continue
        covered = any(r.label.upper() in FIGURE_LABELS and r.box is not None
                      and r.box.iou(ov.box) >= REGION_COVER_IOU for r in regions)
        if not covered:
            regions.append(LayoutRegion(label, None, ov.box))
    return LayoutRegions(regions)


def mm_to_px(mm: float, dpi: int = 96) -> int:
    return int(math.ceil(mm * dpi / 25.4))
