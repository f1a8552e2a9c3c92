"""Word-level ink generation, baseline-aligned line composition and placement."""

from __future__ import annotations

import hashlib
import math
import zlib
from dataclasses import dataclass, replace
from typing import Callable, Protocol, Sequence

import numpy as np
from PIL import Image, ImageFilter

from .documents import Box, HandwritingRegion
from .visual_elements import Overlay

CANONICAL_SIZE = (128, 512)  # rows, cols
MAX_SEGMENT = 6
DEFAULT_TAU = 16
DEFAULT_WORD_SPACING = 32  # 0.25 x canonical height
DEFAULT_JITTER = 2
DEFAULT_WRITERS = tuple(range(1, 10))
INK_RGB = (22, 28, 60)


@dataclass
class InkImage:
    """Ink coverage raster.

    ``alpha`` is coverage in 0..255; ``ink`` optionally holds per-pixel ink
    intensity (0 = black). ``baseline`` is a row index when known.
    """

    alpha: np.ndarray
    ink: np.ndarray | None = None
    baseline: int | None = None

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.uint8)
        if self.alpha.ndim != 2 or 0 in self.alpha.shape:
            raise ValueError(f"alpha must be a non-empty 2-D array, got {self.alpha.shape}")
        if self.ink is not None:
            self.ink = np.asarray(self.ink, dtype=np.uint8)
            if self.ink.shape != self.alpha.shape:
                raise ValueError("ink and alpha shapes differ")

    @property
    def height(self) -> int:
        return self.alpha.shape[0]

    @property
    def width(self) -> int:
        return self.alpha.shape[1]

    def ink_or_default(self) -> np.ndarray:
        return self.ink if self.ink is not None else np.zeros_like(self.alpha)

    def to_rgba(self, rgb: tuple[int, int, int] = INK_RGB) -> Image.Image:
        ink = self.ink_or_default().astype(np.float64) / 255.0
        base = np.array(rgb, dtype=np.float64)
        color = base[None, None, :] + (255.0 - base[None, None, :]) * ink[..., None] * 0.5
        arr = np.dstack([np.clip(np.rint(color), 0, 255).astype(np.uint8), self.alpha])
        return Image.fromarray(arr, "RGBA")


# --- segmentation and baselines ---------------------------------------------------

def segment_word(text: str, max_len: int = MAX_SEGMENT) -> list[str]:
    """Split a word into ceil(L/max_len) contiguous, near-equal pieces (longer first)."""
    if not text:
        raise ValueError("empty word")
    if any(c.isspace() for c in text):
        raise ValueError("segment_word takes a single word")
    n = len(text)
    if n <= max_len:
        return [text]
    k = math.ceil(n / max_len)
    base, extra = divmod(n, k)
    out, pos = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        out.append(text[pos:pos + size])
        pos += size
    return out


class EmptyInkError(ValueError):
    pass


def column_bottoms(alpha: np.ndarray, tau: int = DEFAULT_TAU) -> np.ndarray:
    """Lowest row with alpha > tau for every column that has one."""
    mask = np.asarray(alpha) > tau
    has = mask.any(axis=0)
    if not has.any():
        raise EmptyInkError("no ink above threshold")
    h = mask.shape[0]
    from_bottom = np.argmax(mask[::-1, :], axis=0)
    return (h - 1 - from_bottom)[has]


def estimate_baseline(ink: InkImage | np.ndarray, tau: int = DEFAULT_TAU, p: float = 50) -> int:
    """Percentile of per-column lowest-ink rows (linear interpolation, then nearest row)."""
    alpha = ink.alpha if isinstance(ink, InkImage) else ink
    bottoms = column_bottoms(alpha, tau)
    value = float(np.percentile(bottoms, p, method="linear"))
    return int(math.floor(value + 0.5))


# --- generators --------------------------------------------------------------------

class HandwritingGenerator(Protocol):
    writers: Sequence[int]

    def generate(self, text: str, writer_id: int, seed: int) -> InkImage:
        """Canonical 128x512 ink raster for one word segment."""


_ASCENDERS = set("bdfhklt0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ!?&%$#@/\\|")
_DESCENDERS = set("gjpqy")


class StubHandwritingGenerator:
    """Procedural ink: sinusoid-modulated strokes sitting on a planted baseline.

    Every ink column touches the baseline except descender columns, so
    ``known baseline`` is exact for words without descenders.
    """

    def __init__(self, writers: Sequence[int] = DEFAULT_WRITERS, descenders: bool = True):
        self.writers = tuple(writers)
        self.descenders = descenders

    def _style(self, writer_id: int) -> tuple[int, int, float, float]:
        h = zlib.crc32(f"writer-{writer_id}".encode())
        x_height = 22 + h % 9
        char_w = 20 + (h >> 4) % 9
        phase = ((h >> 8) % 628) / 100.0
        slant = ((h >> 16) % 7 - 3) * 0.06
        return x_height, char_w, phase, slant

    def generate(self, text: str, writer_id: int, seed: int) -> InkImage:
        if writer_id not in self.writers:
            raise ValueError(f"unknown writer {writer_id}")
        rows, cols = CANONICAL_SIZE
        rng = np.random.default_rng([seed & 0xFFFFFFFF, writer_id, zlib.crc32(text.encode())])
        x_height, char_w, phase, slant = self._style(writer_id)
        baseline = int(rows * 0.56) + int(rng.integers(-10, 11))
        char_w = min(char_w, (cols - 16) // max(len(text), 1))
        width = char_w * len(text)
        x0 = (cols - width) // 2
        alpha = np.zeros((rows, cols), dtype=np.uint8)
        for ci, ch in enumerate(text):
            tall = ch in _ASCENDERS
            amp = x_height * (1.9 if tall else 1.0) * float(rng.uniform(0.85, 1.1))
            for dx in range(char_w):
                x = x0 + ci * char_w + dx
                t = dx / char_w
                top = baseline - amp * (0.55 + 0.45 * math.sin(2 * math.pi * t + phase + ci))
                top = int(round(top))
                shift = int(round((baseline - top) * slant))
                xs = min(max(x + shift, 0), cols - 1)
                alpha[max(top - 2, 0):top + 3, xs] = 255
                if abs(dx - char_w // 2) <= 2:
                    for y in range(top, baseline + 1):
                        xv = min(max(x + int(round((baseline - y) * slant)), 0), cols - 1)
                        alpha[y, xv] = 255
        inked = alpha.any(axis=0)
        alpha[baseline - 3:baseline + 1, inked] = 255
        if self.descenders:
            for ci, ch in enumerate(text):
                if ch not in _DESCENDERS:
                    continue
                depth = int(x_height * 0.9)
                cx = x0 + ci * char_w + char_w // 2
                alpha[baseline:min(baseline + depth, rows), max(cx - 2, 0):cx + 3] = 255
        ink = np.where(alpha > 0, rng.integers(10, 50, size=alpha.shape), 0).astype(np.uint8)
        return InkImage(alpha, ink, baseline)


class LatentDiffusionGenerator:
    """Adapter for a text+writer conditioned latent diffusion word model.

    The sampler and decoder are injected; this class fixes the inference
    constants and the latent scaling.
    """

    LATENT_DOWNSAMPLE = 8
    LATENT_SCALE = 0.18215
    STEPS = 30
    TEMPERATURE = 0.5

    def __init__(self, sampler: Callable[..., np.ndarray], decoder: Callable[[np.ndarray], np.ndarray],
                 writers: Sequence[int] = DEFAULT_WRITERS, steps: int = STEPS,
                 temperature: float = TEMPERATURE):
        self.sampler = sampler
        self.decoder = decoder
        self.writers = tuple(writers)
        self.steps = steps
        self.temperature = temperature

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        rows, cols = CANONICAL_SIZE
        return 4, rows // self.LATENT_DOWNSAMPLE, cols // self.LATENT_DOWNSAMPLE

    def generate(self, text: str, writer_id: int, seed: int) -> InkImage:
        if writer_id not in self.writers:
            raise ValueError(f"unknown writer {writer_id}")
        latents = self.sampler(text=text, writer_id=writer_id, seed=seed, steps=self.steps,
                               temperature=self.temperature, shape=self.latent_shape)
        gray = np.asarray(self.decoder(np.asarray(latents) / self.LATENT_SCALE), dtype=np.float64)
        if gray.shape != CANONICAL_SIZE:
            raise ValueError(f"decoder returned {gray.shape}, expected {CANONICAL_SIZE}")
        if gray.max() <= 1.0:
            gray = gray * 255.0
        gray = np.clip(gray, 0, 255)
        alpha = (255.0 - gray).astype(np.uint8)  # dark ink on white paper
        return InkImage(alpha, np.zeros_like(alpha))


def generate_word(backend: HandwritingGenerator, text: str, writer_id: int,
                  rng: np.random.Generator) -> InkImage:
    if writer_id not in backend.writers:
        raise ValueError(f"unknown writer {writer_id}")
    seed = int(rng.integers(0, 2**31 - 1))
    ink = backend.generate(text, writer_id, seed)
    if ink.alpha.shape != CANONICAL_SIZE:
        raise ValueError(f"generator returned {ink.alpha.shape}, expected {CANONICAL_SIZE}")
    return ink


def writer_for_author(doc_id: str, author_id: int, writers: Sequence[int]) -> int:
    """Stable (document, author) -> writer mapping."""
    digest = hashlib.sha256(f"{doc_id}\x00{author_id}".encode()).digest()
    return writers[int.from_bytes(digest[:8], "big") % len(writers)]


# --- composition ----------------------------------------------------------------

def crop(ink: InkImage, rows: slice, cols: slice) -> InkImage:
    alpha = ink.alpha[rows, cols]
    new_ink = ink.ink[rows, cols] if ink.ink is not None else None
    baseline = ink.baseline - (rows.start or 0) if ink.baseline is not None else None
    return InkImage(alpha.copy(), None if new_ink is None else new_ink.copy(), baseline)


def trim_columns(ink: InkImage, tau: int = 0, pad: int = 2) -> InkImage:
    """Drop empty columns left and right of the ink."""
    cols = np.flatnonzero((ink.alpha > tau).any(axis=0))
    if cols.size == 0:
        return ink
    return crop(ink, slice(0, ink.height), slice(max(cols[0] - pad, 0), min(cols[-1] + 1 + pad, ink.width)))


def trim_to_ink(ink: InkImage, tau: int = 0, pad: int = 2) -> InkImage:
    mask = ink.alpha > tau
    rows, cols = np.flatnonzero(mask.any(axis=1)), np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return ink
    return crop(ink, slice(max(rows[0] - pad, 0), min(rows[-1] + 1 + pad, ink.height)),
                slice(max(cols[0] - pad, 0), min(cols[-1] + 1 + pad, ink.width)))


def compose_line(segments: Sequence[InkImage], spacing: int, tau: int = DEFAULT_TAU) -> InkImage:
    """Concatenate segments left to right with their baselines on one common row."""
    if not segments:
        raise ValueError("no segments")
    baselines = [estimate_baseline(s, tau) for s in segments]
    common = max(baselines)
    offsets = [common - b for b in baselines]
    height = max(s.height + off for s, off in zip(segments, offsets))
    width = sum(s.width for s in segments) + (len(segments) - 1) * spacing
    alpha = np.zeros((height, width), dtype=np.uint8)
    ink = np.zeros((height, width), dtype=np.uint8)
    x = 0
    for seg, off in zip(segments, offsets):
        alpha[off:off + seg.height, x:x + seg.width] = seg.alpha
        ink[off:off + seg.height, x:x + seg.width] = seg.ink_or_default()
        x += seg.width + spacing
    return InkImage(alpha, ink, common)


def render_text_line(generator: HandwritingGenerator, text: str, writer_id: int,
                     rng: np.random.Generator, word_spacing: int = DEFAULT_WORD_SPACING,
                     tau: int = DEFAULT_TAU) -> InkImage:
    """Generate every word (split into sub-segments) and compose one aligned line."""
    words = []
    for word in text.split():
        parts = [trim_columns(generate_word(generator, seg, writer_id, rng))
                 for seg in segment_word(word)]
        words.append(compose_line(parts, 0, tau) if len(parts) > 1 else parts[0])
    if not words:
        raise ValueError("no words to write")
    return compose_line(words, word_spacing, tau)


# --- post-processing -------------------------------------------------------------

@dataclass(frozen=True)
class PostprocessParams:
    blur_range: tuple[float, float] = (0.35, 0.85)
    antialias_scale: float | None = 0.75
    contrast: float = 1.02
    gamma: float = 0.98
    noise_sigma: float = 0.35
    unsharp: tuple[float, int, int] | None = (0.5, 30, 2)

    @classmethod
    def identity(cls) -> "PostprocessParams":
        return cls((0.0, 0.0), None, 1.0, 1.0, 0.0, None)


def postprocess(line: InkImage, params: PostprocessParams, rng: np.random.Generator) -> InkImage:
    """Blur, antialias and sharpen coverage; adjust ink tone. Alpha stays soft."""
    radius = float(rng.uniform(*params.blur_range))
    noise = rng.normal(0.0, 1.0, size=line.alpha.shape)
    alpha = Image.fromarray(line.alpha, "L")
    if radius > 0:
        alpha = alpha.filter(ImageFilter.GaussianBlur(radius))
    if params.antialias_scale and params.antialias_scale != 1.0:
        w, h = alpha.size
        small = (max(1, round(w * params.antialias_scale)), max(1, round(h * params.antialias_scale)))
        alpha = alpha.resize(small, Image.Resampling.LANCZOS).resize((w, h), Image.Resampling.BILINEAR)
    if params.unsharp is not None:
        r, percent, threshold = params.unsharp
        alpha = alpha.filter(ImageFilter.UnsharpMask(radius=r, percent=percent, threshold=threshold))
    ink = line.ink
    if ink is not None and (params.contrast != 1.0 or params.gamma != 1.0 or params.noise_sigma):
        tone = (ink.astype(np.float64) - 128.0) * params.contrast + 128.0
        tone = 255.0 * (np.clip(tone, 0, 255) / 255.0) ** params.gamma
        tone = tone + noise * params.noise_sigma
        ink = np.clip(np.rint(tone), 0, 255).astype(np.uint8)
    return replace(line, alpha=np.asarray(alpha, dtype=np.uint8), ink=ink)


# --- placement -------------------------------------------------------------------

def place_line(line: InkImage, region: HandwritingRegion, rng: np.random.Generator,
               jitter: float = DEFAULT_JITTER, page_size: tuple[int, int] | None = None) -> Overlay:
    """Scale the line into the union of the region's word boxes, centre, jitter, clamp."""
    if not region.word_boxes:
        raise ValueError(f"region {region.ref} has no word boxes")
    union = Box.union_all(region.word_boxes)
    if union.width <= 0 or union.height <= 0:
        raise ValueError(f"degenerate word box union for {region.ref}")
    scale = min(union.width / line.width, union.height / line.height)
    nw, nh = max(1, round(line.width * scale)), max(1, round(line.height * scale))
    dx = float(rng.uniform(-jitter, jitter)) if jitter > 0 else 0.0
    dy = float(rng.uniform(-jitter, jitter)) if jitter > 0 else 0.0
    x0 = round(union.x0 + (union.width - nw) / 2 + dx)
    y0 = round(union.y0 + (union.height - nh) / 2 + dy)
    box = Box(x0, y0, x0 + nw, y0 + nh)
    img = line.to_rgba().resize((nw, nh), Image.Resampling.LANCZOS)
    if page_size is not None:
        clamped = box.clamp(*page_size)
        if clamped != box:
            img = img.crop((clamped.x0 - box.x0, clamped.y0 - box.y0,
                            clamped.x1 - box.x0, clamped.y1 - box.y0))
            box = clamped
    return Overlay(img, box, z_order=5, kind="handwriting", meta={"ref": region.ref})
