"""Document records shared by the synthesis, rendering and verification stages."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union


class RejectReason(str, Enum):
    NO_GT = "no_gt"
    BAD_GT = "bad_gt"
    INVALID_LABEL = "invalid_label"
    ANSWER_NOT_IN_TEXT = "answer_not_in_text"
    OUT_OF_BOUNDS = "out_of_bounds"
    MULTI_PAGE = "multi_page"
    RENDER_FAIL = "render_fail"
    OCR_FAIL = "ocr_fail"


class DocumentRejected(Exception):
    """Raised by a pipeline stage that cannot continue with a document."""

    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail


class Status(str, Enum):
    RAW = "raw"
    RENDERED = "rendered"
    ENHANCED = "enhanced"
    VERIFIED = "verified"
    REJECTED = "rejected"


_STATUS_ORDER = {Status.RAW: 0, Status.RENDERED: 1, Status.ENHANCED: 2,
                 Status.VERIFIED: 3, Status.REJECTED: 3}


@dataclass(frozen=True)
class Box:
    """Axis-aligned integer pixel box, ``x1``/``y1`` exclusive."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"negative extent: {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2

    def contains(self, other: "Box") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and other.x1 <= self.x1 and other.y1 <= self.y1)

    def contains_point(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def union(self, other: "Box") -> "Box":
        return Box(min(self.x0, other.x0), min(self.y0, other.y0),
                   max(self.x1, other.x1), max(self.y1, other.y1))

    def intersection_area(self, other: "Box") -> int:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        return max(w, 0) * max(h, 0)

    def iou(self, other: "Box") -> float:
        inter = self.intersection_area(other)
        union = self.area + other.area - inter
        return inter / union if union else 0.0

    def clamp(self, width: int, height: int) -> "Box":
        x0 = min(max(self.x0, 0), width)
        y0 = min(max(self.y0, 0), height)
        return Box(x0, y0, min(max(self.x1, x0), width), min(max(self.y1, y0), height))

    def to_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]

    @classmethod
    def from_list(cls, values) -> "Box":
        return cls(*(int(v) for v in values))

    @staticmethod
    def union_all(boxes) -> "Box":
        boxes = list(boxes)
        if not boxes:
            raise ValueError("no boxes")
        out = boxes[0]
        for b in boxes[1:]:
            out = out.union(b)
        return out


@dataclass
class QAPairs:
    pairs: dict[str, str]
    kind = "qa"

    def to_json(self) -> dict[str, Any]:
        return dict(self.pairs)


@dataclass
class ClassLabel:
    label: str
    kind = "label"

    def to_json(self) -> dict[str, Any]:
        return {"label": self.label}


@dataclass
class KIEEntity:
    field: str
    value: str
    group: str | None = None
    ref: str | None = None
    box: Box | None = None
    valid: bool = True


@dataclass
class KIEEntities:
    entities: list[KIEEntity]
    kind = "entities"

    def to_json(self) -> list[dict[str, Any]]:
        return [
            {"group": e.group, "field": e.field, "value": e.value,
             "box": e.box.to_list() if e.box else None}
            for e in self.entities
        ]


@dataclass
class LayoutRegion:
    label: str
    ref: str | None = None
    box: Box | None = None


@dataclass
class LayoutRegions:
    regions: list[LayoutRegion]
    kind = "regions"

    def to_json(self) -> list[dict[str, Any]]:
        return [{"label": r.label, "box": r.box.to_list() if r.box else None}
                for r in self.regions]


GroundTruth = Union[QAPairs, ClassLabel, KIEEntities, LayoutRegions]


@dataclass
class HandwritingRegion:
    ref: str
    text: str
    author_id: int = 1
    signature: bool = False
    writer_id: int | None = None
    box: Box | None = None
    word_boxes: list[Box] = field(default_factory=list)


@dataclass
class VisualElementPlaceholder:
    ref: str
    raw_type: str
    content: str = ""
    style: dict[str, str] = field(default_factory=dict)
    canonical_type: str | None = None
    z_order: int = 0
    box: Box | None = None


@dataclass
class SynthesizedDocument:
    id: str
    html: str
    gt: GroundTruth | None = None
    handwriting_regions: list[HandwritingRegion] = field(default_factory=list)
    placeholders: list[VisualElementPlaceholder] = field(default_factory=list)
    render: Any = None
    status: Status = Status.RAW
    reason: RejectReason | None = None
    detail: str = ""

    def advance(self, status: Status) -> None:
        if self.status is Status.REJECTED:
            raise ValueError(f"{self.id} already rejected")
        if _STATUS_ORDER[status] < _STATUS_ORDER[self.status]:
            raise ValueError(f"{self.id}: cannot move {self.status.value} -> {status.value}")
        if status is Status.REJECTED:
            raise ValueError("use reject() to record a reason")
        self.status = status

    def reject(self, reason: RejectReason, detail: str = "") -> None:
        if self.status in (Status.REJECTED, Status.VERIFIED):
            raise ValueError(f"{self.id} already terminal ({self.status.value})")
        self.status = Status.REJECTED
        self.reason = RejectReason(reason)
        self.detail = detail

    @property
    def terminal(self) -> bool:
        return self.status in (Status.VERIFIED, Status.REJECTED)


@dataclass(frozen=True)
class WordBox:
    text: str
    box: Box
    confidence: float = 1.0

    def to_json(self) -> dict[str, Any]:
        return {"text": self.text, "box": self.box.to_list()}
