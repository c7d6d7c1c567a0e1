"""Typed view of the in-page instrumentation report.

The page script (or the stub browser standing in for it) emits one JSON object
per rendered document; this module parses and re-serializes it canonically.
The JSON shape is pinned by schemas/report.schema.json and versioned through
``script_version``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

SCRIPT_VERSION = "1"

REGION_KINDS = ("latex", "image")


class ReportError(ValueError):
    """Raised when a report payload violates its schema-level invariants."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned box in CSS pixels, origin top-left."""

    x: float
    y: float
    w: float
    h: float

    @property
    def x1(self) -> float:
        return self.x + self.w

    @property
    def y1(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def clipped(self, width: float, height: float) -> "Rect":
        x0 = min(max(self.x, 0.0), width)
        y0 = min(max(self.y, 0.0), height)
        x1 = min(max(self.x1, 0.0), width)
        y1 = min(max(self.y1, 0.0), height)
        return Rect(x0, y0, x1 - x0, y1 - y0)

    def to_json(self) -> dict[str, float]:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Rect":
        r = cls(float(obj["x"]), float(obj["y"]), float(obj["w"]), float(obj["h"]))
        if r.w < 0 or r.h < 0:
            raise ReportError(f"negative rect dimensions: {obj}")
        return r


@dataclass(frozen=True)
class CharRecord:
    text: str
    rect: Rect
    node_path: tuple[int, ...]
    dom_depth: int
    seq: int
    font_family: str
    font_size_px: float
    is_whitespace: bool
    paragraph_key: str

    def to_json(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "rect": self.rect.to_json(),
            "node_path": list(self.node_path),
            "dom_depth": self.dom_depth,
            "seq": self.seq,
            "font_family": self.font_family,
            "font_size_px": self.font_size_px,
            "is_whitespace": self.is_whitespace,
            "paragraph_key": self.paragraph_key,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "CharRecord":
        path = tuple(int(i) for i in obj["node_path"])
        if not path:
            raise ReportError("node_path must be non-empty")
        return cls(
            text=obj["text"],
            rect=Rect.from_json(obj["rect"]),
            node_path=path,
            dom_depth=int(obj["dom_depth"]),
            seq=int(obj["seq"]),
            font_family=obj["font_family"],
            font_size_px=float(obj["font_size_px"]),
            is_whitespace=bool(obj["is_whitespace"]),
            paragraph_key=obj["paragraph_key"],
        )


@dataclass(frozen=True)
class RegionRecord:
    rect: Rect
    kind: str
    node_path: tuple[int, ...]
    seq: int
    paragraph_key: str

    def to_json(self) -> dict[str, Any]:
        return {
            "rect": self.rect.to_json(),
            "kind": self.kind,
            "node_path": list(self.node_path),
            "seq": self.seq,
            "paragraph_key": self.paragraph_key,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "RegionRecord":
        if obj["kind"] not in REGION_KINDS:
            raise ReportError(f"unknown region kind {obj['kind']!r}")
        return cls(
            rect=Rect.from_json(obj["rect"]),
            kind=obj["kind"],
            node_path=tuple(int(i) for i in obj["node_path"]),
            seq=int(obj["seq"]),
            paragraph_key=obj["paragraph_key"],
        )


@dataclass
class InstrumentationReport:
    page_width: int
    page_height: int
    chars: list[CharRecord] = field(default_factory=list)
    regions: list[RegionRecord] = field(default_factory=list)
    font_assignment: dict[str, str] = field(default_factory=dict)
    script_version: str = SCRIPT_VERSION
    warnings: list[str] = field(default_factory=list)

    def validate(self) -> None:
        """Check report invariants: rects within page bounds, chars sorted by seq."""
        eps = 1e-6
        for rec in self.chars:
            if not (rec.seq >= 0):
                raise ReportError(f"negative seq {rec.seq}")
        seqs = [c.seq for c in self.chars]
        if seqs != sorted(seqs) or len(set(seqs)) != len(seqs):
            raise ReportError("chars must be strictly ordered by seq")
        for rect in [c.rect for c in self.chars] + [r.rect for r in self.regions]:
            if rect.x < -eps or rect.y < -eps:
                raise ReportError(f"rect outside page (origin): {rect}")
            if rect.x1 > self.page_width + eps or rect.y1 > self.page_height + eps:
                raise ReportError(f"rect outside page (extent): {rect}")

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "page_width": self.page_width,
            "page_height": self.page_height,
            "chars": [c.to_json() for c in self.chars],
            "regions": [r.to_json() for r in self.regions],
            "font_assignment": dict(sorted(self.font_assignment.items())),
            "script_version": self.script_version,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        """Canonical byte-stable serialization (sorted keys, compact, LF-free)."""
        return json.dumps(self.to_json_obj(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json_obj(cls, obj: dict[str, Any]) -> "InstrumentationReport":
        rep = cls(
            page_width=int(obj["page_width"]),
            page_height=int(obj["page_height"]),
            chars=[CharRecord.from_json(c) for c in obj["chars"]],
            regions=[RegionRecord.from_json(r) for r in obj["regions"]],
            font_assignment=dict(obj.get("font_assignment", {})),
            script_version=str(obj.get("script_version", SCRIPT_VERSION)),
            warnings=list(obj.get("warnings", [])),
        )
        rep.validate()
        return rep

    @classmethod
    def from_json(cls, text: str) -> "InstrumentationReport":
        return cls.from_json_obj(json.loads(text))


def node_path_key(path: tuple[int, ...]) -> str:
    """Slash-joined child-index path; the serialized form used for paragraph keys."""
    return "/".join(str(i) for i in path)
