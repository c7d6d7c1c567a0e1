"""Render annotation overlays onto corpus images: boxes for one hierarchy
level at a time, stroke color encoding reading order through a colormap.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

from PIL import Image, ImageDraw

from .annotate import Quad
from .writer import DocumentRecord

LEVELS = ("char", "word", "line", "paragraph", "region")

DEFAULT_COLORMAP = "viridis"


class OverlayError(Exception):
    pass


@lru_cache(maxsize=None)
def _tables() -> dict[str, list[list[int]]]:
    raw = resources.files("vicorpus").joinpath("data/colormaps.json").read_text("utf-8")
    tables = json.loads(raw)
    tables["gray"] = [[v, v, v] for v in range(256)]
    return tables


def colormap_names() -> list[str]:
    return sorted(_tables())


def colormap_color(name: str, t: float) -> tuple[int, int, int]:
    """256-entry LUT lookup at t in [0, 1]; index = round(t * 255)."""
    tables = _tables()
    if name not in tables:
        raise OverlayError(f"unknown colormap {name!r} (have {', '.join(colormap_names())})")
    t = min(max(t, 0.0), 1.0)
    r, g, b = tables[name][round(t * 255)]
    return (r, g, b)


def _level_quads(record: DocumentRecord, level: str) -> list[Quad]:
    a = record.annotations
    if level == "char":
        return [c.quad for c in a.chars]
    if level == "word":
        return [w.quad for w in a.words]
    if level == "line":
        return [l.quad for l in a.lines]
    if level == "paragraph":
        return [p.quad for p in a.paragraphs]
    if level == "region":
        return [r.quad for r in a.regions]
    raise OverlayError(f"unknown level {level!r} (have {', '.join(LEVELS)})")


def render_overlay(
    record: DocumentRecord,
    image: Image.Image,
    level: str,
    colormap: str = DEFAULT_COLORMAP,
) -> Image.Image:
    """Stroke each quad of the level, colored by rank/(n-1) through the colormap.

    The output keeps the input dimensions; an empty level returns an unmodified
    copy. Rank 0 of a single box maps to colormap(0).
    """
    quads = _level_quads(record, level)
    out = image.convert("RGB")
    if not quads:
        return out
    draw = ImageDraw.Draw(out)
    stroke = max(1, round(min(out.width, out.height) / 800))
    n = len(quads)
    for rank, quad in enumerate(quads):
        t = 0.0 if n == 1 else rank / (n - 1)
        color = colormap_color(colormap, t)
        x0, y0 = quad.x0, quad.y0
        x1, y1 = max(quad.x1, x0), max(quad.y1, y0)
        draw.rectangle([x0, y0, x1, y1], outline=color, width=stroke)
    return out


def render_overlay_file(
    record_path: Path | str,
    level: str,
    out_path: Path | str,
    colormap: str = DEFAULT_COLORMAP,
    corpus_root: Path | str | None = None,
) -> Path:
    """Overlay one saved record; the image resolves relative to the corpus root.

    Records live at <root>/annots/<shard>/<name>.json, so the default root is
    two directories up from the record file.
    """
    record_path = Path(record_path)
    record = DocumentRecord.from_json(record_path.read_text("utf-8"))
    root = Path(corpus_root) if corpus_root is not None else record_path.parents[2]
    image_path = root / record.image
    if not image_path.exists():
        raise OverlayError(f"image not found: {image_path}")
    with Image.open(image_path) as im:
        rendered = render_overlay(record, im, level, colormap)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rendered.save(out_path)
    return out_path
