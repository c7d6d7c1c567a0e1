"""Font catalog: index a directory of font binaries, sample families by
coverage, and turn loose layout rects into tight glyph boxes.

The tightening model assumes the loose rect's width is proportional to the
glyph's advance width and its height to (ascender - descender); the page
script pins ``line-height: normal`` on wrapped spans to make that hold.
Ratios may fall outside [0, 1] for overhanging glyphs, which is expected.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

from .sfnt import FontParseError, SfntFont, UnsupportedGlyph, parse_font_file

log = logging.getLogger(__name__)

CACHE_VERSION = 2

FONT_SUFFIXES = (".ttf", ".otf", ".ttc", ".otc")


class NotCoveredError(KeyError):
    """The requested codepoint has no glyph in this font."""


class ZeroAdvanceError(ValueError):
    """The glyph has zero advance width; the loose box must be kept."""


@dataclass(frozen=True)
class GlyphBoxRatio:
    """Glyph extent over the loose box, dimensionless.

    rx* divide horizontal extent by advance width; ry* divide vertical extent
    by (ascender - descender), measured downward from the ascender line.
    """

    rx0: float
    rx1: float
    ry0: float
    ry1: float

    def __post_init__(self):
        vals = (self.rx0, self.rx1, self.ry0, self.ry1)
        if any(v != v or v in (float("inf"), float("-inf")) for v in vals):
            raise ValueError(f"non-finite ratio {vals}")
        if self.rx0 > self.rx1 or self.ry0 > self.ry1:
            raise ValueError(f"inverted ratio {vals}")


IDENTITY_RATIO = GlyphBoxRatio(0.0, 1.0, 0.0, 1.0)


@dataclass
class FontEntry:
    """One selectable face of the catalog."""

    family: str
    style: str
    path: str
    face_index: int
    units_per_em: int
    ascender: int
    descender: int
    coverage: frozenset[int]

    _font: SfntFont | None = None

    def font(self) -> SfntFont:
        if self._font is None:
            faces = parse_font_file(self.path)
            self._font = faces[self.face_index]
        return self._font

    def covers(self, codepoints: set[int] | frozenset[int]) -> bool:
        return codepoints <= self.coverage


class FontCatalog:
    """Immutable index of FontEntry records plus a per-glyph ratio cache."""

    def __init__(self, entries: list[FontEntry]):
        if not entries:
            raise FontParseError("catalog has no parseable fonts")
        self.entries = entries
        self._by_family: dict[str, list[FontEntry]] = {}
        for e in entries:
            self._by_family.setdefault(e.family, []).append(e)
        self._ratio_cache: dict[tuple[str, int, int], GlyphBoxRatio | None] = {}
        self._cache_lock = threading.Lock()

    def families(self) -> list[str]:
        return sorted(self._by_family)

    def entry_for(self, family: str) -> FontEntry | None:
        faces = self._by_family.get(family)
        if not faces:
            return None
        regular = [f for f in faces if f.style.lower() in ("regular", "normal", "book")]
        return regular[0] if regular else faces[0]

    def families_covering(self, codepoints: set[int] | frozenset[int]) -> list[str]:
        """Families whose coverage includes every non-whitespace/control codepoint."""
        wanted = {cp for cp in codepoints if not _ignorable(cp)}
        return [f for f in self.families() if self.entry_for(f).covers(wanted)]

    def glyph_ratio(self, entry: FontEntry, codepoint: int) -> GlyphBoxRatio | None:
        """Tightening ratio for one glyph; None marks an empty outline (e.g. space).

        Raises NotCoveredError for unmapped codepoints and ZeroAdvanceError when
        the advance width is zero; both mean the caller keeps the loose box.
        """
        key = (entry.path, entry.face_index, codepoint)
        with self._cache_lock:
            if key in self._ratio_cache:
                return self._ratio_cache[key]
        ratio = compute_glyph_ratio(entry.font(), codepoint)
        with self._cache_lock:
            self._ratio_cache[key] = ratio
        return ratio


def _ignorable(cp: int) -> bool:
    return chr(cp).isspace() or cp < 0x20 or cp == 0x7F


def compute_glyph_ratio(font: SfntFont, codepoint: int) -> GlyphBoxRatio | None:
    """Ratio of the glyph outline box to the advance-by-em loose box."""
    gid = font.cmap.get(codepoint)
    if gid is None:
        raise NotCoveredError(f"U+{codepoint:04X} not covered by {font.family}")
    aw = font.advance_width(gid)
    if aw == 0:
        raise ZeroAdvanceError(f"U+{codepoint:04X} in {font.family} has zero advance")
    try:
        bbox = font.glyph_bbox(gid)
    except UnsupportedGlyph as exc:
        log.warning("%s U+%04X: %s; keeping loose box", font.family, codepoint, exc)
        return None
    if bbox is None:
        return None
    x_min, y_min, x_max, y_max = bbox
    v_extent = font.ascender - font.descender
    return GlyphBoxRatio(
        rx0=x_min / aw,
        rx1=x_max / aw,
        ry0=(font.ascender - y_max) / v_extent,
        ry1=(font.ascender - y_min) / v_extent,
    )


def tighten(
    rect: tuple[float, float, float, float], ratio: GlyphBoxRatio
) -> tuple[tuple[float, float, float, float], bool]:
    """Apply a glyph ratio to a loose (x, y, w, h) rect.

    Returns (rect, True) with the tightened box, or (rect, False) keeping the
    loose box when the result would be degenerate.
    """
    x, y, w, h = rect
    # Width/height computed from the ratio span directly so the identity
    # ratio (0,1,0,1) reproduces the input rect bit-exactly.
    x0 = x + ratio.rx0 * w
    y0 = y + ratio.ry0 * h
    tw = (ratio.rx1 - ratio.rx0) * w
    th = (ratio.ry1 - ratio.ry0) * h
    if tw <= 0 or th <= 0:
        return rect, False
    return (x0, y0, tw, th), True


def pick_family(text: str, catalog: FontCatalog, rng: random.Random, default: str | None = None) -> str:
    """Uniformly sample a family covering every codepoint of ``text``.

    Whitespace and control characters are ignored for coverage. Falls back to
    ``default`` (or the first catalog family) when nothing qualifies.
    """
    fallback = default if default is not None else catalog.families()[0]
    wanted = {ord(c) for c in text if not _ignorable(ord(c))}
    if not wanted:
        return fallback
    qualifying = catalog.families_covering(wanted)
    if not qualifying:
        return fallback
    return qualifying[rng.randrange(len(qualifying))]


# -- indexing with a content-hash cache -----------------------------------


def _dir_digest(files: list[Path]) -> str:
    h = hashlib.sha256()
    for fp in files:
        h.update(fp.name.encode("utf-8"))
        h.update(hashlib.sha256(fp.read_bytes()).digest())
    return h.hexdigest()


def _coverage_to_ranges(coverage: frozenset[int]) -> list[list[int]]:
    ranges: list[list[int]] = []
    for cp in sorted(coverage):
        if ranges and cp == ranges[-1][1] + 1:
            ranges[-1][1] = cp
        else:
            ranges.append([cp, cp])
    return ranges


def _ranges_to_coverage(ranges: list[list[int]]) -> frozenset[int]:
    out: set[int] = set()
    for lo, hi in ranges:
        out.update(range(lo, hi + 1))
    return frozenset(out)


def index_fonts(font_dir: Path | str, cache_path: Path | str | None = None) -> FontCatalog:
    """Index every parseable face under ``font_dir``.

    Unparseable files are logged and skipped; zero parseable fonts is fatal.
    When ``cache_path`` is given, a versioned JSON cache keyed by the content
    hash of the font files short-circuits re-parsing, byte-identically.
    """
    font_dir = Path(font_dir)
    files = sorted(
        p for p in font_dir.rglob("*") if p.is_file() and p.suffix.lower() in FONT_SUFFIXES
    )
    digest = _dir_digest(files) if files else ""
    if cache_path is not None:
        cache_path = Path(cache_path)
        cached = _load_cache(cache_path, digest)
        if cached is not None:
            log.info("font catalog cache hit (%d entries)", len(cached))
            return FontCatalog(cached)

    entries: list[FontEntry] = []
    for fp in files:
        try:
            faces = parse_font_file(fp)
        except (FontParseError, OSError, struct.error, IndexError) as exc:
            log.warning("skipping unparseable font %s: %s", fp, exc)
            continue
        for face in faces:
            entries.append(
                FontEntry(
                    family=face.family,
                    style=face.style,
                    path=str(fp),
                    face_index=face.face_index,
                    units_per_em=face.units_per_em,
                    ascender=face.ascender,
                    descender=face.descender,
                    coverage=face.coverage,
                    _font=face,
                )
            )
    catalog = FontCatalog(entries)
    if cache_path is not None:
        _write_cache(cache_path, digest, entries)
    return catalog


def _load_cache(cache_path: Path, digest: str) -> list[FontEntry] | None:
    if not cache_path.exists():
        return None
    try:
        obj = json.loads(cache_path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    if obj.get("version") != CACHE_VERSION or obj.get("digest") != digest:
        return None
    entries = []
    for e in obj["entries"]:
        entries.append(
            FontEntry(
                family=e["family"],
                style=e["style"],
                path=e["path"],
                face_index=e["face_index"],
                units_per_em=e["units_per_em"],
                ascender=e["ascender"],
                descender=e["descender"],
                coverage=_ranges_to_coverage(e["coverage"]),
            )
        )
    return entries


def _write_cache(cache_path: Path, digest: str, entries: list[FontEntry]) -> None:
    obj = {
        "version": CACHE_VERSION,
        "digest": digest,
        "entries": [
            {
                "family": e.family,
                "style": e.style,
                "path": e.path,
                "face_index": e.face_index,
                "units_per_em": e.units_per_em,
                "ascender": e.ascender,
                "descender": e.descender,
                "coverage": _coverage_to_ranges(e.coverage),
            }
            for e in entries
        ],
    }
    cache_path.parent.mkdir(parents=True, exist_ok=True)
    cache_path.write_text(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n", "utf-8")
