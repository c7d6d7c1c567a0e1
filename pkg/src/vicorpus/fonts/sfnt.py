"""Minimal sfnt (TrueType/OpenType) reader.

Parses just what glyph-box extraction needs: ``head``, ``hhea``, ``maxp``,
``hmtx``, ``cmap``, ``name``, and outlines from ``glyf``/``loca`` or ``CFF``.
TrueType collections (ttcf) expose one face per offset. No shaping, hinting,
kerning, or color tables.

Outline bounding boxes are computed from control points for ``glyf`` (the
convention the format's own header bbox uses) and from exact Bezier extrema
for ``CFF`` charstrings.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

from .cff import CffTable, CffError

TTC_MAGIC = b"ttcf"
SFNT_TRUETYPE = 0x00010000
SFNT_OTTO = 0x4F54544F  # 'OTTO'
SFNT_TRUE = 0x74727565  # 'true' (legacy Apple)

# Composite glyph flags
ARG_1_AND_2_ARE_WORDS = 0x0001
ARGS_ARE_XY_VALUES = 0x0002
WE_HAVE_A_SCALE = 0x0008
MORE_COMPONENTS = 0x0020
WE_HAVE_AN_X_AND_Y_SCALE = 0x0040
WE_HAVE_A_TWO_BY_TWO = 0x0080
SCALED_COMPONENT_OFFSET = 0x0800
UNSCALED_COMPONENT_OFFSET = 0x1000

MAX_COMPONENT_DEPTH = 8


class FontParseError(Exception):
    """The file is not a parseable sfnt face."""


class UnsupportedGlyph(Exception):
    """Outline uses a feature outside this reader's scope (e.g. seac)."""


def _u16(data: bytes, off: int) -> int:
    return struct.unpack_from(">H", data, off)[0]


def _s16(data: bytes, off: int) -> int:
    return struct.unpack_from(">h", data, off)[0]


def _u32(data: bytes, off: int) -> int:
    return struct.unpack_from(">I", data, off)[0]


@dataclass
class SfntFont:
    """One parsed face. Coordinates and metrics are in font units."""

    path: str
    face_index: int
    family: str
    style: str
    units_per_em: int
    ascender: int
    descender: int
    num_glyphs: int
    cmap: dict[int, int]  # codepoint -> glyph id
    _advances: list[int] = field(repr=False, default_factory=list)
    _loca: list[int] | None = field(repr=False, default=None)
    _glyf: bytes | None = field(repr=False, default=None)
    _cff: CffTable | None = field(repr=False, default=None)

    @property
    def coverage(self) -> frozenset[int]:
        return frozenset(self.cmap)

    def advance_width(self, gid: int) -> int:
        if not self._advances:
            raise FontParseError("no hmtx advances parsed")
        return self._advances[min(gid, len(self._advances) - 1)]

    def glyph_bbox(self, gid: int) -> tuple[float, float, float, float] | None:
        """(xMin, yMin, xMax, yMax) in font units, or None for an empty outline."""
        if self._cff is not None:
            try:
                return self._cff.glyph_bbox(gid)
            except CffError as exc:
                raise UnsupportedGlyph(str(exc)) from exc
        points = self._glyph_points(gid, depth=0)
        if not points:
            return None
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        return (min(xs), min(ys), max(xs), max(ys))

    # -- glyf ------------------------------------------------------------

    def _glyph_data(self, gid: int) -> bytes:
        assert self._loca is not None and self._glyf is not None
        if gid < 0 or gid + 1 >= len(self._loca):
            raise UnsupportedGlyph(f"glyph id {gid} out of range")
        start, end = self._loca[gid], self._loca[gid + 1]
        return self._glyf[start:end]

    def _glyph_points(self, gid: int, depth: int) -> list[tuple[float, float]]:
        if depth > MAX_COMPONENT_DEPTH:
            raise UnsupportedGlyph("composite nesting too deep")
        data = self._glyph_data(gid)
        if len(data) < 10:
            return []
        n_contours = _s16(data, 0)
        if n_contours >= 0:
            return [(float(x), float(y)) for x, y in _parse_simple_points(data, n_contours)]
        return self._composite_points(data, depth)

    def _composite_points(self, data: bytes, depth: int) -> list[tuple[float, float]]:
        points: list[tuple[float, float]] = []
        off = 10
        while True:
            flags = _u16(data, off)
            comp_gid = _u16(data, off + 2)
            off += 4
            if flags & ARG_1_AND_2_ARE_WORDS:
                arg1, arg2 = struct.unpack_from(">hh", data, off)
                off += 4
            else:
                arg1, arg2 = struct.unpack_from(">bb", data, off)
                off += 2
            a, b, c, d = 1.0, 0.0, 0.0, 1.0
            if flags & WE_HAVE_A_SCALE:
                a = d = _f2dot14(data, off)
                off += 2
            elif flags & WE_HAVE_AN_X_AND_Y_SCALE:
                a = _f2dot14(data, off)
                d = _f2dot14(data, off + 2)
                off += 4
            elif flags & WE_HAVE_A_TWO_BY_TWO:
                a = _f2dot14(data, off)
                b = _f2dot14(data, off + 2)
                c = _f2dot14(data, off + 4)
                d = _f2dot14(data, off + 6)
                off += 8
            if flags & ARGS_ARE_XY_VALUES:
                dx, dy = float(arg1), float(arg2)
            else:
                # Point-number alignment is vanishingly rare; treat as no offset.
                dx = dy = 0.0
            if flags & SCALED_COMPONENT_OFFSET and not flags & UNSCALED_COMPONENT_OFFSET:
                dx, dy = a * dx + c * dy, b * dx + d * dy
            for x, y in self._glyph_points(comp_gid, depth + 1):
                points.append((a * x + c * y + dx, b * x + d * y + dy))
            if not flags & MORE_COMPONENTS:
                break
        return points


def _f2dot14(data: bytes, off: int) -> float:
    return _s16(data, off) / 16384.0


def _parse_simple_points(data: bytes, n_contours: int) -> list[tuple[int, int]]:
    off = 10
    end_pts = [_u16(data, off + 2 * i) for i in range(n_contours)]
    off += 2 * n_contours
    n_points = (end_pts[-1] + 1) if end_pts else 0
    instr_len = _u16(data, off)
    off += 2 + instr_len
    # Flags with run-length repeats
    flags: list[int] = []
    while len(flags) < n_points:
        f = data[off]
        off += 1
        flags.append(f)
        if f & 0x08:  # REPEAT_FLAG
            count = data[off]
            off += 1
            flags.extend([f] * count)
    flags = flags[:n_points]
    xs: list[int] = []
    x = 0
    for f in flags:
        if f & 0x02:  # x short vector
            dx = data[off]
            off += 1
            x += dx if f & 0x10 else -dx
        elif not f & 0x10:
            x += _s16(data, off)
            off += 2
        xs.append(x)
    ys: list[int] = []
    y = 0
    for f in flags:
        if f & 0x04:  # y short vector
            dy = data[off]
            off += 1
            y += dy if f & 0x20 else -dy
        elif not f & 0x20:
            y += _s16(data, off)
            off += 2
        ys.append(y)
    return list(zip(xs, ys))


# -- table directory and face assembly -----------------------------------


def _face_offsets(data: bytes) -> list[int]:
    if data[:4] == TTC_MAGIC:
        num_fonts = _u32(data, 8)
        return [_u32(data, 12 + 4 * i) for i in range(num_fonts)]
    return [0]


def _table_directory(data: bytes, base: int) -> dict[str, tuple[int, int]]:
    tag = _u32(data, base)
    if tag not in (SFNT_TRUETYPE, SFNT_OTTO, SFNT_TRUE):
        raise FontParseError(f"unknown sfnt version 0x{tag:08X}")
    num_tables = _u16(data, base + 4)
    tables: dict[str, tuple[int, int]] = {}
    for i in range(num_tables):
        rec = base + 12 + 16 * i
        name = data[rec : rec + 4].decode("latin-1")
        offset = _u32(data, rec + 8)
        length = _u32(data, rec + 12)
        if offset + length > len(data):
            raise FontParseError(f"table {name!r} overruns file")
        tables[name] = (offset, length)
    return tables


def _table(data: bytes, tables: dict[str, tuple[int, int]], tag: str) -> bytes:
    if tag not in tables:
        raise FontParseError(f"missing required table {tag!r}")
    off, length = tables[tag]
    return data[off : off + length]


def _parse_cmap(data: bytes) -> dict[int, int]:
    num_tables = _u16(data, 2)
    subtables: dict[tuple[int, int], int] = {}
    for i in range(num_tables):
        rec = 4 + 8 * i
        plat = _u16(data, rec)
        enc = _u16(data, rec + 2)
        off = _u32(data, rec + 4)
        subtables[(plat, enc)] = off
    preference = [(3, 10), (0, 6), (0, 4), (3, 1), (0, 3), (0, 2), (0, 1), (0, 0), (1, 0)]
    for key in preference:
        if key in subtables:
            mapping = _parse_cmap_subtable(data, subtables[key])
            if mapping:
                return mapping
    for off in subtables.values():
        mapping = _parse_cmap_subtable(data, off)
        if mapping:
            return mapping
    raise FontParseError("no usable cmap subtable")


def _parse_cmap_subtable(data: bytes, off: int) -> dict[int, int]:
    fmt = _u16(data, off)
    mapping: dict[int, int] = {}
    if fmt == 0:
        for code in range(256):
            gid = data[off + 6 + code]
            if gid:
                mapping[code] = gid
    elif fmt == 4:
        seg_count = _u16(data, off + 6) // 2
        end_off = off + 14
        start_off = end_off + 2 * seg_count + 2
        delta_off = start_off + 2 * seg_count
        range_off = delta_off + 2 * seg_count
        for i in range(seg_count):
            end = _u16(data, end_off + 2 * i)
            start = _u16(data, start_off + 2 * i)
            delta = _s16(data, delta_off + 2 * i)
            range_offset = _u16(data, range_off + 2 * i)
            for code in range(start, end + 1):
                if code == 0xFFFF:
                    continue
                if range_offset == 0:
                    gid = (code + delta) & 0xFFFF
                else:
                    addr = range_off + 2 * i + range_offset + 2 * (code - start)
                    gid = _u16(data, addr)
                    if gid != 0:
                        gid = (gid + delta) & 0xFFFF
                if gid:
                    mapping[code] = gid
    elif fmt == 6:
        first = _u16(data, off + 6)
        count = _u16(data, off + 8)
        for i in range(count):
            gid = _u16(data, off + 10 + 2 * i)
            if gid:
                mapping[first + i] = gid
    elif fmt == 12:
        n_groups = _u32(data, off + 12)
        for i in range(n_groups):
            g = off + 16 + 12 * i
            start_char = _u32(data, g)
            end_char = _u32(data, g + 4)
            start_gid = _u32(data, g + 8)
            for j in range(end_char - start_char + 1):
                gid = start_gid + j
                if gid:
                    mapping[start_char + j] = gid
    return mapping


def _decode_name(raw: bytes, platform: int) -> str:
    if platform in (0, 3):
        return raw.decode("utf-16-be", errors="replace")
    try:
        return raw.decode("mac_roman")
    except UnicodeDecodeError:
        return raw.decode("latin-1", errors="replace")


def _parse_names(data: bytes) -> dict[int, str]:
    count = _u16(data, 2)
    string_off = _u16(data, 4)
    names: dict[int, str] = {}
    # Later records win only if we have nothing yet; prefer Windows English.
    best_rank: dict[int, int] = {}
    for i in range(count):
        rec = 6 + 12 * i
        plat = _u16(data, rec)
        lang = _u16(data, rec + 4)
        name_id = _u16(data, rec + 6)
        length = _u16(data, rec + 8)
        offset = _u16(data, rec + 10)
        raw = data[string_off + offset : string_off + offset + length]
        if not raw:
            continue
        rank = 0
        if plat == 3 and lang == 0x409:
            rank = 3
        elif plat == 3:
            rank = 2
        elif plat == 0:
            rank = 2
        elif plat == 1 and lang == 0:
            rank = 1
        if rank >= best_rank.get(name_id, -1):
            value = _decode_name(raw, plat).strip("\x00").strip()
            if value:
                names[name_id] = value
                best_rank[name_id] = rank
    return names


def parse_font_file(path: Path | str) -> list[SfntFont]:
    """Parse every face in a font binary. Raises FontParseError when unusable."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12:
        raise FontParseError("file too small for an sfnt header")
    faces = []
    for idx, base in enumerate(_face_offsets(data)):
        faces.append(_parse_face(data, base, str(path), idx))
    return faces


def _parse_face(data: bytes, base: int, path: str, face_index: int) -> SfntFont:
    tables = _table_directory(data, base)
    head = _table(data, tables, "head")
    if _u32(head, 12) != 0x5F0F3CF5:
        raise FontParseError("bad head table magic")
    units_per_em = _u16(head, 18)
    if units_per_em <= 0:
        raise FontParseError("units_per_em must be positive")
    index_to_loc = _s16(head, 50)

    hhea = _table(data, tables, "hhea")
    ascender = _s16(hhea, 4)
    descender = _s16(hhea, 6)
    num_h_metrics = _u16(hhea, 34)
    if ascender <= 0 or descender > 0:
        raise FontParseError(f"implausible vertical metrics asc={ascender} desc={descender}")

    maxp = _table(data, tables, "maxp")
    num_glyphs = _u16(maxp, 4)

    hmtx = _table(data, tables, "hmtx")
    advances = []
    aw = 0
    for gid in range(min(num_h_metrics, num_glyphs)):
        aw = _u16(hmtx, 4 * gid)
        advances.append(aw)
    if not advances:
        raise FontParseError("empty hmtx")

    cmap = _parse_cmap(_table(data, tables, "cmap"))
    if not cmap:
        raise FontParseError("empty character coverage")

    names = _parse_names(_table(data, tables, "name")) if "name" in tables else {}
    family = names.get(16) or names.get(1) or Path(path).stem
    style = names.get(17) or names.get(2) or "Regular"

    font = SfntFont(
        path=path,
        face_index=face_index,
        family=family,
        style=style,
        units_per_em=units_per_em,
        ascender=ascender,
        descender=descender,
        num_glyphs=num_glyphs,
        cmap=cmap,
        _advances=advances,
    )

    if "glyf" in tables and "loca" in tables:
        loca_raw = _table(data, tables, "loca")
        if index_to_loc == 0:
            loca = [2 * _u16(loca_raw, 2 * i) for i in range(num_glyphs + 1)]
        else:
            loca = [_u32(loca_raw, 4 * i) for i in range(num_glyphs + 1)]
        font._loca = loca
        font._glyf = _table(data, tables, "glyf")
    elif "CFF " in tables:
        font._cff = CffTable(_table(data, tables, "CFF "))
    else:
        raise FontParseError("no outline table (glyf or CFF)")
    return font
