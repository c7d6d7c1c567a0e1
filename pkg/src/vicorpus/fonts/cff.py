"""CFF table reader: just enough of the Type 2 charstring machine to compute
exact glyph outline bounding boxes (Bezier extrema included).

Supports plain and CID-keyed fonts, local/global subrs, and the flex family.
Legacy seac composition via 4-argument endchar is out of scope and raises.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass


class CffError(Exception):
    pass


def _u8(d: bytes, o: int) -> int:
    return d[o]


def _u16(d: bytes, o: int) -> int:
    return struct.unpack_from(">H", d, o)[0]


def _u24(d: bytes, o: int) -> int:
    return (d[o] << 16) | (d[o + 1] << 8) | d[o + 2]


def _u32(d: bytes, o: int) -> int:
    return struct.unpack_from(">I", d, o)[0]


_OFFSET_READERS = {1: _u8, 2: _u16, 3: _u24, 4: _u32}


def _parse_index(data: bytes, off: int) -> tuple[list[bytes], int]:
    """Parse a CFF INDEX; returns (items, offset past the index)."""
    count = _u16(data, off)
    if count == 0:
        return [], off + 2
    off_size = data[off + 2]
    if off_size not in _OFFSET_READERS:
        raise CffError(f"bad INDEX offSize {off_size}")
    read = _OFFSET_READERS[off_size]
    offsets = [read(data, off + 3 + i * off_size) for i in range(count + 1)]
    data_start = off + 3 + (count + 1) * off_size - 1
    items = [data[data_start + offsets[i] : data_start + offsets[i + 1]] for i in range(count)]
    return items, data_start + offsets[count]


def _parse_dict(data: bytes) -> dict[int, list[float]]:
    """CFF DICT: maps operator (op, or 0xC00 | op for escaped) to operand list."""
    out: dict[int, list[float]] = {}
    operands: list[float] = []
    i = 0
    while i < len(data):
        b0 = data[i]
        if b0 <= 21:  # operator
            if b0 == 12:
                op = 0xC00 | data[i + 1]
                i += 2
            else:
                op = b0
                i += 1
            out[op] = operands
            operands = []
        elif 32 <= b0 <= 246:
            operands.append(b0 - 139)
            i += 1
        elif 247 <= b0 <= 250:
            operands.append((b0 - 247) * 256 + data[i + 1] + 108)
            i += 2
        elif 251 <= b0 <= 254:
            operands.append(-(b0 - 251) * 256 - data[i + 1] - 108)
            i += 2
        elif b0 == 28:
            operands.append(struct.unpack_from(">h", data, i + 1)[0])
            i += 3
        elif b0 == 29:
            operands.append(struct.unpack_from(">i", data, i + 1)[0])
            i += 5
        elif b0 == 30:  # real number, BCD nibbles
            text = ""
            i += 1
            done = False
            while not done:
                for nib in (data[i] >> 4, data[i] & 0xF):
                    if nib <= 9:
                        text += str(nib)
                    elif nib == 0xA:
                        text += "."
                    elif nib == 0xB:
                        text += "E"
                    elif nib == 0xC:
                        text += "E-"
                    elif nib == 0xE:
                        text += "-"
                    elif nib == 0xF:
                        done = True
                        break
                i += 1
            operands.append(float(text) if text else 0.0)
        else:
            raise CffError(f"bad DICT byte {b0}")
    return out


def _subr_bias(n: int) -> int:
    if n < 1240:
        return 107
    if n < 33900:
        return 1131
    return 32768


class _Bounds:
    __slots__ = ("xmin", "ymin", "xmax", "ymax", "any")

    def __init__(self):
        self.any = False
        self.xmin = self.ymin = float("inf")
        self.xmax = self.ymax = float("-inf")

    def add(self, x: float, y: float) -> None:
        self.any = True
        if x < self.xmin:
            self.xmin = x
        if x > self.xmax:
            self.xmax = x
        if y < self.ymin:
            self.ymin = y
        if y > self.ymax:
            self.ymax = y

    def add_curve(self, p0, p1, p2, p3) -> None:
        self.add(*p0)
        self.add(*p3)
        for axis in (0, 1):
            a = 3.0 * (-p0[axis] + 3.0 * p1[axis] - 3.0 * p2[axis] + p3[axis])
            b = 6.0 * (p0[axis] - 2.0 * p1[axis] + p2[axis])
            c = 3.0 * (p1[axis] - p0[axis])
            for t in _quad_roots(a, b, c):
                if 0.0 < t < 1.0:
                    mt = 1.0 - t
                    v = (
                        mt * mt * mt * p0[axis]
                        + 3 * mt * mt * t * p1[axis]
                        + 3 * mt * t * t * p2[axis]
                        + t * t * t * p3[axis]
                    )
                    if axis == 0:
                        self.xmin = min(self.xmin, v)
                        self.xmax = max(self.xmax, v)
                    else:
                        self.ymin = min(self.ymin, v)
                        self.ymax = max(self.ymax, v)


def _quad_roots(a: float, b: float, c: float) -> list[float]:
    if abs(a) < 1e-12:
        if abs(b) < 1e-12:
            return []
        return [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    s = disc**0.5
    return [(-b + s) / (2 * a), (-b - s) / (2 * a)]


@dataclass
class _PrivateScope:
    subrs: list[bytes]


class CffTable:
    def __init__(self, data: bytes):
        self.data = data
        hdr_size = data[2]
        off = hdr_size
        _names, off = _parse_index(data, off)
        top_dicts, off = _parse_index(data, off)
        _strings, off = _parse_index(data, off)
        self.gsubrs, off = _parse_index(data, off)
        if not top_dicts:
            raise CffError("no TopDICT")
        top = _parse_dict(top_dicts[0])
        cs_type = top.get(0xC06, [2])[0]
        if cs_type != 2:
            raise CffError(f"unsupported CharstringType {cs_type}")
        if 17 not in top:
            raise CffError("TopDICT missing CharStrings")
        self.charstrings, _ = _parse_index(data, int(top[17][0]))
        self._fd_select: list[int] | None = None
        self._scopes: list[_PrivateScope] = []
        if 0xC24 in top:  # FDArray (CID-keyed)
            fd_dicts, _ = _parse_index(data, int(top[0xC24][0]))
            self._scopes = [self._private_scope(_parse_dict(d)) for d in fd_dicts]
            if 0xC25 not in top:
                raise CffError("CID font missing FDSelect")
            self._fd_select = self._parse_fd_select(int(top[0xC25][0]), len(self.charstrings))
        else:
            self._scopes = [self._private_scope(top)]

    def _private_scope(self, d: dict[int, list[float]]) -> _PrivateScope:
        subrs: list[bytes] = []
        if 18 in d:
            size, offset = int(d[18][0]), int(d[18][1])
            private = _parse_dict(self.data[offset : offset + size])
            if 19 in private:
                subrs, _ = _parse_index(self.data, offset + int(private[19][0]))
        return _PrivateScope(subrs=subrs)

    def _parse_fd_select(self, off: int, n_glyphs: int) -> list[int]:
        fmt = self.data[off]
        if fmt == 0:
            return [self.data[off + 1 + gid] for gid in range(n_glyphs)]
        if fmt == 3:
            n_ranges = _u16(self.data, off + 1)
            out = [0] * n_glyphs
            pos = off + 3
            for _ in range(n_ranges):
                first = _u16(self.data, pos)
                fd = self.data[pos + 2]
                nxt = _u16(self.data, pos + 3)
                for gid in range(first, min(nxt, n_glyphs)):
                    out[gid] = fd
                pos += 3
            return out
        raise CffError(f"unsupported FDSelect format {fmt}")

    def glyph_bbox(self, gid: int) -> tuple[float, float, float, float] | None:
        if gid < 0 or gid >= len(self.charstrings):
            raise CffError(f"glyph id {gid} out of range")
        scope = self._scopes[self._fd_select[gid] if self._fd_select else 0]
        bounds = _Bounds()
        _T2Interp(self.gsubrs, scope.subrs, bounds).run(self.charstrings[gid])
        if not bounds.any:
            return None
        return (bounds.xmin, bounds.ymin, bounds.xmax, bounds.ymax)


class _T2Interp:
    """Executes one Type 2 charstring, feeding path geometry into _Bounds."""

    def __init__(self, gsubrs: list[bytes], subrs: list[bytes], bounds: _Bounds):
        self.gsubrs = gsubrs
        self.subrs = subrs
        self.gbias = _subr_bias(len(gsubrs))
        self.lbias = _subr_bias(len(subrs))
        self.bounds = bounds
        self.stack: list[float] = []
        self.x = 0.0
        self.y = 0.0
        self.n_stems = 0
        self.width_done = False
        self.open = False
        self.done = False

    def run(self, code: bytes, depth: int = 0) -> None:
        if depth > 10:
            raise CffError("subr nesting too deep")
        i = 0
        n = len(code)
        while i < n and not self.done:
            b0 = code[i]
            if b0 >= 32 or b0 == 28:
                i = self._push_operand(code, i)
                continue
            i += 1
            if b0 in (1, 3, 18, 23):  # h/v stem hints
                self._count_stems()
            elif b0 in (19, 20):  # hintmask / cntrmask
                self._count_stems()
                i += (self.n_stems + 7) // 8
            elif b0 == 21:  # rmoveto
                self._take_width(2)
                self._moveto(self.stack[-2], self.stack[-1])
            elif b0 == 22:  # hmoveto
                self._take_width(1)
                self._moveto(self.stack[-1], 0.0)
            elif b0 == 4:  # vmoveto
                self._take_width(1)
                self._moveto(0.0, self.stack[-1])
            elif b0 == 5:  # rlineto
                for j in range(0, len(self.stack) - 1, 2):
                    self._lineto(self.stack[j], self.stack[j + 1])
                self.stack.clear()
            elif b0 in (6, 7):  # hlineto / vlineto
                horizontal = b0 == 6
                for v in self.stack:
                    if horizontal:
                        self._lineto(v, 0.0)
                    else:
                        self._lineto(0.0, v)
                    horizontal = not horizontal
                self.stack.clear()
            elif b0 == 8:  # rrcurveto
                self._curves(self.stack)
                self.stack.clear()
            elif b0 == 24:  # rcurveline
                body = self.stack[: len(self.stack) - 2]
                self._curves(body[: len(body) // 6 * 6])
                self._lineto(self.stack[-2], self.stack[-1])
                self.stack.clear()
            elif b0 == 25:  # rlinecurve
                n_lines = (len(self.stack) - 6) // 2
                for j in range(n_lines):
                    self._lineto(self.stack[2 * j], self.stack[2 * j + 1])
                self._curves(self.stack[2 * n_lines :])
                self.stack.clear()
            elif b0 == 26:  # vvcurveto
                s = self.stack
                dx1 = 0.0
                if len(s) % 4 == 1:
                    dx1, s = s[0], s[1:]
                for j in range(0, len(s), 4):
                    self._curve(dx1, s[j], s[j + 1], s[j + 2], 0.0, s[j + 3])
                    dx1 = 0.0
                self.stack.clear()
            elif b0 == 27:  # hhcurveto
                s = self.stack
                dy1 = 0.0
                if len(s) % 4 == 1:
                    dy1, s = s[0], s[1:]
                for j in range(0, len(s), 4):
                    self._curve(s[j], dy1, s[j + 1], s[j + 2], s[j + 3], 0.0)
                    dy1 = 0.0
                self.stack.clear()
            elif b0 in (30, 31):  # vhcurveto / hvcurveto
                self._alternating_curves(start_horizontal=(b0 == 31))
                self.stack.clear()
            elif b0 == 10:  # callsubr
                idx = int(self.stack.pop()) + self.lbias
                if not (0 <= idx < len(self.subrs)):
                    raise CffError("local subr out of range")
                self.run(self.subrs[idx], depth + 1)
            elif b0 == 29:  # callgsubr
                idx = int(self.stack.pop()) + self.gbias
                if not (0 <= idx < len(self.gsubrs)):
                    raise CffError("global subr out of range")
                self.run(self.gsubrs[idx], depth + 1)
            elif b0 == 11:  # return
                return
            elif b0 == 14:  # endchar
                if not self.width_done and len(self.stack) in (1, 5):
                    self.stack.pop(0)
                self.width_done = True
                if len(self.stack) >= 4:
                    raise CffError("seac-style endchar unsupported")
                self.done = True
            elif b0 == 12:
                i = self._escape(code, i)
            else:
                raise CffError(f"unsupported charstring op {b0}")

    # -- operand & helper machinery ---------------------------------------

    def _push_operand(self, code: bytes, i: int) -> int:
        b0 = code[i]
        if b0 == 28:
            self.stack.append(struct.unpack_from(">h", code, i + 1)[0])
            return i + 3
        if b0 == 255:
            self.stack.append(struct.unpack_from(">i", code, i + 1)[0] / 65536.0)
            return i + 5
        if 32 <= b0 <= 246:
            self.stack.append(b0 - 139)
            return i + 1
        if 247 <= b0 <= 250:
            self.stack.append((b0 - 247) * 256 + code[i + 1] + 108)
            return i + 2
        if 251 <= b0 <= 254:
            self.stack.append(-(b0 - 251) * 256 - code[i + 1] - 108)
            return i + 2
        raise CffError(f"bad operand byte {b0}")

    def _count_stems(self) -> None:
        if not self.width_done and len(self.stack) % 2 == 1:
            self.stack.pop(0)
        self.width_done = True
        self.n_stems += len(self.stack) // 2
        self.stack.clear()

    def _take_width(self, expected: int) -> None:
        if not self.width_done and len(self.stack) == expected + 1:
            self.stack.pop(0)
        self.width_done = True

    def _moveto(self, dx: float, dy: float) -> None:
        self.x += dx
        self.y += dy
        self.bounds.add(self.x, self.y)
        self.open = True
        self.stack.clear()

    def _lineto(self, dx: float, dy: float) -> None:
        self.x += dx
        self.y += dy
        self.bounds.add(self.x, self.y)

    def _curve(self, dx1, dy1, dx2, dy2, dx3, dy3) -> None:
        p0 = (self.x, self.y)
        c1 = (self.x + dx1, self.y + dy1)
        c2 = (c1[0] + dx2, c1[1] + dy2)
        p3 = (c2[0] + dx3, c2[1] + dy3)
        self.bounds.add_curve(p0, c1, c2, p3)
        self.x, self.y = p3

    def _curves(self, args: list[float]) -> None:
        for j in range(0, len(args) - 5, 6):
            self._curve(*args[j : j + 6])

    def _alternating_curves(self, start_horizontal: bool) -> None:
        s = list(self.stack)
        horizontal = start_horizontal
        while len(s) >= 4:
            last = len(s) in (5,)
            if horizontal:
                dx1, dx2, dy2, dy3 = s[0], s[1], s[2], s[3]
                dlast = s[4] if last else 0.0
                self._curve(dx1, 0.0, dx2, dy2, dlast, dy3)
            else:
                dy1, dx2, dy2, dx3 = s[0], s[1], s[2], s[3]
                dlast = s[4] if last else 0.0
                self._curve(0.0, dy1, dx2, dy2, dx3, dlast)
            s = s[5:] if last else s[4:]
            horizontal = not horizontal

    def _escape(self, code: bytes, i: int) -> int:
        op = code[i]
        i += 1
        s = self.stack
        if op == 35:  # flex
            self._curve(*s[0:6])
            self._curve(*s[6:12])
        elif op == 34:  # hflex
            dx1, dx2, dy2, dx3, dx4, dx5, dx6 = s[:7]
            y0 = self.y
            self._curve(dx1, 0.0, dx2, dy2, dx3, 0.0)
            self._curve(dx4, 0.0, dx5, y0 - self.y, dx6, 0.0)
        elif op == 36:  # hflex1
            dx1, dy1, dx2, dy2, dx3, dx4, dx5, dy5, dx6 = s[:9]
            y0 = self.y
            self._curve(dx1, dy1, dx2, dy2, dx3, 0.0)
            self._curve(dx4, 0.0, dx5, dy5, dx6, y0 - (self.y + dy5))
        elif op == 37:  # flex1
            dx1, dy1, dx2, dy2, dx3, dy3, dx4, dy4, dx5, dy5, d6 = s[:11]
            x0, y0 = self.x, self.y
            dx = dx1 + dx2 + dx3 + dx4 + dx5
            dy = dy1 + dy2 + dy3 + dy4 + dy5
            self._curve(dx1, dy1, dx2, dy2, dx3, dy3)
            if abs(dx) > abs(dy):
                self._curve(dx4, dy4, dx5, dy5, d6, y0 - (self.y + dy4 + dy5))
            else:
                self._curve(dx4, dy4, dx5, dy5, x0 - (self.x + dx4 + dx5), d6)
        else:
            raise CffError(f"unsupported escaped op 12 {op}")
        self.stack.clear()
        return i
