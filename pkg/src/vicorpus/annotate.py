"""Pure transformation from an instrumentation report to the hierarchical
annotation set: tightened chars, words, lines, paragraphs, and regions, all
in reading order.

Everything here is deterministic in (report, catalog, gap_factor); repeated
calls produce identical output, so documents can be processed in parallel.
"""

from __future__ import annotations

import logging
import statistics
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from .fonts import FontCatalog, NotCoveredError, ZeroAdvanceError, tighten
from .report import CharRecord, InstrumentationReport, Rect

log = logging.getLogger(__name__)

DEFAULT_GAP_FACTOR = 1.0
LINE_OVERLAP_THRESHOLD = 0.5
LATEX_MERGE_THRESHOLD = 0.8


@dataclass(frozen=True)
class Quad:
    """Axis-aligned box as the four-corner polygon used in the output records."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"inverted quad {self}")

    @classmethod
    def from_rect(cls, rect: Rect) -> "Quad":
        return cls(rect.x, rect.y, rect.x1, rect.y1)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Quad":
        return cls(x, y, x + w, y + h)

    @classmethod
    def from_flat(cls, flat: list[float]) -> "Quad":
        if len(flat) != 8:
            raise ValueError("quad must have 8 numbers")
        x0, y0, x1t, y1t, x2, y2, x3, y3 = flat
        if not (y0 == y1t and y2 == y3 and x0 == x3 and x1t == x2):
            raise ValueError(f"quad not axis-aligned: {flat}")
        return cls(x0, y0, x2, y2)

    def to_flat(self) -> list[float]:
        # top-left, top-right, bottom-right, bottom-left
        return [self.x0, self.y0, self.x1, self.y0, self.x1, self.y1, self.x0, self.y1]

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def union(self, other: "Quad") -> "Quad":
        return Quad(
            min(self.x0, other.x0),
            min(self.y0, other.y0),
            max(self.x1, other.x1),
            max(self.y1, other.y1),
        )

    def contains(self, other: "Quad", eps: float = 1e-6) -> bool:
        return (
            self.x0 <= other.x0 + eps
            and self.y0 <= other.y0 + eps
            and self.x1 >= other.x1 - eps
            and self.y1 >= other.y1 - eps
        )

    def intersection_area(self, other: "Quad") -> float:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        return w * h if w > 0 and h > 0 else 0.0

    def scaled(self, s: float) -> "Quad":
        return Quad(self.x0 * s, self.y0 * s, self.x1 * s, self.y1 * s)

    def clamped(self, width: float, height: float) -> "Quad":
        return Quad(
            min(max(self.x0, 0.0), width),
            min(max(self.y0, 0.0), height),
            min(max(self.x1, 0.0), width),
            min(max(self.y1, 0.0), height),
        )


def union_all(quads: list[Quad]) -> Quad:
    out = quads[0]
    for q in quads[1:]:
        out = out.union(q)
    return out


@dataclass
class CharAnn:
    text: str
    quad: Quad
    loose_quad: Quad
    seq: int
    tight: bool


@dataclass
class WordAnn:
    text: str
    quad: Quad
    char_indices: list[int]
    is_latex: bool


@dataclass
class LineAnn:
    word_indices: list[int]
    quad: Quad


@dataclass
class ParaAnn:
    line_indices: list[int]
    quad: Quad
    dom_depth: int


@dataclass
class RegionAnn:
    quad: Quad
    kind: str


@dataclass
class AnnotationSet:
    chars: list[CharAnn] = field(default_factory=list)
    words: list[WordAnn] = field(default_factory=list)
    lines: list[LineAnn] = field(default_factory=list)
    paragraphs: list[ParaAnn] = field(default_factory=list)
    regions: list[RegionAnn] = field(default_factory=list)
    loose_fallbacks: int = 0

    def scaled(self, s: float) -> "AnnotationSet":
        return AnnotationSet(
            chars=[CharAnn(c.text, c.quad.scaled(s), c.loose_quad.scaled(s), c.seq, c.tight) for c in self.chars],
            words=[WordAnn(w.text, w.quad.scaled(s), list(w.char_indices), w.is_latex) for w in self.words],
            lines=[LineAnn(list(l.word_indices), l.quad.scaled(s)) for l in self.lines],
            paragraphs=[ParaAnn(list(p.line_indices), p.quad.scaled(s), p.dom_depth) for p in self.paragraphs],
            regions=[RegionAnn(r.quad.scaled(s), r.kind) for r in self.regions],
            loose_fallbacks=self.loose_fallbacks,
        )


def build_chars(
    report: InstrumentationReport, catalog: FontCatalog | None
) -> tuple[list[CharAnn], int]:
    """One CharAnn per non-whitespace record, tightened where the catalog allows.

    Returns (annotations, loose_fallback_count); degradation to the loose box is
    silent per char but counted for the run stats.
    """
    out: list[CharAnn] = []
    fallbacks = 0
    for rec in report.chars:
        if rec.is_whitespace:
            continue
        loose = Quad.from_rect(rec.rect)
        quad, is_tight = loose, False
        entry = catalog.entry_for(rec.font_family) if catalog is not None else None
        if entry is not None and len(rec.text) == 1:
            try:
                ratio = catalog.glyph_ratio(entry, ord(rec.text))
            except (NotCoveredError, ZeroAdvanceError):
                ratio = None
            if ratio is not None:
                (x, y, w, h), is_tight = tighten((loose.x0, loose.y0, loose.width, loose.height), ratio)
                quad = Quad.from_xywh(x, y, w, h)
        if not is_tight:
            fallbacks += 1
        out.append(CharAnn(text=rec.text, quad=quad, loose_quad=loose, seq=rec.seq, tight=is_tight))
    return out, fallbacks


def group_lines(chars: list[CharRecord]) -> list[int]:
    """Greedy line id per char (non-whitespace records, seq order).

    A char joins the current line iff it shares the paragraph key and its rect
    overlaps the line's running rect vertically by >= 0.5 of the smaller height.
    """
    line_ids: list[int] = []
    current = -1
    cur_key: str | None = None
    cur_y0 = cur_y1 = 0.0
    for rec in chars:
        y0, y1 = rec.rect.y, rec.rect.y1
        joins = False
        if current >= 0 and rec.paragraph_key == cur_key:
            overlap = min(y1, cur_y1) - max(y0, cur_y0)
            smaller = min(y1 - y0, cur_y1 - cur_y0)
            if smaller > 0 and overlap / smaller >= LINE_OVERLAP_THRESHOLD:
                joins = True
        if joins:
            cur_y0 = min(cur_y0, y0)
            cur_y1 = max(cur_y1, y1)
        else:
            current += 1
            cur_key = rec.paragraph_key
            cur_y0, cur_y1 = y0, y1
        line_ids.append(current)
    return line_ids


@dataclass
class _ProtoWord:
    member_idx: list[int]  # indices into the non-whitespace char list
    is_latex: bool = False
    region_seq: int | None = None
    region_quad: Quad | None = None
    region_key: str | None = None


def _split_words(
    chars: list[CharRecord],
    line_ids: list[int],
    ws_seqs: list[int],
    gap_factor: float,
) -> list[_ProtoWord]:
    """Word pre-pass: break at whitespace records, line changes, and wide gaps."""
    if not chars:
        return []
    # Median advance (loose width) per line drives the geometric gap rule.
    widths_by_line: dict[int, list[float]] = {}
    for rec, lid in zip(chars, line_ids):
        widths_by_line.setdefault(lid, []).append(rec.rect.w)
    median_adv = {lid: statistics.median(ws) for lid, ws in widths_by_line.items()}

    words: list[_ProtoWord] = [_ProtoWord(member_idx=[0])]
    for i in range(1, len(chars)):
        prev, cur = chars[i - 1], chars[i]
        breaks = line_ids[i] != line_ids[i - 1]
        if not breaks:
            lo = bisect_right(ws_seqs, prev.seq)
            hi = bisect_left(ws_seqs, cur.seq)
            breaks = hi > lo  # a whitespace record lies between them
        if not breaks:
            gap = cur.rect.x - prev.rect.x1
            breaks = gap > gap_factor * median_adv[line_ids[i]]
        if breaks:
            words.append(_ProtoWord(member_idx=[i]))
        else:
            words[-1].member_idx.append(i)
    return words


def build_annotations(
    report: InstrumentationReport,
    catalog: FontCatalog | None = None,
    gap_factor: float = DEFAULT_GAP_FACTOR,
) -> AnnotationSet:
    """Full hierarchy for one document; purely a function of its inputs."""
    non_ws = [c for c in report.chars if not c.is_whitespace]
    ws_seqs = sorted(c.seq for c in report.chars if c.is_whitespace)
    char_anns, fallbacks = build_chars(report, catalog)
    assert len(char_anns) == len(non_ws)

    line_ids = group_lines(non_ws)
    words = _split_words(non_ws, line_ids, ws_seqs, gap_factor)

    # Merge words into LaTeX regions they overlap by >= 80% of their own area.
    latex_regions = [r for r in report.regions if r.kind == "latex"]
    if latex_regions and words:
        claimed: dict[int, list[int]] = {}  # region idx -> word idx list
        free: list[int] = []
        for wi, w in enumerate(words):
            quad = union_all([char_anns[i].loose_quad for i in w.member_idx])
            owner = None
            for ri, region in enumerate(latex_regions):
                rq = Quad.from_rect(region.rect)
                if quad.area > 0 and rq.intersection_area(quad) >= LATEX_MERGE_THRESHOLD * quad.area:
                    owner = ri
                    break
            if owner is None:
                free.append(wi)
            else:
                claimed.setdefault(owner, []).append(wi)
        merged: list[_ProtoWord] = [words[wi] for wi in free]
        for ri, region in enumerate(latex_regions):
            members: list[int] = []
            for wi in claimed.get(ri, []):
                members.extend(words[wi].member_idx)
            merged.append(
                _ProtoWord(
                    member_idx=sorted(members),
                    is_latex=True,
                    region_seq=region.seq,
                    region_quad=Quad.from_rect(region.rect),
                    region_key=region.paragraph_key,
                )
            )
        words = merged
    elif latex_regions:
        words = [
            _ProtoWord(
                member_idx=[],
                is_latex=True,
                region_seq=r.seq,
                region_quad=Quad.from_rect(r.rect),
                region_key=r.paragraph_key,
            )
            for r in latex_regions
        ]

    # Reading order: words by first member seq (regions anchor on their own seq).
    def word_anchor(w: _ProtoWord) -> int:
        anchors = [non_ws[i].seq for i in w.member_idx]
        if w.region_seq is not None:
            anchors.append(w.region_seq)
        return min(anchors)

    words.sort(key=word_anchor)

    word_anns: list[WordAnn] = []
    word_line: list[int] = []  # line id per word (may gain fresh ids for bare regions)
    next_line_id = (max(line_ids) + 1) if line_ids else 0
    region_line_key: dict[int, str] = {}
    for w in words:
        quads = [char_anns[i].loose_quad for i in w.member_idx]
        if w.region_quad is not None:
            quads.append(w.region_quad)
        quad = union_all(quads)
        text = " ".join(
            "".join(non_ws[i].text for i in run) for run in _runs(w.member_idx)
        ) if w.is_latex else "".join(non_ws[i].text for i in w.member_idx)
        word_anns.append(
            WordAnn(text=text, quad=quad, char_indices=[], is_latex=w.is_latex)
        )
        if w.member_idx:
            word_line.append(line_ids[w.member_idx[0]])
        else:
            # Bare region: attach to the vertically-closest line of its paragraph,
            # else give it a line of its own.
            best, best_ov = None, 0.0
            for lid in set(line_ids):
                members = [non_ws[i] for i, l in enumerate(line_ids) if l == lid]
                if members[0].paragraph_key != w.region_key:
                    continue
                lq = union_all([Quad.from_rect(m.rect) for m in members])
                ov = lq.intersection_area(w.region_quad)
                if ov > best_ov:
                    best, best_ov = lid, ov
            if best is None:
                best = next_line_id
                next_line_id += 1
                region_line_key[best] = w.region_key or ""
            word_line.append(best)
        w_members = w.member_idx
        word_anns[-1].char_indices = list(w_members)

    # Lines from word memberships, ordered by their first word.
    line_order: list[int] = []
    for lid in word_line:
        if lid not in line_order:
            line_order.append(lid)
    line_index = {lid: i for i, lid in enumerate(line_order)}
    line_anns: list[LineAnn] = []
    for lid in line_order:
        widx = [wi for wi, l in enumerate(word_line) if l == lid]
        line_anns.append(
            LineAnn(word_indices=widx, quad=union_all([word_anns[wi].quad for wi in widx]))
        )

    # Paragraphs group lines by paragraph key, ordered by first member seq.
    def line_key(lid: int) -> str:
        if lid in region_line_key:
            return region_line_key[lid]
        for i, l in enumerate(line_ids):
            if l == lid:
                return non_ws[i].paragraph_key
        return ""

    para_of: dict[str, list[int]] = {}
    para_order: list[str] = []
    for lid in line_order:
        key = line_key(lid)
        if key not in para_of:
            para_of[key] = []
            para_order.append(key)
        para_of[key].append(line_index[lid])
    para_anns: list[ParaAnn] = []
    for key in para_order:
        lines = sorted(para_of[key])
        para_anns.append(
            ParaAnn(
                line_indices=lines,
                quad=union_all([line_anns[i].quad for i in lines]),
                dom_depth=len(key.split("/")) if key else 0,
            )
        )

    regions = [
        RegionAnn(quad=Quad.from_rect(r.rect), kind=r.kind)
        for r in sorted(report.regions, key=lambda r: r.seq)
    ]
    annset = AnnotationSet(
        chars=char_anns,
        words=word_anns,
        lines=line_anns,
        paragraphs=para_anns,
        regions=regions,
        loose_fallbacks=fallbacks,
    )
    reading_order(annset)
    return annset


def _runs(indices: list[int]) -> list[list[int]]:
    """Split sorted indices into consecutive runs (for latex text joining)."""
    runs: list[list[int]] = []
    for i in indices:
        if runs and i == runs[-1][-1] + 1:
            runs[-1].append(i)
        else:
            runs.append([i])
    return runs


def reading_order(annset: AnnotationSet) -> None:
    """Normalize ordering: chars by seq; words/lines/paragraphs by first member.

    build_annotations already emits this order; calling it again is a no-op,
    which keeps the operation safe on deserialized records.
    """
    order = sorted(range(len(annset.chars)), key=lambda i: annset.chars[i].seq)
    remap = {old: new for new, old in enumerate(order)}
    annset.chars = [annset.chars[i] for i in order]
    for w in annset.words:
        w.char_indices = sorted(remap[i] for i in w.char_indices)

    # Words sort by first member seq; a memberless word (bare latex region)
    # inherits its predecessor's key so it keeps the position the builder gave it.
    word_keys: list[tuple] = []
    prev_key = float("-inf")
    for wi, w in enumerate(annset.words):
        if w.char_indices:
            prev_key = annset.chars[w.char_indices[0]].seq
        word_keys.append((prev_key, wi))
    worder = sorted(range(len(annset.words)), key=lambda wi: word_keys[wi])
    wremap = {old: new for new, old in enumerate(worder)}
    annset.words = [annset.words[i] for i in worder]
    for line in annset.lines:
        line.word_indices = sorted(wremap[i] for i in line.word_indices)

    def line_first(li: int) -> tuple:
        idxs = annset.lines[li].word_indices
        return (idxs[0] if idxs else float("inf"), li)

    lorder = sorted(range(len(annset.lines)), key=line_first)
    lremap = {old: new for new, old in enumerate(lorder)}
    annset.lines = [annset.lines[i] for i in lorder]
    for para in annset.paragraphs:
        para.line_indices = sorted(lremap[i] for i in para.line_indices)
    annset.paragraphs.sort(key=lambda p: p.line_indices[0] if p.line_indices else float("inf"))
