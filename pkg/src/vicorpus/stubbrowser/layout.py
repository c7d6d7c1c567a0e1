"""Deterministic box layout for the stub browser.

A drastically simplified flow model: blocks stack vertically, inline content
flows left-to-right with word wrapping, every character gets its own box (the
loose box the instrumentation reports), and replaced elements (img, canvas,
svg, video) are atomic inline boxes. Fixed metrics: advance = 0.6em (1.0em
for CJK), line height = 1.25em. All geometry is in CSS pixels.

Collapsed whitespace produces no box at all, matching how the page script's
zero-area span records get dropped from the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dom import (
    DEFAULT_FONT_SIZE,
    REGION_TAGS,
    SKIP_TAGS,
    Element,
    StyleRule,
    TextNode,
    computed_style,
    font_size_for,
)

BODY_MARGIN = 8.0
LIST_INDENT = 40.0

BLOCK_MARGINS = {
    "p": 16.0,
    "ul": 16.0,
    "ol": 16.0,
    "blockquote": 16.0,
    "h1": 21.0,
    "h2": 20.0,
    "h3": 19.0,
    "h4": 21.0,
    "figure": 16.0,
    "pre": 16.0,
}

DEFAULT_ATOM_SIZE = (100.0, 100.0)
INPUT_SIZE = (150.0, 22.0)


def advance_for(ch: str, fs: float) -> float:
    cp = ord(ch)
    if cp >= 0x2E80:  # CJK and other full-width ranges
        return round(fs)
    return round(0.6 * fs)


def line_height_for(fs: float) -> float:
    return round(1.25 * fs)


@dataclass
class CharBox:
    ch: str
    x: float
    y: float
    w: float
    h: float
    text_node: TextNode
    offset: int  # index of the char within its text node
    font_size: float

    @property
    def element(self) -> Element:
        assert self.text_node.parent is not None
        return self.text_node.parent


@dataclass
class AtomBox:
    element: Element
    x: float
    y: float
    w: float
    h: float


@dataclass
class LayoutResult:
    char_boxes: list[CharBox] = field(default_factory=list)
    atom_boxes: list[AtomBox] = field(default_factory=list)
    rects: dict[int, tuple[float, float, float, float]] = field(default_factory=dict)
    doc_width: float = 0.0
    doc_height: float = 0.0

    def rect_of(self, el: Element) -> tuple[float, float, float, float] | None:
        return self.rects.get(id(el))


def _px(value: str | None) -> float | None:
    if value and value.endswith("px"):
        try:
            return float(value[:-2])
        except ValueError:
            return None
    return None


def _attr_px(el: Element, name: str) -> float | None:
    raw = el.attrs.get(name)
    if raw is None:
        return None
    try:
        return float(raw)
    except ValueError:
        return None


class _Flow:
    """Inline formatting context for one block's run of inline content."""

    def __init__(self, engine: "LayoutEngine", x0: float, width: float, y0: float):
        self.engine = engine
        self.x0 = x0
        self.width = max(width, 1.0)
        self.cx = x0
        self.line_top = y0
        self.line_h = 0.0
        self.at_line_start = True
        self.last_was_space = False
        self.default_lh = line_height_for(DEFAULT_FONT_SIZE)

    @property
    def bottom(self) -> float:
        return self.line_top + self.line_h

    def newline(self) -> None:
        self.line_top += self.line_h if self.line_h else self.default_lh
        self.cx = self.x0
        self.line_h = 0.0
        self.at_line_start = True
        self.last_was_space = False

    def _emit(self, ch: str, node: TextNode, offset: int, fs: float) -> None:
        adv = advance_for(ch, fs)
        lh = line_height_for(fs)
        box = CharBox(ch, self.cx, self.line_top, adv, lh, node, offset, fs)
        self.engine.result.char_boxes.append(box)
        self.engine.grow_inline_rects(box.element, (box.x, box.y, box.x + adv, box.y + lh))
        self.cx += adv
        self.line_h = max(self.line_h, lh)
        self.at_line_start = False

    def space(self, node: TextNode, offset: int, fs: float) -> None:
        if self.at_line_start or self.last_was_space:
            return  # collapsed: no box
        self._emit(" ", node, offset, fs)
        self.last_was_space = True

    def word(self, chars: list[tuple[str, TextNode, int, float]]) -> None:
        total = sum(advance_for(ch, fs) for ch, _, _, fs in chars)
        if self.cx > self.x0 and self.cx + total > self.x0 + self.width:
            self.newline()
        for ch, node, offset, fs in chars:
            if self.cx > self.x0 and self.cx + advance_for(ch, fs) > self.x0 + self.width:
                self.newline()  # char-level break inside an overlong word
            self._emit(ch, node, offset, fs)
        self.last_was_space = False

    def atom(self, el: Element, w: float, h: float) -> None:
        if self.cx > self.x0 and self.cx + w > self.x0 + self.width:
            self.newline()
        box = AtomBox(el, self.cx, self.line_top, w, h)
        self.engine.result.atom_boxes.append(box)
        self.engine.result.rects[id(el)] = (box.x, box.y, box.x + box.w, box.y + box.h)
        self.cx += w
        self.line_h = max(self.line_h, h)
        self.at_line_start = False
        self.last_was_space = False


class LayoutEngine:
    def __init__(self, root: Element, viewport_width: float, rules: list[StyleRule]):
        self.root = root
        self.viewport_width = viewport_width
        self.rules = rules
        self.result = LayoutResult(doc_width=viewport_width)

    def grow_inline_rects(self, el: Element, rect: tuple[float, float, float, float]) -> None:
        """Union the box into every inline ancestor's rect; block elements get
        their border-box rect during block layout."""
        cur: Element | None = el
        while cur is not None and not cur.is_block():
            old = self.result.rects.get(id(cur))
            if old is None:
                self.result.rects[id(cur)] = rect
            else:
                self.result.rects[id(cur)] = (
                    min(old[0], rect[0]),
                    min(old[1], rect[1]),
                    max(old[2], rect[2]),
                    max(old[3], rect[3]),
                )
            cur = cur.parent

    def run(self) -> LayoutResult:
        body = next((c for c in self.root.element_children() if c.tag == "body"), None)
        if body is None:
            self.result.doc_height = 1.0
            return self.result
        content_w = self.viewport_width - 2 * BODY_MARGIN
        flow_bottom = self.layout_block(body, BODY_MARGIN, content_w, 0.0)
        max_bottom = flow_bottom
        for rect in self.result.rects.values():
            max_bottom = max(max_bottom, rect[3])
        self.result.doc_height = max(max_bottom + BODY_MARGIN, 1.0)
        self.result.doc_width = self.viewport_width
        return self.result

    # -- block machinery ----------------------------------------------------

    def layout_block(self, el: Element, x: float, avail_w: float, y: float) -> float:
        style = computed_style(el, self.rules)
        if style.get("display") == "none":
            return y
        absolute = style.get("position") == "absolute"
        margin = 0.0 if el.tag == "body" else BLOCK_MARGINS.get(el.tag, 0.0)
        width = _px(style.get("width")) or avail_w
        if absolute:
            x_el = _px(style.get("left")) or 0.0
            y_el = _px(style.get("top")) or 0.0
        else:
            x_el = x
            y_el = y + margin

        content_x = x_el + (LIST_INDENT if el.tag in ("ul", "ol") else 0.0)
        content_w = width - (LIST_INDENT if el.tag in ("ul", "ol") else 0.0)
        content_bottom = self._layout_children(el, content_x, content_w, y_el)

        height = _px(style.get("height"))
        if height is None:
            height = max(content_bottom - y_el, 0.0)
        if el.tag == "hr":
            height = max(height, 2.0)
        self.result.rects[id(el)] = (x_el, y_el, x_el + width, y_el + height)
        if absolute:
            return y  # out of flow; the stored rect still grows scroll bounds
        return y_el + height + margin

    def _layout_children(self, el: Element, x: float, width: float, y: float) -> float:
        cursor = y
        flow: _Flow | None = None

        def flush_flow() -> None:
            nonlocal cursor, flow
            if flow is not None:
                cursor = max(cursor, flow.bottom)
                flow = None

        for child in el.children:
            if isinstance(child, TextNode):
                if el.tag in SKIP_TAGS:
                    continue
                if flow is None:
                    flow = _Flow(self, x, width, cursor)
                self._flow_text(flow, child)
                continue
            tag = child.tag
            if tag in SKIP_TAGS:
                continue
            child_style = computed_style(child, self.rules)
            if child_style.get("display") == "none":
                continue
            if tag == "br":
                if flow is None:
                    flow = _Flow(self, x, width, cursor)
                flow.newline()
            elif tag in REGION_TAGS or tag in ("input", "textarea", "button"):
                if flow is None:
                    flow = _Flow(self, x, width, cursor)
                w, h = self._atom_size(child, child_style)
                flow.atom(child, w, h)
            elif child.is_block() or child_style.get("position") == "absolute":
                flush_flow()
                cursor = self.layout_block(child, x, width, cursor)
            else:
                if flow is None:
                    flow = _Flow(self, x, width, cursor)
                self._flow_inline(flow, child)
        flush_flow()
        return cursor

    def _atom_size(self, el: Element, style: dict[str, str]) -> tuple[float, float]:
        if el.tag in ("input", "textarea", "button"):
            return INPUT_SIZE
        w = _px(style.get("width")) or _attr_px(el, "width")
        h = _px(style.get("height")) or _attr_px(el, "height")
        return (
            w if w is not None else DEFAULT_ATOM_SIZE[0],
            h if h is not None else DEFAULT_ATOM_SIZE[1],
        )

    def _flow_inline(self, flow: _Flow, el: Element) -> None:
        for child in el.children:
            if isinstance(child, TextNode):
                self._flow_text(flow, child)
                continue
            if child.tag in SKIP_TAGS:
                continue
            style = computed_style(child, self.rules)
            if style.get("display") == "none":
                continue
            if child.tag == "br":
                flow.newline()
            elif child.tag in REGION_TAGS or child.tag in ("input", "textarea", "button"):
                w, h = self._atom_size(child, style)
                flow.atom(child, w, h)
            else:
                self._flow_inline(flow, child)

    def _flow_text(self, flow: _Flow, text: TextNode) -> None:
        el = text.parent
        assert el is not None
        fs = font_size_for(el, self.rules)
        word: list[tuple[str, TextNode, int, float]] = []
        for offset, ch in enumerate(text.data):
            if ch.isspace():
                if word:
                    flow.word(word)
                    word = []
                flow.space(text, offset, fs)
            else:
                word.append((ch, text, offset, fs))
        if word:
            flow.word(word)


def layout_document(root: Element, viewport_width: float, rules: list[StyleRule]) -> LayoutResult:
    return LayoutEngine(root, viewport_width, rules).run()
