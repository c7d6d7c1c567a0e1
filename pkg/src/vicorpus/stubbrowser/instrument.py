"""Page-model implementation of the instrumentation contract.

Mirrors what the injected script does in a real browser, over the stub's DOM
and layout: wrap characters (modeled, not materialized), remove the five
categories of unusable elements, assign seeded per-paragraph fonts, and emit
the report JSON. Node paths are computed as if every character of wrappable
text had been wrapped in its own span element.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..report import SCRIPT_VERSION
from ..seeds import SplitMix64
from .dom import (
    LATEX_CLASS,
    REGION_TAGS,
    SKIP_TAGS,
    Element,
    StyleRule,
    TextNode,
    collect_stylesheets,
    computed_style,
    nearest_block_ancestor,
    parse_document,
    synthesize_pseudo_content,
)
from .layout import LayoutResult, layout_document


def _is_wrappable(el: Element) -> bool:
    """Text under body, outside script/style-like containers, gets wrapped."""
    cur: Element | None = el
    seen_body = False
    while cur is not None:
        if cur.tag in SKIP_TAGS:
            return False
        if cur.tag == "body":
            seen_body = True
        cur = cur.parent
    return seen_body


def wrapped_index(parent: Element, child: "Element | TextNode", offset: int = 0) -> int:
    """Element-child index of ``child`` (or of char ``offset`` inside a text
    child) in the post-wrap tree, where each wrappable char is one span."""
    wrappable = _is_wrappable(parent)
    idx = 0
    for node in parent.children:
        if node is child:
            return idx + (offset if isinstance(child, TextNode) else 0)
        if isinstance(node, Element):
            idx += 1
        elif wrappable:
            idx += len(node.data)
    raise ValueError("child not under parent")


def wrapped_node_path(el: Element) -> tuple[int, ...]:
    path: list[int] = []
    cur = el
    while cur.parent is not None:
        path.append(wrapped_index(cur.parent, cur))
        cur = cur.parent
    path.append(0)  # html element
    return tuple(reversed(path))


def paragraph_key_of(el: Element) -> str:
    block = nearest_block_ancestor(el)
    return "/".join(str(i) for i in wrapped_node_path(block))


@dataclass
class StubPage:
    """One loaded document plus its instrumentation state."""

    html: str
    viewport_width: int
    root: Element = field(init=False)
    rules: list[StyleRule] = field(init=False)
    layout: LayoutResult = field(init=False)
    prepared: bool = False
    font_assignment: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    removal_count: int = 0

    def __post_init__(self):
        self.root = parse_document(self.html)
        self.rules = collect_stylesheets(self.root)
        synthesize_pseudo_content(self.root, self.rules)
        self.layout = layout_document(self.root, self.viewport_width, self.rules)

    # -- document geometry ---------------------------------------------------

    @property
    def doc_width(self) -> int:
        return int(round(self.layout.doc_width))

    @property
    def doc_height(self) -> int:
        return int(round(self.layout.doc_height))

    def set_viewport_width(self, width: int) -> None:
        if width != self.viewport_width:
            self.viewport_width = width
            self.layout = layout_document(self.root, width, self.rules)

    # -- prepare: removal + fonts ---------------------------------------------

    def prepare(self, families: list[str], seed: int) -> dict:
        removed = self._suppress_pseudo_elements()
        removed += self._remove_unusable()
        self.layout = layout_document(self.root, self.viewport_width, self.rules)
        self._assign_fonts(families, seed)
        self.removal_count = removed
        self.prepared = True
        return {
            "ok": True,
            "pageWidth": self.doc_width,
            "pageHeight": self.doc_height,
            "removed": removed,
            "warnings": list(self.warnings),
        }

    def _suppress_pseudo_elements(self) -> int:
        victims = [el for el in self.root.walk() if el.pseudo]
        for el in victims:
            el.detach()
        return len(victims)

    def _remove_unusable(self) -> int:
        """The four DOM-removal categories (pseudo content is suppressed above):
        invisible styles, oversize children, offscreen elements, placeholders."""
        doc_w, doc_h = self.layout.doc_width, self.layout.doc_height
        victims: list[Element] = []
        claimed: set[int] = set()

        def mark(el: Element) -> None:
            if id(el) not in claimed:
                for sub in el.walk():
                    claimed.add(id(sub))
                victims.append(el)

        for el in self.root.walk():
            if id(el) in claimed or el.tag == "html":
                continue
            style = computed_style(el, self.rules)
            display = style.get("display", "")
            visibility = style.get("visibility", "")
            opacity = style.get("opacity", "")
            invisible = (
                display == "none"
                or visibility in ("hidden", "collapse")
                or _opacity_zero(opacity)
            )
            if invisible:
                mark(el)
                continue
            if "placeholder" in el.attrs:
                mark(el)
                continue
            rect = self.layout.rect_of(el)
            if rect is None:
                continue
            x0, y0, x1, y1 = rect
            if x1 <= 0 or y1 <= 0 or x0 >= doc_w or y0 >= doc_h:
                mark(el)
                continue
            parent_rect = self._ancestor_rect(el)
            if parent_rect is not None and _strictly_contains(rect, parent_rect):
                mark(el)
        for el in victims:
            el.detach()
        return len(victims)

    def _ancestor_rect(self, el: Element) -> tuple[float, float, float, float] | None:
        cur = el.parent
        while cur is not None:
            rect = self.layout.rect_of(cur)
            if rect is not None:
                return rect
            cur = cur.parent
        return None

    def _assign_fonts(self, families: list[str], seed: int) -> None:
        self.font_assignment = {}
        if not families:
            self.warnings.append("empty font family list; keeping page defaults")
            return
        rng = SplitMix64(seed)
        keys: list[str] = []
        for box in self.layout.char_boxes:
            key = paragraph_key_of(box.element)
            if key not in keys:
                keys.append(key)
        for key in keys:
            self.font_assignment[key] = families[rng.next_below(len(families))]

    # -- collect ----------------------------------------------------------------

    def collect(self, page_width: int | None = None, page_height: int | None = None) -> str:
        """Emit the report against the captured area (the emulated viewport);
        callers pass the effective metrics, like innerWidth/innerHeight in a
        real browser after the device override."""
        page_w = page_width if page_width is not None else self.doc_width
        page_h = page_height if page_height is not None else self.doc_height
        chars = []
        regions = []
        seq = 0

        by_text: dict[int, list] = {}
        for box in self.layout.char_boxes:
            by_text.setdefault(id(box.text_node), []).append(box)
        for boxes in by_text.values():
            boxes.sort(key=lambda b: b.offset)
        atoms = {id(b.element): b for b in self.layout.atom_boxes}

        def clip(x, y, w, h):
            x0 = min(max(x, 0.0), page_w)
            y0 = min(max(y, 0.0), page_h)
            x1 = min(max(x + w, 0.0), page_w)
            y1 = min(max(y + h, 0.0), page_h)
            return x0, y0, x1 - x0, y1 - y0

        def walk(el: Element):
            nonlocal seq
            if el.tag in SKIP_TAGS:
                return
            if el.tag in REGION_TAGS:
                box = atoms.get(id(el))
                if box is not None:
                    x, y, w, h = clip(box.x, box.y, box.w, box.h)
                    if w > 0 and h > 0:
                        kind = "latex" if LATEX_CLASS in el.classes() else "image"
                        regions.append(
                            {
                                "rect": {"x": x, "y": y, "w": w, "h": h},
                                "kind": kind,
                                "node_path": list(wrapped_node_path(el)),
                                "seq": seq,
                                "paragraph_key": paragraph_key_of(el),
                            }
                        )
                seq += 1
                return
            for child in el.children:
                if isinstance(child, Element):
                    walk(child)
                    continue
                boxes = {b.offset: b for b in by_text.get(id(child), [])}
                if not _is_wrappable(el):
                    continue
                for offset, ch in enumerate(child.data):
                    box = boxes.get(offset)
                    this_seq = seq
                    seq += 1
                    if box is None:
                        continue  # collapsed whitespace: zero-area, dropped
                    x, y, w, h = clip(box.x, box.y, box.w, box.h)
                    if w <= 0 or h <= 0:
                        continue
                    key = paragraph_key_of(el)
                    family = self.font_assignment.get(key) or _css_family(el, self.rules)
                    span_path = list(wrapped_node_path(el)) + [wrapped_index(el, child, offset)]
                    chars.append(
                        {
                            "text": ch,
                            "rect": {"x": x, "y": y, "w": w, "h": h},
                            "node_path": span_path,
                            "dom_depth": len(span_path),
                            "seq": this_seq,
                            "font_family": family,
                            "font_size_px": box.font_size,
                            "is_whitespace": ch.isspace(),
                            "paragraph_key": key,
                        }
                    )

        walk(self.root)
        report = {
            "page_width": page_w,
            "page_height": page_h,
            "chars": chars,
            "regions": regions,
            "font_assignment": dict(sorted(self.font_assignment.items())),
            "script_version": SCRIPT_VERSION,
            "warnings": list(self.warnings),
        }
        return json.dumps(report, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _opacity_zero(value: str) -> bool:
    try:
        return value != "" and float(value) == 0.0
    except ValueError:
        return False


def _strictly_contains(child, parent) -> bool:
    """Child rect covers the parent rect and is strictly larger on both axes."""
    cx0, cy0, cx1, cy1 = child
    px0, py0, px1, py1 = parent
    covers = cx0 <= px0 and cy0 <= py0 and cx1 >= px1 and cy1 >= py1
    larger = (cx1 - cx0) > (px1 - px0) and (cy1 - cy0) > (py1 - py0)
    return covers and larger


def _css_family(el: Element, rules: list[StyleRule]) -> str:
    cur: Element | None = el
    while cur is not None:
        fam = computed_style(cur, rules).get("font-family")
        if fam:
            return fam.split(",")[0].strip().strip("'\"")
        cur = cur.parent
    return "default"
