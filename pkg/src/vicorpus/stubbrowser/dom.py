"""Minimal DOM for the stub browser: tree building, inline styles, and a tiny
stylesheet subset (tag/class/universal selectors; ::before/::after content).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from html.parser import HTMLParser

VOID_ELEMENTS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}

BLOCK_TAGS = {
    "html", "body", "div", "p", "h1", "h2", "h3", "h4", "h5", "h6",
    "ul", "ol", "li", "dl", "dt", "dd", "section", "article", "aside",
    "header", "footer", "nav", "main", "blockquote", "pre", "figure",
    "figcaption", "table", "tr", "td", "th", "thead", "tbody", "hr", "form",
    "fieldset", "address", "center",
}

SKIP_TAGS = {"script", "style", "noscript", "template", "head", "title", "meta", "link", "base"}

REGION_TAGS = {"img", "canvas", "svg", "video"}

LATEX_CLASS = "mwe-math-fallback-image-inline"

DEFAULT_FONT_SIZE = 16.0
HEADING_SIZES = {"h1": 32.0, "h2": 24.0, "h3": 18.72, "h4": 16.0, "h5": 13.28, "h6": 10.72}


@dataclass
class TextNode:
    data: str
    parent: "Element | None" = None


@dataclass
class Element:
    tag: str
    attrs: dict[str, str] = field(default_factory=dict)
    children: list["Element | TextNode"] = field(default_factory=list)
    parent: "Element | None" = None
    pseudo: bool = False  # synthesized from ::before/::after content

    def append(self, node: "Element | TextNode") -> None:
        node.parent = self
        self.children.append(node)

    def element_children(self) -> list["Element"]:
        return [c for c in self.children if isinstance(c, Element)]

    def classes(self) -> set[str]:
        return set(self.attrs.get("class", "").split())

    def style(self) -> dict[str, str]:
        return parse_inline_style(self.attrs.get("style", ""))

    def is_block(self) -> bool:
        return self.tag in BLOCK_TAGS

    def walk(self):
        yield self
        for c in self.children:
            if isinstance(c, Element):
                yield from c.walk()

    def detach(self) -> None:
        if self.parent is not None:
            self.parent.children.remove(self)
            self.parent = None


def parse_inline_style(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for part in text.split(";"):
        if ":" in part:
            k, v = part.split(":", 1)
            out[k.strip().lower()] = v.strip()
    return out


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Element("html")
        self.stack = [self.root]
        self.saw_html = False

    def handle_starttag(self, tag, attrs):
        tag = tag.lower()
        if tag == "html":
            self.saw_html = True
            self.root.attrs.update({k: v or "" for k, v in attrs})
            return
        el = Element(tag, {k: (v if v is not None else "") for k, v in attrs})
        self.stack[-1].append(el)
        if tag not in VOID_ELEMENTS:
            self.stack.append(el)

    def handle_startendtag(self, tag, attrs):
        tag = tag.lower()
        if tag == "html":
            return
        self.stack[-1].append(Element(tag, {k: (v if v is not None else "") for k, v in attrs}))

    def handle_endtag(self, tag):
        tag = tag.lower()
        if tag in VOID_ELEMENTS or tag == "html":
            return
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return

    def handle_data(self, data):
        if data:
            self.stack[-1].append(TextNode(data))


def parse_document(html: str) -> Element:
    """Parse into a normalized tree: html > (head, body), stray content moved
    into body. Returns the html element."""
    builder = _TreeBuilder()
    builder.feed(html)
    root = builder.root
    head = next((c for c in root.element_children() if c.tag == "head"), None)
    body = next((c for c in root.element_children() if c.tag == "body"), None)
    if head is None:
        head = Element("head")
        head.parent = root
    if body is None:
        body = Element("body")
        body.parent = root
    stray = [c for c in root.children if c is not head and c is not body]
    root.children = [head, body]
    for node in stray:
        body.append(node)
    return root


# -- stylesheet subset ----------------------------------------------------


@dataclass
class StyleRule:
    tag: str | None  # None = universal
    cls: str | None
    pseudo: str | None  # "before" / "after" / None
    decls: dict[str, str]


_SEL_RE = re.compile(r"^\s*(\*|[a-zA-Z][a-zA-Z0-9]*)?(?:\.([-\w]+))?(?:::?(before|after))?\s*$")


def parse_stylesheet(text: str) -> list[StyleRule]:
    rules: list[StyleRule] = []
    text = re.sub(r"/\*.*?\*/", "", text, flags=re.S)
    for block in re.finditer(r"([^{}]+)\{([^{}]*)\}", text):
        selectors, body = block.group(1), block.group(2)
        decls = parse_inline_style(body)
        if not decls:
            continue
        for sel in selectors.split(","):
            m = _SEL_RE.match(sel)
            if not m:
                continue
            tag, cls, pseudo = m.groups()
            rules.append(
                StyleRule(
                    tag=None if tag in (None, "*") else tag.lower(),
                    cls=cls,
                    pseudo=pseudo,
                    decls=decls,
                )
            )
    return rules


def collect_stylesheets(root: Element) -> list[StyleRule]:
    rules: list[StyleRule] = []
    for el in root.walk():
        if el.tag == "style":
            css = "".join(c.data for c in el.children if isinstance(c, TextNode))
            rules.extend(parse_stylesheet(css))
    return rules


def rule_matches(rule: StyleRule, el: Element) -> bool:
    if rule.tag is not None and el.tag != rule.tag:
        return False
    if rule.cls is not None and rule.cls not in el.classes():
        return False
    return True


def computed_style(el: Element, rules: list[StyleRule]) -> dict[str, str]:
    """Stylesheet declarations (document order) overlaid by the inline style."""
    out: dict[str, str] = {}
    for rule in rules:
        if rule.pseudo is None and rule_matches(rule, el):
            out.update(rule.decls)
    out.update(el.style())
    return out


def synthesize_pseudo_content(root: Element, rules: list[StyleRule]) -> int:
    """Materialize ::before/::after content strings as marked child elements.

    The instrumentation's suppression rule later drops every marked node,
    mirroring the injected ``content: none`` override in a real browser.
    """
    created = 0
    pseudo_rules = [r for r in rules if r.pseudo and "content" in r.decls]
    if not pseudo_rules:
        return 0
    for el in list(root.walk()):
        if el.tag in SKIP_TAGS or el.pseudo:
            continue
        for rule in pseudo_rules:
            if not rule_matches(rule, el):
                continue
            content = rule.decls["content"].strip().strip("'\"")
            if not content or content == "none":
                continue
            ghost = Element("span", {"data-pseudo": rule.pseudo}, pseudo=True)
            ghost.append(TextNode(content))
            if rule.pseudo == "before":
                ghost.parent = el
                el.children.insert(0, ghost)
            else:
                el.append(ghost)
            created += 1
    return created


def font_size_for(el: Element, rules: list[StyleRule]) -> float:
    """Inherited font size with px-only overrides and heading defaults."""
    cur: Element | None = el
    while cur is not None:
        style = computed_style(cur, rules)
        fs = style.get("font-size")
        if fs and fs.endswith("px"):
            try:
                return float(fs[:-2])
            except ValueError:
                pass
        if cur.tag in HEADING_SIZES:
            return HEADING_SIZES[cur.tag]
        cur = cur.parent
    return DEFAULT_FONT_SIZE


def node_path(el: Element) -> tuple[int, ...]:
    """Child indices among element children, from the html element down."""
    path: list[int] = []
    cur = el
    while cur.parent is not None:
        path.append(cur.parent.element_children().index(cur))
        cur = cur.parent
    path.append(0)  # the html element itself sits at document index 0
    return tuple(reversed(path))


def nearest_block_ancestor(el: Element) -> Element:
    cur: Element | None = el
    while cur is not None:
        if cur.is_block():
            return cur
        cur = cur.parent
    return el
