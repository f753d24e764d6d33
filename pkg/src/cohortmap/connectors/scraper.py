"""Monument-registry scraper: lenient HTML parsing with configurable selectors.

Selector strings live in configuration, not code, so site drift is handled
by editing a config file.  The supported selector grammar is a small CSS
subset: ``tag``, ``.class``, ``#id``, combinations like ``div.entry``, and
space-separated descendant chains.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from html.parser import HTMLParser

__all__ = [
    "MonumentEntry",
    "ScrapeConfig",
    "SelectorMiss",
    "scrape_monument_entries",
]

_VOID_TAGS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}
_WS = re.compile(r"\s+")


class SelectorMiss(ValueError):
    """Configured selectors matched nothing; the site layout probably moved."""


@dataclass(frozen=True)
class MonumentEntry:
    url: str
    address_text: str
    description_text: str

    def __post_init__(self) -> None:
        if not self.url:
            raise ValueError("url must be non-empty")
        if not (self.address_text or self.description_text):
            raise ValueError("need at least one of address/description")


@dataclass(frozen=True)
class ScrapeConfig:
    """Element selectors for one registry site."""

    entry_selector: str
    address_selector: str
    description_selector: str
    link_selector: str = "a"


class _Node:
    __slots__ = ("tag", "attrs", "children", "parent")

    def __init__(self, tag: str, attrs: dict[str, str], parent: "_Node | None") -> None:
        self.tag = tag
        self.attrs = attrs
        self.children: list[object] = []  # _Node or str
        self.parent = parent

    @property
    def classes(self) -> set[str]:
        return set(self.attrs.get("class", "").split())

    def text(self) -> str:
        parts: list[str] = []

        def walk(node: "_Node") -> None:
            for child in node.children:
                if isinstance(child, _Node):
                    walk(child)
                else:
                    parts.append(child)

        walk(self)
        return _WS.sub(" ", "".join(parts)).strip()

    def iter_nodes(self):
        for child in self.children:
            if isinstance(child, _Node):
                yield child
                yield from child.iter_nodes()


class _TreeBuilder(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root = _Node("[root]", {}, None)
        self._stack = [self.root]

    def handle_starttag(self, tag, attrs):
        node = _Node(tag, {k: (v or "") for k, v in attrs}, self._stack[-1])
        self._stack[-1].children.append(node)
        if tag not in _VOID_TAGS:
            self._stack.append(node)

    def handle_startendtag(self, tag, attrs):
        node = _Node(tag, {k: (v or "") for k, v in attrs}, self._stack[-1])
        self._stack[-1].children.append(node)

    def handle_endtag(self, tag):
        # lenient: close the nearest matching open element
        for i in range(len(self._stack) - 1, 0, -1):
            if self._stack[i].tag == tag:
                del self._stack[i:]
                break

    def handle_data(self, data):
        if data:
            self._stack[-1].children.append(data)


@dataclass(frozen=True)
class _Step:
    tag: str | None
    classes: frozenset[str]
    node_id: str | None

    def matches(self, node: _Node) -> bool:
        if self.tag and node.tag != self.tag:
            return False
        if self.node_id and node.attrs.get("id") != self.node_id:
            return False
        return self.classes <= node.classes


_STEP_RE = re.compile(r"^([a-zA-Z][a-zA-Z0-9-]*)?(#[\w-]+)?((?:\.[\w-]+)*)$")


def _parse_selector(selector: str) -> list[_Step]:
    steps = []
    for token in selector.split():
        m = _STEP_RE.match(token)
        if not m or not token:
            raise ValueError(f"unsupported selector step: {token!r}")
        tag, node_id, classes = m.groups()
        steps.append(
            _Step(
                tag=tag.lower() if tag else None,
                node_id=node_id[1:] if node_id else None,
                classes=frozenset(c for c in (classes or "").split(".") if c),
            )
        )
    if not steps:
        raise ValueError("empty selector")
    return steps


def _select(scope: _Node, selector: str) -> list[_Node]:
    steps = _parse_selector(selector)
    current = [scope]
    for step in steps:
        matched: list[_Node] = []
        seen: set[int] = set()
        for node in current:
            for candidate in node.iter_nodes():
                if id(candidate) not in seen and step.matches(candidate):
                    seen.add(id(candidate))
                    matched.append(candidate)
        current = matched
    return current


def parse_html(text: str) -> _Node:
    builder = _TreeBuilder()
    builder.feed(text)
    return builder.root


def scrape_monument_entries(
    html: str, config: ScrapeConfig, base_url: str = ""
) -> list[MonumentEntry]:
    """Extract monument entries from a registry page.

    Entries with neither address nor description are skipped.  Raises
    SelectorMiss when the entry selector matches nothing, or when every
    matched entry comes back empty — both signal site drift.
    """
    root = parse_html(html)
    entry_nodes = _select(root, config.entry_selector)
    if not entry_nodes:
        raise SelectorMiss(f"entry selector {config.entry_selector!r} matched nothing")

    entries: list[MonumentEntry] = []
    for node in entry_nodes:
        address_nodes = _select(node, config.address_selector)
        description_nodes = _select(node, config.description_selector)
        address = address_nodes[0].text() if address_nodes else ""
        description = description_nodes[0].text() if description_nodes else ""
        if not (address or description):
            continue
        url = base_url
        for link in _select(node, config.link_selector):
            href = link.attrs.get("href")
            if href:
                url = href
                break
        if not url:
            continue
        entries.append(
            MonumentEntry(url=url, address_text=address, description_text=description)
        )
    if not entries:
        raise SelectorMiss(
            f"entry selector {config.entry_selector!r} matched {len(entry_nodes)} "
            "node(s) but none yielded an address or description"
        )
    return entries
