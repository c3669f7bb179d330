"""Shrink browser-rendered HTML below a token cap.

Stages run in a fixed order and the function returns as soon as the
document fits:

1. drop ``script``/``style`` elements and comment-like nodes;
2. unwrap every element outside :data:`KEEP_TAGS`, remove elements that
   enclose no text, shorten base64 image sources and long link targets;
3. delete the element at the middle of the document, one at a time.

All counts are strict: a document "fits" when its count is below the budget.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from bs4 import BeautifulSoup, Tag
from bs4.element import CData, Comment, Declaration, Doctype, ProcessingInstruction

from .errors import UnparseableMarkup
from .tokens import TokenCounter, count_tokens

log = logging.getLogger(__name__)

KEEP_TAGS = frozenset(
    """head title meta body h1 h2 h3 h4 h5 h6 p strong a img hr table tbody
    tr th td ol ul li ruby label""".split()
)
# kept by the empty-element pass even without text; their attributes carry the signal
TEXTLESS_OK = frozenset({"img", "hr", "meta", "title"})
REMOVE_TAGS = ("script", "style")

DEFAULT_MAX_ATTR_LEN = 64
ELLIPSIS = "..."


@dataclass(frozen=True)
class SimplifiedHtml:
    html: str
    tokens: int
    truncated: bool = False
    # 1: after removal of scripts/styles/comments, 2: after unwrap/shorten, 3: after pruning
    stage: int = 1
    pruned_keep_tags: int = 0

    def __str__(self) -> str:
        return self.html


def parse_html(html: str | bytes) -> BeautifulSoup:
    if isinstance(html, bytes):
        for encoding in ("utf-8", "cp1252"):
            try:
                html = html.decode(encoding)
                break
            except UnicodeDecodeError:
                continue
        else:  # pragma: no cover - cp1252 only fails on 5 undefined bytes
            raise UnparseableMarkup("byte sequence is not decodable as text")
    try:
        html.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise UnparseableMarkup(f"markup contains unencodable characters: {exc}") from None
    try:
        return BeautifulSoup(html, "html.parser")
    except Exception as exc:  # html.parser gives up on a few pathological inputs
        raise UnparseableMarkup(str(exc)) from exc


def serialize(soup: BeautifulSoup) -> str:
    return soup.decode(formatter="minimal")


def _is_comment_like(node) -> bool:
    if isinstance(node, Doctype):
        return False
    return isinstance(node, (Comment, ProcessingInstruction, Declaration, CData))


def remove_noise(soup: BeautifulSoup) -> None:
    for tag in soup.find_all(REMOVE_TAGS):
        if not tag.decomposed:
            tag.decompose()
    for node in soup.find_all(string=_is_comment_like):
        node.extract()


def unwrap_unimportant(soup: BeautifulSoup) -> None:
    for tag in soup.find_all(True):
        if tag.name not in KEEP_TAGS:
            tag.unwrap()


def _keeps_without_text(tag: Tag) -> bool:
    if tag.name in TEXTLESS_OK:
        return True
    return tag.find(TEXTLESS_OK) is not None


def remove_textless(soup: BeautifulSoup) -> None:
    for tag in soup.find_all(True):
        if tag.decomposed:
            continue
        if tag.get_text().strip():
            continue
        if _keeps_without_text(tag):
            continue
        tag.decompose()


def _shorten(value: str, max_len: int) -> str:
    return value[:max_len] + ELLIPSIS


def _is_base64_data_uri(value: str) -> bool:
    return value.startswith("data:") and ";base64," in value


def shorten_attributes(soup: BeautifulSoup, max_attr_len: int = DEFAULT_MAX_ATTR_LEN) -> None:
    for img in soup.find_all("img"):
        src = img.get("src")
        if isinstance(src, str) and _is_base64_data_uri(src) and len(src) > max_attr_len:
            img["src"] = _shorten(src, max_attr_len)
    for a in soup.find_all("a"):
        href = a.get("href")
        if isinstance(href, str) and len(href) > max_attr_len:
            a["href"] = _shorten(href, max_attr_len)


def shorten_link_attributes(html: str, max_attr_len: int = DEFAULT_MAX_ATTR_LEN) -> str:
    if max_attr_len <= 0:
        raise ValueError("max_attr_len must be positive")
    soup = parse_html(html)
    shorten_attributes(soup, max_attr_len)
    return serialize(soup)


def reduce_structure(soup: BeautifulSoup, max_attr_len: int = DEFAULT_MAX_ATTR_LEN) -> None:
    unwrap_unimportant(soup)
    remove_textless(soup)
    shorten_attributes(soup, max_attr_len)


def _protected(elements: list[Tag]) -> set[int]:
    leaves = [t for t in elements if t.find(True) is None]
    if not leaves:
        return set()
    keep: set[int] = set()
    for leaf in (leaves[0], leaves[-1]):
        keep.add(id(leaf))
        keep.update(id(p) for p in leaf.parents if isinstance(p, Tag) and p.name != "[document]")
    return keep


def pick_midpoint(soup: BeautifulSoup) -> Tag | None:
    """Element that the next pruning step removes, or ``None`` when none are left.

    Candidates are the elements in document order minus the root-to-leaf
    paths of the first and last leaf elements.  Once only those paths
    remain, every element is a candidate.
    """
    elements = soup.find_all(True)
    if not elements:
        return None
    keep = _protected(elements)
    candidates = [t for t in elements if id(t) not in keep] or elements
    return candidates[len(candidates) // 2]


def simplify_html(
    html: str | bytes,
    budget: int,
    counter: TokenCounter,
    max_attr_len: int = DEFAULT_MAX_ATTR_LEN,
) -> SimplifiedHtml:
    if budget <= 0:
        raise ValueError("budget must be positive")
    soup = parse_html(html)

    remove_noise(soup)
    out = serialize(soup)
    n = count_tokens(counter, out)
    if n < budget:
        return SimplifiedHtml(out, n, stage=1)

    reduce_structure(soup, max_attr_len)
    out = serialize(soup)
    n = count_tokens(counter, out)
    if n < budget:
        return SimplifiedHtml(out, n, stage=2)

    pruned_keep = 0
    while n >= budget:
        victim = pick_midpoint(soup)
        if victim is None:
            log.warning("html still %d tokens with no elements left (budget %d)", n, budget)
            return SimplifiedHtml(out, n, truncated=True, stage=3, pruned_keep_tags=pruned_keep)
        pruned_keep += sum(1 for t in [victim, *victim.find_all(True)] if t.name in KEEP_TAGS)
        victim.decompose()
        out = serialize(soup)
        n = count_tokens(counter, out)
    return SimplifiedHtml(out, n, stage=3, pruned_keep_tags=pruned_keep)
