"""Shrink OCR text below a token cap by dropping the smallest-font lines first."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .snapshot import OcrLine
from .tokens import TokenCounter, count_tokens

SEPARATOR = "\n"


@dataclass(frozen=True)
class SimplifiedText:
    text: str
    tokens: int
    truncated: bool = False
    kept: tuple[int, ...] = ()  # indices of surviving input lines

    def __str__(self) -> str:
        return self.text


def _fit_prefix(text: str, budget: int, counter: TokenCounter) -> str:
    """Longest prefix of ``text`` whose count is below ``budget``."""
    lo, hi = 0, len(text)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if count_tokens(counter, text[:mid]) < budget:
            lo = mid
        else:
            hi = mid - 1
    # counters need not be monotone in prefix length
    while lo > 0 and count_tokens(counter, text[:lo]) >= budget:
        lo -= 1
    return text[:lo]


def simplify_ocr(lines: Sequence[OcrLine], budget: int, counter: TokenCounter) -> SimplifiedText:
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    alive = list(range(len(lines)))

    def joined(idx):
        return SEPARATOR.join(lines[i].text for i in idx)

    text = joined(alive)
    n = count_tokens(counter, text)
    while n >= budget and alive:
        smallest = min(lines[i].font_height for i in alive)
        rest = [i for i in alive if lines[i].font_height != smallest]
        if not rest:
            # removing the last size class would leave nothing: cut the text instead
            cut = _fit_prefix(text, budget, counter).rstrip()
            return SimplifiedText(cut, count_tokens(counter, cut), truncated=True, kept=tuple(alive))
        alive = rest
        text = joined(alive)
        n = count_tokens(counter, text)
    return SimplifiedText(text, n, truncated=n >= budget, kept=tuple(alive))
