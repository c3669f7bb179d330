"""Token counting and the fixed per-section prompt budget."""

from __future__ import annotations

import base64
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Protocol, runtime_checkable


@dataclass(frozen=True)
class TokenBudget:
    total: int = 4096
    template: int = 362
    html_max: int = 3000
    ocr_max: int = 500
    url_max: int = 234

    def __post_init__(self):
        parts = (self.template, self.html_max, self.ocr_max, self.url_max)
        if any(p < 0 for p in parts):
            raise ValueError("budget parts must be nonnegative")
        if sum(parts) != self.total:
            raise ValueError(f"budget parts sum to {sum(parts)}, expected {self.total}")


def default_budget() -> TokenBudget:
    return TokenBudget()


@runtime_checkable
class TokenCounter(Protocol):
    name: str

    def count(self, text: str) -> int: ...


class ByteQuarterCounter:
    """Reference counter: one token per started 4-byte chunk of UTF-8."""

    name = "reference"

    def count(self, text: str) -> int:
        return math.ceil(len(text.encode("utf-8")) / 4)

    def __repr__(self):
        return "ByteQuarterCounter()"


class WordCounter:
    """Counts whitespace-separated words; handy for reasoning about budgets by hand."""

    name = "words"

    def count(self, text: str) -> int:
        return len(text.split())


class FunctionCounter:
    """Wraps a plain callable so tests can inject arbitrary counting schemes."""

    def __init__(self, fn: Callable[[str], int], name: str = "custom"):
        self._fn = fn
        self.name = name

    def count(self, text: str) -> int:
        return self._fn(text)

    def __repr__(self):
        return f"FunctionCounter(name={self.name!r})"


# Pre-tokenizer close to the cl100k pattern, restricted to what `re` supports.
_PRETOKEN_RE = re.compile(
    r"""'(?i:[sdmt]|ll|ve|re)|[^\r\n\w]?[^\W\d_]+|\d{1,3}| ?[^\s\w]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+""",
)


class BpeCounter:
    """Byte-pair-encoding counter backed by a rank file.

    The file uses the common ``<base64 token> <rank>`` per-line layout.
    Counts are exact for the ranks given, up to pre-tokenizer differences.
    """

    def __init__(self, ranks: dict[bytes, int], name: str = "bpe"):
        if not ranks:
            raise ValueError("empty BPE rank table")
        self.ranks = ranks
        self.name = name

    @classmethod
    def from_file(cls, path: str | Path, name: str | None = None) -> "BpeCounter":
        ranks: dict[bytes, int] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="ascii").splitlines(), 1):
            if not line.strip():
                continue
            try:
                token, rank = line.split()
                ranks[base64.b64decode(token)] = int(rank)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad rank line") from exc
        return cls(ranks, name or f"bpe:{Path(path).stem}")

    def _merge_count(self, piece: bytes) -> int:
        if piece in self.ranks:
            return 1
        parts = [piece[i : i + 1] for i in range(len(piece))]
        while len(parts) > 1:
            best = None
            best_rank = None
            for i in range(len(parts) - 1):
                rank = self.ranks.get(parts[i] + parts[i + 1])
                if rank is not None and (best_rank is None or rank < best_rank):
                    best, best_rank = i, rank
            if best is None:
                break
            parts[best : best + 2] = [parts[best] + parts[best + 1]]
        return len(parts)

    def count(self, text: str) -> int:
        return sum(self._merge_count(m.encode("utf-8")) for m in _PRETOKEN_RE.findall(text))


_REGISTRY: dict[str, Callable[[], TokenCounter]] = {
    "reference": ByteQuarterCounter,
    "words": WordCounter,
}


def register_counter(name: str, factory: Callable[[], TokenCounter]) -> None:
    _REGISTRY[name] = factory


def available_counters() -> list[str]:
    return sorted(_REGISTRY)


@lru_cache(maxsize=None)
def _bpe_from_path(path: str) -> BpeCounter:
    return BpeCounter.from_file(path)


def get_counter(name: str) -> TokenCounter:
    """Resolve a counter by name.

    ``bpe:<path>`` loads a rank file; other names come from the registry.
    """
    if name.startswith("bpe:"):
        return _bpe_from_path(name[4:])
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(
            f"unknown token counter {name!r}; choose from {available_counters()} or bpe:<rank file>"
        ) from None


def count_tokens(counter: TokenCounter, text: str) -> int:
    n = counter.count(text)
    if n < 0:
        raise ValueError(f"counter {counter.name!r} returned a negative count")
    return n
