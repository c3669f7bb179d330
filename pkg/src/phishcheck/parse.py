"""Turn raw model output into a verdict and a phishing/non-phishing label.

Parsing never raises.  It walks a ladder of increasingly forgiving
strategies and records which one worked in ``Verdict.parse_mode``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any

from .snapshot import Label

KEYS = ("phishing_score", "brands", "phishing", "suspicious_domain")
EXCERPT_LEN = 240


class TriState(str, Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"


class ParseMode(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"
    HEURISTIC = "heuristic"
    FAILED = "failed"


@dataclass(frozen=True)
class Verdict:
    phishing_score: int | None = None
    brands: str | None = None
    phishing: TriState = TriState.UNKNOWN
    suspicious_domain: TriState = TriState.UNKNOWN
    parse_mode: ParseMode = ParseMode.FAILED
    raw_excerpt: str = ""

    def answer_dict(self) -> dict[str, Any]:
        """The four answer keys in the form the prompt asks for."""

        def tri(v: TriState):
            return {TriState.TRUE: True, TriState.FALSE: False}.get(v, "unknown")

        return {
            "phishing_score": self.phishing_score,
            "brands": self.brands,
            "phishing": tri(self.phishing),
            "suspicious_domain": tri(self.suspicious_domain),
        }

    def to_dict(self) -> dict[str, Any]:
        d = self.answer_dict()
        d["parse_mode"] = self.parse_mode.value
        d["raw_excerpt"] = self.raw_excerpt
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Verdict":
        return cls(
            phishing_score=_to_score(d.get("phishing_score")),
            brands=_to_brands(d.get("brands")),
            phishing=_to_tristate(d.get("phishing")),
            suspicious_domain=_to_tristate(d.get("suspicious_domain")),
            parse_mode=ParseMode(d.get("parse_mode", "failed")),
            raw_excerpt=d.get("raw_excerpt", ""),
        )


# -- value coercion -----------------------------------------------------------

_TRUE_WORDS = {"true", "yes"}
_FALSE_WORDS = {"false", "no"}


def _to_tristate(value: Any) -> TriState:
    if isinstance(value, bool):
        return TriState.TRUE if value else TriState.FALSE
    if isinstance(value, str):
        v = value.strip().strip("\"'`*").strip().lower()
        if v in _TRUE_WORDS:
            return TriState.TRUE
        if v in _FALSE_WORDS:
            return TriState.FALSE
    return TriState.UNKNOWN


def _to_score(value: Any) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, float):
        if not value.is_integer():
            return None
        value = int(value)
    if isinstance(value, str):
        m = re.fullmatch(r"\s*(\d{1,2})(?:\.0+)?\s*(?:/\s*10)?\s*", value)
        if not m:
            return None
        value = int(m.group(1))
    if isinstance(value, int) and 0 <= value <= 10:
        return value
    return None


def _to_brands(value: Any) -> str | None:
    if isinstance(value, list):
        parts = [str(v).strip() for v in value if isinstance(v, (str, int, float)) and str(v).strip()]
        value = ", ".join(parts) if parts else None
    if not isinstance(value, str):
        return None
    v = value.strip()
    if not v or v.lower() in ("none", "null", "n/a", "unknown"):
        return None
    return v


def _from_mapping(obj: dict[str, Any], mode: ParseMode, excerpt: str) -> Verdict:
    return Verdict(
        phishing_score=_to_score(obj.get("phishing_score")),
        brands=_to_brands(obj.get("brands")),
        phishing=_to_tristate(obj.get("phishing")),
        suspicious_domain=_to_tristate(obj.get("suspicious_domain")),
        parse_mode=mode,
        raw_excerpt=excerpt[:EXCERPT_LEN],
    )


# -- candidate extraction -----------------------------------------------------

_FENCE_RE = re.compile(r"```[a-zA-Z]*[ \t]*\n?(.*?)```", re.DOTALL)


def brace_objects(text: str) -> list[str]:
    """Top-level brace-balanced spans, in order of appearance.

    Quotes are tracked only inside braces so prose apostrophes do not
    confuse the scanner.
    """
    spans = []
    depth = 0
    start = 0
    quote = None
    escaped = False
    for i, ch in enumerate(text):
        if depth and quote:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote or ch == "\n":
                quote = None
            continue
        if ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth:
            depth -= 1
            if depth == 0:
                spans.append(text[start : i + 1])
        elif depth and ch in "\"'":
            quote = ch
    return spans


def candidates(text: str) -> list[str]:
    """Structured-data candidates, most preferred first.

    The last fenced block comes first, then brace-balanced objects from
    last to first.
    """
    out: list[str] = []
    fenced = _FENCE_RE.findall(text)
    for block in reversed(fenced):
        objs = brace_objects(block)
        out.extend(reversed(objs) if objs else [block.strip()])
    out.extend(reversed(brace_objects(text)))
    seen = set()
    uniq = []
    for c in out:
        if c and c not in seen:
            seen.add(c)
            uniq.append(c)
    return uniq


def _load_object(candidate: str) -> dict[str, Any] | None:
    try:
        obj = json.loads(candidate)
    except (ValueError, RecursionError):
        return None
    return obj if isinstance(obj, dict) else None


def _has_all_keys(obj: dict[str, Any]) -> bool:
    return all(k in obj for k in KEYS)


# -- lenient normalization ----------------------------------------------------

_LITERALS = {"True": "true", "False": "false", "None": "null", "TRUE": "true", "FALSE": "false", "NONE": "null"}
_BAREWORD_RE = re.compile(r"[A-Za-z_]+")


def normalize_lenient(candidate: str) -> str:
    """Rewrite near-JSON into JSON.

    Single-quoted strings become double-quoted, Python-style literals are
    lowercased, bare ``unknown`` becomes a string, and trailing commas go.
    """
    out = []
    i = 0
    n = len(candidate)
    while i < n:
        ch = candidate[i]
        if ch in "\"'":
            quote = ch
            j = i + 1
            buf = []
            while j < n:
                c = candidate[j]
                if c == "\\" and j + 1 < n:
                    nxt = candidate[j + 1]
                    if quote == "'" and nxt == "'":
                        buf.append("'")
                    else:
                        buf.append(c + nxt)
                    j += 2
                    continue
                if c == quote:
                    break
                if c == '"' and quote == "'":
                    buf.append('\\"')
                elif c == "\n":
                    buf.append("\\n")
                else:
                    buf.append(c)
                j += 1
            out.append('"' + "".join(buf) + '"')
            i = j + 1
            continue
        m = _BAREWORD_RE.match(candidate, i)
        if m:
            word = m.group(0)
            if word in _LITERALS:
                out.append(_LITERALS[word])
            elif word.lower() == "unknown":
                out.append('"unknown"')
            elif word in ("true", "false", "null"):
                out.append(word)
            else:
                # unquoted key or stray word
                out.append('"' + word + '"')
            i = m.end()
            continue
        out.append(ch)
        i += 1
    return re.sub(r",\s*([}\]])", r"\1", "".join(out))


# -- heuristic scan -------------------------------------------------------------

_SEP = r"""["'`*]*\s*[:=]\s*["'`*]*"""
_HEURISTIC = {
    "phishing_score": re.compile(r"\bphishing[_ ]score\b" + _SEP + r"(\d{1,2})(?!\d)", re.IGNORECASE),
    "brands": re.compile(
        r"\bbrands?\b[\"'`*]*\s*[:=]\s*(?:\"([^\"\n]*)\"|'([^'\n]*)'|([^,}\n]+))", re.IGNORECASE
    ),
    "phishing": re.compile(r"\bphishing\b" + _SEP + r"(true|false|yes|no|unknown)\b", re.IGNORECASE),
    "suspicious_domain": re.compile(
        r"\bsuspicious[_ ]domain\b" + _SEP + r"(true|false|yes|no|unknown)\b", re.IGNORECASE
    ),
}


def _heuristic(text: str) -> Verdict:
    found: dict[str, Any] = {}
    last_pos = 0
    for key, rx in _HEURISTIC.items():
        matches = list(rx.finditer(text))
        if not matches:
            continue
        m = matches[-1]
        last_pos = max(last_pos, m.end())
        if key == "brands":
            found[key] = next(g for g in m.groups() if g is not None).strip()
        else:
            found[key] = m.group(1)
    if not found:
        return Verdict(parse_mode=ParseMode.FAILED, raw_excerpt=text[-EXCERPT_LEN:])
    excerpt = text[max(0, last_pos - EXCERPT_LEN) : last_pos]
    return _from_mapping(found, ParseMode.HEURISTIC, excerpt)


def parse_response(raw: str) -> Verdict:
    try:
        return _parse(raw)
    except Exception:  # totality: a verdict always comes back
        return Verdict(parse_mode=ParseMode.FAILED, raw_excerpt=str(raw)[-EXCERPT_LEN:])


def _parse(raw: str) -> Verdict:
    if not isinstance(raw, str):
        raw = str(raw)
    cands = candidates(raw)
    for cand in cands:
        obj = _load_object(cand)
        if obj is not None and _has_all_keys(obj):
            return _from_mapping(obj, ParseMode.STRICT, cand)
    for cand in cands:
        obj = _load_object(normalize_lenient(cand))
        if obj is not None and _has_all_keys(obj):
            return _from_mapping(obj, ParseMode.LENIENT, cand)
    return _heuristic(raw)


def classify(verdict: Verdict) -> Label:
    if verdict.phishing is TriState.TRUE or verdict.suspicious_domain is TriState.TRUE:
        return Label.PHISHING
    return Label.NON_PHISHING


def classify_by_score(verdict: Verdict, threshold: int) -> Label:
    if not 0 <= threshold <= 11:
        raise ValueError("threshold must be in 0..11")
    if verdict.phishing_score is not None and verdict.phishing_score >= threshold:
        return Label.PHISHING
    return Label.NON_PHISHING
