"""Render the detection prompt from a URL, simplified HTML and OCR text."""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .tokens import TokenCounter, count_tokens

log = logging.getLogger(__name__)

TEMPLATE_RESOURCE = "prompt_template.txt"
TEMPLATE_SHA256 = "d264c6b466585f55f2dbd75e52ee60b1cc41055e9baab0c5231dad8a2ab3b4ff"

URL_SLOT = "{URL}"
HTML_SLOT = "{Browser-rendered HTML}"
OCR_SLOT = "{OCR-extracted text}"
_SLOT_RE = re.compile("|".join(re.escape(s) for s in (URL_SLOT, HTML_SLOT, OCR_SLOT)))
_FENCE_RUN_RE = re.compile(r"`{3,}")
FENCE = "```"


class TemplateIntegrityError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def load_template(path: str | None = None, expected_sha256: str | None = None) -> str:
    """Read the template, checking its hash.

    The packaged template is always checked against :data:`TEMPLATE_SHA256`;
    a custom template at ``path`` only when ``expected_sha256`` is given.
    """
    if path is None:
        raw = resources.files("phishcheck").joinpath("data", TEMPLATE_RESOURCE).read_bytes()
        expected_sha256 = expected_sha256 or TEMPLATE_SHA256
    else:
        with open(path, "rb") as fh:
            raw = fh.read()
    digest = hashlib.sha256(raw).hexdigest()
    if expected_sha256 is not None and digest != expected_sha256:
        raise TemplateIntegrityError(f"template hash {digest} does not match pinned {expected_sha256}")
    text = raw.decode("utf-8")
    for slot in (URL_SLOT, HTML_SLOT, OCR_SLOT):
        if text.count(slot) != 1:
            raise TemplateIntegrityError(f"template must contain {slot} exactly once")
    return text


def neutralize_fences(payload: str) -> tuple[str, bool]:
    """Collapse every run of three or more backticks to two."""
    out, n = _FENCE_RUN_RE.subn("``", payload)
    return out, n > 0


@dataclass(frozen=True)
class PromptBundle:
    text: str
    url_tokens: int
    html_tokens: int
    ocr_tokens: int
    template_tokens: int
    truncation_flags: frozenset[str] = frozenset()
    # payload sections that had backtick runs collapsed
    neutralized: frozenset[str] = field(default_factory=frozenset)

    @property
    def total_tokens(self) -> int:
        return self.template_tokens + self.url_tokens + self.html_tokens + self.ocr_tokens

    @property
    def sha256(self) -> str:
        return prompt_hash(self.text)


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_prompt(
    url: str,
    simplified_html: str,
    simplified_ocr: str,
    counter: TokenCounter,
    *,
    truncation_flags: set[str] | frozenset[str] = frozenset(),
    template: str | None = None,
) -> PromptBundle:
    template = template if template is not None else load_template()
    values = {}
    neutralized = set()
    for slot, name, payload in (
        (URL_SLOT, "url", url),
        (HTML_SLOT, "html", simplified_html),
        (OCR_SLOT, "ocr", simplified_ocr),
    ):
        clean, changed = neutralize_fences(payload)
        if changed:
            log.warning("collapsed triple-backtick runs in %s payload", name)
            neutralized.add(name)
        values[slot] = clean
    # one pass, so placeholder text inside a payload is never substituted again
    text = _SLOT_RE.sub(lambda m: values[m.group(0)], template)
    bare = _SLOT_RE.sub("", template)
    return PromptBundle(
        text=text,
        url_tokens=count_tokens(counter, values[URL_SLOT]),
        html_tokens=count_tokens(counter, values[HTML_SLOT]),
        ocr_tokens=count_tokens(counter, values[OCR_SLOT]),
        template_tokens=count_tokens(counter, bare),
        truncation_flags=frozenset(truncation_flags),
        neutralized=frozenset(neutralized),
    )
