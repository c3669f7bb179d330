"""Phishing-site detection by prompting a chat model with a page's URL, HTML and OCR text."""

__version__ = "0.1.0"

from .evaluate import ConfusionMatrix, Metrics, RocAnalysis, confusion, metrics, roc_curve, youden_optimal
from .htmlsimplify import KEEP_TAGS, shorten_link_attributes, simplify_html
from .ocrsimplify import simplify_ocr
from .parse import TriState, Verdict, classify, classify_by_score, parse_response
from .prompt import PromptBundle, build_prompt
from .snapshot import DatasetManifest, Label, OcrLine, PageSnapshot, load_manifest, load_snapshot, store_snapshot
from .tokens import ByteQuarterCounter, TokenBudget, count_tokens, default_budget

__all__ = [
    "ByteQuarterCounter", "ConfusionMatrix", "DatasetManifest", "KEEP_TAGS", "Label", "Metrics",
    "OcrLine", "PageSnapshot", "PromptBundle", "RocAnalysis", "TokenBudget", "TriState", "Verdict",
    "build_prompt", "classify", "classify_by_score", "confusion", "count_tokens", "default_budget",
    "load_manifest", "load_snapshot", "metrics", "parse_response", "roc_curve", "shorten_link_attributes",
    "simplify_html", "simplify_ocr", "store_snapshot", "youden_optimal",
]
