"""Per-snapshot detection pipeline and the dataset evaluation loop."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import evaluate
from .errors import BackendError
from .htmlsimplify import DEFAULT_MAX_ATTR_LEN, simplify_html
from .llmclient import ChatClient, RawResponse
from .ocrclient import OcrServiceConfig, extract_lines
from .ocrsimplify import simplify_ocr
from .parse import Verdict, classify, parse_response
from .prompt import PromptBundle, build_prompt
from .snapshot import DatasetManifest, Label, PageSnapshot, snapshot_filename
from .tokens import TokenBudget, TokenCounter, default_budget

log = logging.getLogger(__name__)

MESSAGE_ROLE = "user"


@dataclass(frozen=True)
class PipelineSettings:
    counter: TokenCounter
    budget: TokenBudget = field(default_factory=default_budget)
    max_attr_len: int = DEFAULT_MAX_ATTR_LEN
    ocr_service: OcrServiceConfig | None = None
    # directory screenshots are resolved against when OCR has to be run
    snapshot_dir: Path | None = None


def prepare_prompt(snapshot: PageSnapshot, settings: PipelineSettings) -> PromptBundle:
    flags = set()
    if snapshot.html:
        html = simplify_html(snapshot.html, settings.budget.html_max, settings.counter, settings.max_attr_len)
        if html.truncated:
            flags.add("html")
        html_text = html.html
    else:
        html_text = ""

    lines = list(snapshot.ocr_lines)
    if not lines and settings.ocr_service is not None and snapshot.screenshot_ref:
        base = settings.snapshot_dir or Path(".")
        lines = extract_lines(base / snapshot.screenshot_ref, settings.ocr_service)
    ocr = simplify_ocr(lines, settings.budget.ocr_max, settings.counter)
    if ocr.truncated:
        flags.add("ocr")
    return build_prompt(snapshot.final_url, html_text, ocr.text, settings.counter, truncation_flags=flags)


@dataclass(frozen=True)
class SampleResult:
    id: str
    prompt: PromptBundle
    verdict: Verdict
    label: Label
    raw: RawResponse | None = None
    error: str | None = None


def run_snapshot(snapshot: PageSnapshot, settings: PipelineSettings, client: ChatClient) -> SampleResult:
    """Simplify, prompt, query and parse one snapshot.  Backend errors propagate."""
    bundle = prepare_prompt(snapshot, settings)
    raw = client.complete(bundle)
    verdict = parse_response(raw.text)
    return SampleResult(snapshot.id, bundle, verdict, classify(verdict), raw=raw)


def _run_tolerant(snapshot: PageSnapshot, settings: PipelineSettings, client: ChatClient) -> SampleResult:
    bundle = prepare_prompt(snapshot, settings)
    try:
        raw = client.complete(bundle)
    except BackendError as exc:
        log.warning("sample %s: backend failed: %s", snapshot.id, exc)
        verdict = Verdict(raw_excerpt="")
        return SampleResult(snapshot.id, bundle, verdict, classify(verdict), error=f"{type(exc).__name__}: {exc}")
    verdict = parse_response(raw.text)
    return SampleResult(snapshot.id, bundle, verdict, classify(verdict), raw=raw)


class TooManyFailures(Exception):
    def __init__(self, failed: int, total: int):
        super().__init__(f"{failed} of {total} samples failed at the backend")
        self.failed = failed
        self.total = total


def failure_limit(total: int, max_failure_rate: float) -> int:
    """Largest tolerated number of backend failures.

    A single failure is always tolerated so tiny runs are not aborted by
    one flaky request.
    """
    return max(1, math.floor(max_failure_rate * total))


def evaluate_manifest(
    manifest: DatasetManifest,
    settings: PipelineSettings,
    client: ChatClient,
    out_dir: str | Path,
    max_failure_rate: float = 0.10,
) -> dict:
    out_dir = Path(out_dir)
    # load everything up front so dataset errors surface before any backend call
    loaded = list(manifest.iter_snapshots())

    workers = client.config.max_concurrency
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda pair: _run_tolerant(pair[1], settings, client), loaded))

    _persist(results, out_dir)
    failed = [r.id for r in results if r.error is not None]
    if len(failed) > failure_limit(len(results), max_failure_rate):
        raise TooManyFailures(len(failed), len(results))

    verdicts = {r.id: r.verdict for r in results}
    rep = evaluate.report(manifest, verdicts, failed)
    (out_dir / "report.json").write_text(evaluate.dumps_report(rep), encoding="utf-8")
    (out_dir / "roc.tsv").write_text(evaluate.roc_points_tsv(rep), encoding="utf-8")
    return rep


def recompute_report(manifest: DatasetManifest, out_dir: str | Path) -> dict:
    """Rebuild the report from the verdict records an earlier run persisted."""
    verdict_dir = Path(out_dir) / "verdicts"
    verdicts = {}
    failed = []
    for entry in manifest.entries:
        path = verdict_dir / snapshot_filename(entry.id)
        if not path.is_file():
            continue  # surfaces as MissingVerdict below
        record = json.loads(path.read_text(encoding="utf-8"))
        verdicts[entry.id] = Verdict.from_dict(record["verdict"])
        if record.get("error"):
            failed.append(entry.id)
    return evaluate.report(manifest, verdicts, failed)


def _persist(results: list[SampleResult], out_dir: Path) -> None:
    resp_dir = out_dir / "responses"
    verdict_dir = out_dir / "verdicts"
    resp_dir.mkdir(parents=True, exist_ok=True)
    verdict_dir.mkdir(parents=True, exist_ok=True)
    for r in results:
        stem = snapshot_filename(r.id)[: -len(".json")]
        if r.raw is not None:
            (resp_dir / f"{stem}.txt").write_text(r.raw.text, encoding="utf-8", newline="")
        else:
            (resp_dir / f"{stem}.error.txt").write_text((r.error or "") + "\n", encoding="utf-8")
        record = {
            "id": r.id,
            "verdict": r.verdict.to_dict(),
            "label": r.label.value,
            "prompt_sha256": r.prompt.sha256,
            "tokens": {
                "template": r.prompt.template_tokens,
                "url": r.prompt.url_tokens,
                "html": r.prompt.html_tokens,
                "ocr": r.prompt.ocr_tokens,
            },
            "truncation_flags": sorted(r.prompt.truncation_flags),
            "attempt": r.raw.attempt if r.raw else None,
            "error": r.error,
        }
        (verdict_dir / f"{stem}.json").write_text(
            json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
        )
