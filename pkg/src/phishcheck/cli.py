"""Command-line entry point.

Exit codes:

    0  success
    2  usage error
    3  input could not be loaded (snapshot, manifest, response file)
    4  backend or browser failure
    5  internal error
    6  evaluation aborted: too many backend failures
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import __version__
from .crawler import CrawlConfig, capture
from .errors import BackendError, CrawlError, LoadError, OcrServiceError, PhishcheckError, UnparseableMarkup
from .htmlsimplify import DEFAULT_MAX_ATTR_LEN, simplify_html
from .llmclient import API_KEY_ENV, BackendConfig, ChatClient, MockBackend
from .ocrclient import OcrServiceConfig
from .ocrsimplify import simplify_ocr
from .parse import classify, parse_response
from .pipeline import MESSAGE_ROLE, PipelineSettings, TooManyFailures, evaluate_manifest, prepare_prompt, run_snapshot
from .prompt import TEMPLATE_SHA256
from .snapshot import load_manifest, load_snapshot, store_snapshot
from .tokens import default_budget, get_counter

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_LOAD = 3
EXIT_BACKEND = 4
EXIT_INTERNAL = 5
EXIT_ABORTED = 6

log = logging.getLogger("phishcheck")


class UsageError(PhishcheckError):
    pass

# setting name -> (environment variable, built-in default)
SETTINGS: dict[str, tuple[str | None, Any]] = {
    "token_counter": ("PHISHCHECK_TOKEN_COUNTER", "reference"),
    "endpoint": ("PHISHCHECK_ENDPOINT", None),
    "model": ("PHISHCHECK_MODEL", "default"),
    "max_retries": ("PHISHCHECK_MAX_RETRIES", 3),
    "retry_backoff": (None, [1.0, 2.0, 4.0]),
    "request_timeout": (None, 120.0),
    "max_concurrency": ("PHISHCHECK_MAX_CONCURRENCY", 4),
    "temperature": (None, None),
    "top_p": (None, None),
    "api_key_header": (None, "Authorization"),
    "debug_endpoint": ("PHISHCHECK_DEBUG_ENDPOINT", "http://127.0.0.1:9222"),
    "navigation_timeout": (None, 30.0),
    "settle_delay": (None, 3.0),
    "html_budget": (None, default_budget().html_max),
    "ocr_budget": (None, default_budget().ocr_max),
    "max_attr_len": (None, DEFAULT_MAX_ATTR_LEN),
    "ocr_endpoint": ("PHISHCHECK_OCR_ENDPOINT", None),
    "max_failure_rate": (None, 0.10),
}


class Settings:
    """Resolves each setting as flag, then environment, then config file, then default."""

    def __init__(self, args: argparse.Namespace, config: dict[str, Any]):
        self.args = args
        self.config = config

    def get(self, name: str) -> Any:
        flag = getattr(self.args, name, None)
        if flag is not None:
            return flag
        env_name, default = SETTINGS[name]
        if env_name and os.environ.get(env_name) not in (None, ""):
            raw = os.environ[env_name]
            return type(default)(raw) if isinstance(default, (int, float)) and not isinstance(default, bool) else raw
        if name in self.config:
            return self.config[name]
        return default


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise LoadError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise LoadError(f"config {path} must be a JSON object")
    unknown = set(data) - set(SETTINGS)
    if unknown:
        raise LoadError(f"unknown config keys: {sorted(unknown)}")
    return data


def _counter(s: Settings):
    return get_counter(s.get("token_counter"))


def _pipeline_settings(s: Settings, snapshot_dir: Path | None = None) -> PipelineSettings:
    budget = default_budget()
    html_budget = int(s.get("html_budget"))
    ocr_budget = int(s.get("ocr_budget"))
    if (html_budget, ocr_budget) != (budget.html_max, budget.ocr_max):
        budget = type(budget)(
            total=budget.template + html_budget + ocr_budget + budget.url_max,
            template=budget.template,
            html_max=html_budget,
            ocr_max=ocr_budget,
            url_max=budget.url_max,
        )
    ocr = s.get("ocr_endpoint")
    return PipelineSettings(
        counter=_counter(s),
        budget=budget,
        max_attr_len=int(s.get("max_attr_len")),
        ocr_service=OcrServiceConfig.from_env(ocr) if ocr else None,
        snapshot_dir=snapshot_dir,
    )


def _client(s: Settings) -> ChatClient:
    mock_dir = getattr(s.args, "mock", None)
    endpoint = s.get("endpoint")
    transport = None
    if mock_dir:
        transport = MockBackend.from_dir(mock_dir)
        endpoint = endpoint or "http://mock.invalid/v1/chat/completions"
    if not endpoint:
        raise UsageError("no backend configured: pass --endpoint or --mock")
    config = BackendConfig(
        endpoint=endpoint,
        model_name=s.get("model"),
        api_key=os.environ.get(API_KEY_ENV),
        temperature=s.get("temperature"),
        top_p=s.get("top_p"),
        max_retries=int(s.get("max_retries")),
        # a mock backend never needs to wait between retries
        retry_backoff=() if mock_dir else tuple(s.get("retry_backoff")),
        request_timeout=float(s.get("request_timeout")),
        max_concurrency=int(s.get("max_concurrency")),
        api_key_header=s.get("api_key_header"),
    )
    return ChatClient(config, transport=transport)


def _print_json(obj: Any) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=True) + "\n")


# -- subcommands ----------------------------------------------------------------


def cmd_capture(args, s: Settings) -> int:
    config = CrawlConfig(
        debug_endpoint=s.get("debug_endpoint"),
        navigation_timeout=float(s.get("navigation_timeout")),
        settle_delay=float(s.get("settle_delay")),
        profile=args.profile,
    )
    snap = capture(args.url, config, args.out, snapshot_id=args.id)
    path = store_snapshot(snap, args.out)
    print(path)
    return EXIT_OK


def cmd_simplify_html(args, s: Settings) -> int:
    try:
        raw = Path(args.infile).read_bytes()
    except OSError as exc:
        raise LoadError(f"cannot read {args.infile}: {exc}") from None
    budget = args.budget if args.budget is not None else int(s.get("html_budget"))
    result = simplify_html(raw, budget, _counter(s), int(s.get("max_attr_len")))
    sys.stdout.write(result.html)
    if not result.html.endswith("\n"):
        sys.stdout.write("\n")
    log.info("tokens=%d stage=%d truncated=%s", result.tokens, result.stage, result.truncated)
    if result.truncated:
        print("warning: html could not be reduced below the budget", file=sys.stderr)
    return EXIT_OK


def cmd_simplify_ocr(args, s: Settings) -> int:
    snap = load_snapshot(args.infile)
    budget = args.budget if args.budget is not None else int(s.get("ocr_budget"))
    result = simplify_ocr(snap.ocr_lines, budget, _counter(s))
    sys.stdout.write(result.text + "\n")
    if result.truncated:
        print("warning: OCR text truncated to fit the budget", file=sys.stderr)
    return EXIT_OK


def cmd_build_prompt(args, s: Settings) -> int:
    snap = load_snapshot(args.snapshot)
    bundle = prepare_prompt(snap, _pipeline_settings(s, Path(args.snapshot).parent))
    if args.sha256:
        print(bundle.sha256)
    else:
        sys.stdout.write(bundle.text)
    log.info(
        "tokens template=%d url=%d html=%d ocr=%d",
        bundle.template_tokens, bundle.url_tokens, bundle.html_tokens, bundle.ocr_tokens,
    )
    return EXIT_OK


def cmd_parse(args, s: Settings) -> int:
    try:
        raw = Path(args.infile).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise LoadError(f"cannot read {args.infile}: {exc}") from None
    verdict = parse_response(raw)
    out = verdict.to_dict()
    out["label"] = classify(verdict).value
    _print_json(out)
    return EXIT_OK


def cmd_classify(args, s: Settings) -> int:
    snap = load_snapshot(args.snapshot)
    settings = _pipeline_settings(s, Path(args.snapshot).parent)
    with _client(s) as client:
        result = run_snapshot(snap, settings, client)
    out = result.verdict.to_dict()
    out["label"] = result.label.value
    out["attempt"] = result.raw.attempt if result.raw else None
    _print_json(out)
    print(f"label: {result.label.value}")
    return EXIT_OK


def cmd_evaluate(args, s: Settings) -> int:
    manifest = load_manifest(args.manifest)
    settings = _pipeline_settings(s, Path(args.manifest).parent)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _client(s) as client:
        try:
            rep = evaluate_manifest(manifest, settings, client, out_dir, float(s.get("max_failure_rate")))
        except TooManyFailures as exc:
            print(f"error: evaluation aborted: {exc}", file=sys.stderr)
            return EXIT_ABORTED
        run_meta = {
            "finished_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "model": client.config.model_name,
            "message_role": MESSAGE_ROLE,
            "token_counter": settings.counter.name,
            "template_sha256": TEMPLATE_SHA256,
            "manifest": str(args.manifest),
            "version": __version__,
        }
    (out_dir / "run.json").write_text(json.dumps(run_meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    key = rep["key_rule"]["display"]
    print(
        f"samples={rep['samples']} precision={key['precision']} recall={key['recall']} "
        f"accuracy={key['accuracy']} f={key['f_measure']} failed={len(rep['failed_samples'])}"
    )
    if rep["score_rule"] is not None:
        print(f"auc={rep['roc']['auc_display']} optimal_threshold={rep['roc']['optimal_threshold']}")
    else:
        print(rep["roc"]["error"])
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--endpoint", help="chat-completion URL (env PHISHCHECK_ENDPOINT)")
    p.add_argument("--model", help="model name sent with each request")
    p.add_argument("--mock", metavar="FIXTURES_DIR", help="serve completions from mock fixtures instead of HTTP")
    p.add_argument("--max-retries", dest="max_retries", type=int)
    p.add_argument("--max-concurrency", dest="max_concurrency", type=int)
    p.add_argument("--ocr-endpoint", dest="ocr_endpoint", help="OCR service used when a snapshot has no OCR lines")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phishcheck", description="Phishing-site detection with a chat model")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--token-counter", dest="token_counter", metavar="NAME",
                        help="token counter: reference, words, or bpe:<rank file>")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capture", help="capture a page through a browser debugging endpoint")
    p.add_argument("--url", required=True)
    p.add_argument("--profile", default="desktop_chrome", choices=["desktop_chrome", "mobile_safari"])
    p.add_argument("--out", required=True, help="directory for the snapshot and screenshot")
    p.add_argument("--id", help="snapshot id (default: derived from URL, profile and time)")
    p.add_argument("--debug-endpoint", dest="debug_endpoint")
    p.add_argument("--settle-delay", dest="settle_delay", type=float)
    p.add_argument("--navigation-timeout", dest="navigation_timeout", type=float)
    p.set_defaults(func=cmd_capture)

    p = sub.add_parser("simplify-html", help="reduce an HTML file below a token budget")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--max-attr-len", dest="max_attr_len", type=int)
    p.set_defaults(func=cmd_simplify_html)

    p = sub.add_parser("simplify-ocr", help="reduce a snapshot's OCR text below a token budget")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--budget", type=int)
    p.set_defaults(func=cmd_simplify_ocr)

    p = sub.add_parser("build-prompt", help="render the detection prompt for a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--sha256", action="store_true", help="print the prompt hash (mock fixture key) instead")
    p.add_argument("--ocr-endpoint", dest="ocr_endpoint")
    p.set_defaults(func=cmd_build_prompt)

    p = sub.add_parser("parse", help="parse a saved model response")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("classify", help="run the full pipeline on one snapshot")
    p.add_argument("--snapshot", required=True)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="classify every manifest entry and write a report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = Settings(args, _load_config(args.config))
        return args.func(args, settings)
    except (LoadError, UnparseableMarkup) as exc:
        print(f"load error: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except (BackendError, CrawlError, OcrServiceError) as exc:
        print(f"backend error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
