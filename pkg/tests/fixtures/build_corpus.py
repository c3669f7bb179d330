"""Regenerate the end-to-end fixture corpus under ``corpus/``.

Writes ten snapshots, two manifests and one mock completion per snapshot.
Mock files are keyed by the hash of the prompt each snapshot renders to
under the default settings, so rerun this after any change that alters
prompt bytes (template, simplifier, reference counter).

    python tests/fixtures/build_corpus.py
"""

from __future__ import annotations

import json
import shutil
from datetime import datetime, timezone
from pathlib import Path

from phishcheck.pipeline import PipelineSettings, prepare_prompt
from phishcheck.snapshot import OcrLine, PageSnapshot, store_snapshot, write_manifest
from phishcheck.tokens import get_counter

ROOT = Path(__file__).parent / "corpus"
FETCHED = datetime(2023, 6, 1, 9, 30, tzinfo=timezone.utc)

LOGO = "data:image/png;base64," + "iVBORw0KGgoAAAANSUhEUgAAAAEAAAAB" * 400


def _fence(obj: dict | str) -> str:
    body = obj if isinstance(obj, str) else json.dumps(obj, indent=2)
    return f"```\n{body}\n```"


def _footer(n: int) -> str:
    links = "".join(f'<li><a href="https://www.paypal.com/{"x" * 90}/{i}">Link {i}</a></li>' for i in range(n))
    return f"<div class='footer'><ul>{links}</ul></div>"


SAMPLES = [
    {
        "id": "paypal-login",
        "label": "phishing",
        "requested_url": "http://paypal-account-verify.example-secure.top/login",
        "final_url": "https://paypal-account-verify.example-secure.top/signin/",
        "html": (
            "<html><head><title>PayPal: Log in</title><script>track();</script>"
            "<style>body{font:12px}</style></head><body>"
            f'<div class="wrap"><img src="{LOGO}" alt="PayPal">'
            "<h1>Your account has been limited</h1>"
            "<p>Confirm your identity within 24 hours to avoid permanent suspension.</p>"
            "<form action='post.php'><label>Email</label><input name='e'><label>Password</label>"
            "<input type='password' name='p'><button>Log In</button></form></div>"
            f"{_footer(120)}</body></html>"
        ),
        "ocr": [("PayPal", 48), ("Your account has been limited", 30), ("Log In", 18), ("Privacy Legal", 9)],
        "response": (
            "1. The page asks for the password on a domain unrelated to PayPal and threatens suspension.\n"
            "2. Brand: PayPal\n3. Phishing.\n\n"
            + _fence({"phishing_score": 9, "brands": "PayPal", "phishing": True, "suspicious_domain": True})
        ),
    },
    {
        "id": "bank-domain-only",
        "label": "phishing",
        "requested_url": "https://mufg-bank-jp.example.net/",
        "final_url": "https://mufg-bank-jp.example.net/top",
        "html": "<html><head><title>MUFG Bank</title></head><body><h2>Online banking</h2><p>Welcome.</p></body></html>",
        "ocr": [("MUFG Bank", 40), ("Online banking", 20)],
        "response": (
            "No SE technique is visible, but the domain is not the bank's.\n"
            "{'phishing_score': 6, 'brands': 'MUFG Bank', 'phishing': False, 'suspicious_domain': True,}"
        ),
    },
    {
        "id": "news-site",
        "label": "non_phishing",
        "requested_url": "https://news.example.org/",
        "final_url": "https://news.example.org/",
        "html": (
            "<html><head><title>Example News</title><meta name='description' content='Daily news'></head>"
            "<body><h1>Headlines</h1><ul><li>Weather</li><li>Sports</li></ul></body></html>"
        ),
        "ocr": [("Example News", 36), ("Headlines", 24), ("Weather Sports", 14)],
        "response": _fence({"phishing_score": 1, "brands": "None", "phishing": False, "suspicious_domain": False}),
    },
    {
        "id": "shop-unknown",
        "label": "non_phishing",
        "requested_url": "https://small-shop.example.com/",
        "final_url": "https://small-shop.example.com/",
        "html": "<html><body><p>Coming soon</p></body></html>",
        "ocr": [("Coming soon", 30)],
        "response": (
            "There is too little content to judge this page.\n"
            "phishing: unknown\nsuspicious_domain: unknown\n"
        ),
    },
    {
        "id": "truncated-json",
        "label": "phishing",
        "requested_url": "https://office365-mail.example.xyz/",
        "final_url": "https://office365-mail.example.xyz/owa",
        "html": "<html><head><title>Sign in to your account</title></head><body><p>Microsoft</p></body></html>",
        "ocr": [("Microsoft", 28), ("Sign in", 22)],
        "response": 'The login form imitates Microsoft.\n```json\n{"phishing_score": 8, "brands": "Microsoft", "phishing": true,',
    },
    {
        "id": "backend-failure",
        "label": "phishing",
        "requested_url": "https://apple-id-locked.example.info/",
        "final_url": "https://apple-id-locked.example.info/",
        "html": "<html><body><h1>Apple ID locked</h1></body></html>",
        "ocr": [("Apple ID locked", 30)],
        "mock": {"status": 500},
    },
    {
        "id": "virus-warning",
        "label": "phishing",
        "profile": "mobile_safari",
        "requested_url": "http://win-security-alert.example.biz/",
        "final_url": "http://win-security-alert.example.biz/alert.html",
        "html": (
            "<html><body><center><h1>WARNING! Your iPhone is infected</h1>"
            "<p>Call support now: 0-000-000-000</p><table><tr><td>Scan</td></tr></table></center></body></html>"
        ),
        "ocr": [("WARNING!", 52), ("Your iPhone is infected", 30), ("Call support now", 20)],
        "mock": {"fail_first": [429]},
        "response": "```json\n" + json.dumps(
            {"phishing_score": 10, "brands": "Apple", "phishing": True, "suspicious_domain": True}
        ) + "\n```",
    },
    {
        "id": "legit-login",
        "label": "non_phishing",
        "requested_url": "https://login.example-university.ac.jp/",
        "final_url": "https://login.example-university.ac.jp/idp/",
        "html": (
            "<html><head><title>Single Sign-On</title></head><body><h2>Example University</h2>"
            "<label>User ID</label><label>Password</label><strong>Forgot password?</strong></body></html>"
        ),
        "ocr": [("Example University", 30), ("Single Sign-On", 24), ("Forgot password?", 10)],
        "response": _fence({"phishing_score": 4, "brands": "Example University", "phishing": False,
                            "suspicious_domain": True}),
    },
    {
        "id": "capture-failed",
        "label": "non_phishing",
        "requested_url": "https://timeout.example.com/",
        "final_url": "https://timeout.example.com/",
        "html": "",
        "capture_error": True,
        "ocr": [],
        "response": "I cannot determine anything without page content.",
    },
    {
        "id": "lottery-reward",
        "label": "phishing",
        "requested_url": "https://amazon-gift.example.shop/win",
        "final_url": "https://amazon-gift.example.shop/win?id=1",
        "html": (
            "<html><head><title>Congratulations!</title></head><body>"
            "<h1>You won a $1000 Amazon gift card</h1><p>Answer 3 questions to claim.</p></body></html>"
        ),
        "ocr": [("Congratulations!", 44), ("You won a $1000 Amazon gift card", 28)],
        "response": (
            "Fake reward.\n"
            "Final answer: phishing_score = 7, brands: Amazon, phishing: true, suspicious_domain: yes"
        ),
    },
]

# the four-entry manifest exercises one backend failure out of four
SMALL = ["paypal-login", "news-site", "bank-domain-only", "backend-failure"]


def build(root: Path = ROOT) -> None:
    if root.exists():
        shutil.rmtree(root)
    snap_dir = root / "snapshots"
    mock_dir = root / "mock"
    snap_dir.mkdir(parents=True)
    mock_dir.mkdir()
    settings = PipelineSettings(counter=get_counter("reference"))
    entries = {}
    for s in SAMPLES:
        snap = PageSnapshot(
            id=s["id"],
            requested_url=s["requested_url"],
            final_url=s["final_url"],
            html=s["html"],
            ocr_lines=tuple(OcrLine(t, h) for t, h in s["ocr"]),
            profile=s.get("profile", "desktop_chrome"),
            fetched_at=FETCHED,
            capture_error=s.get("capture_error", False),
        )
        path = store_snapshot(snap, snap_dir)
        entries[s["id"]] = {"id": s["id"], "snapshot_path": f"snapshots/{path.name}", "label": s["label"]}
        if snap.capture_error:
            entries[s["id"]]["capture_error"] = True
        mock = {"prompt_sha256": prepare_prompt(snap, settings).sha256, **s.get("mock", {})}
        if "response" in s:
            mock["text"] = s["response"]
        (mock_dir / f"{s['id']}.json").write_text(json.dumps(mock, indent=2) + "\n", encoding="utf-8")
    meta = {"description": "synthetic end-to-end fixture corpus"}
    write_manifest(root / "manifest.json", list(entries.values()), meta)
    write_manifest(root / "manifest4.json", [entries[i] for i in SMALL], meta)


if __name__ == "__main__":
    build()
