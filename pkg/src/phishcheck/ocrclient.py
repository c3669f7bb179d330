"""Client for an external OCR HTTP service.

Only used when a snapshot arrives without OCR lines.  The response is
expected to carry text lines with a bounding polygon, in either the
``readResult.blocks[].lines[]`` layout (``boundingPolygon`` as a list of
points) or the older ``lines[]`` layout (``boundingBox`` as eight numbers).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import httpx

from .errors import QuotaExceeded, ServiceUnreachable, UnsupportedImage
from .snapshot import OcrLine

log = logging.getLogger(__name__)

OCR_KEY_ENV = "PHISHCHECK_OCR_KEY"
DEFAULT_FONT_HEIGHT = 1.0
_BAD_IMAGE_CODES = ("InvalidImage", "InvalidImageFormat", "InvalidImageSize")


@dataclass(frozen=True)
class OcrServiceConfig:
    endpoint: str
    api_key: str | None = field(default=None, repr=False)
    key_header: str = "Ocp-Apim-Subscription-Key"
    timeout: float = 30.0

    @classmethod
    def from_env(cls, endpoint: str, **kwargs) -> "OcrServiceConfig":
        return cls(endpoint=endpoint, api_key=os.environ.get(OCR_KEY_ENV), **kwargs)


def _box_height(line: dict[str, Any]) -> float | None:
    poly = line.get("boundingPolygon")
    ys: list[float] = []
    if isinstance(poly, list) and poly:
        ys = [p.get("y") for p in poly if isinstance(p, dict)]
    else:
        box = line.get("boundingBox")
        if isinstance(box, list) and len(box) >= 4 and len(box) % 2 == 0:
            ys = box[1::2]
    ys = [y for y in ys if isinstance(y, (int, float)) and not isinstance(y, bool)]
    if len(ys) < 2:
        return None
    h = float(max(ys) - min(ys))
    return h if h > 0 else None


def _raw_lines(payload: Any) -> list[dict[str, Any]]:
    if not isinstance(payload, dict):
        return []
    read = payload.get("readResult")
    if isinstance(read, dict):
        out = []
        for block in read.get("blocks") or []:
            out.extend(block.get("lines") or [])
        if "lines" in read:
            out.extend(read.get("lines") or [])
        return out
    return list(payload.get("lines") or [])


def lines_from_payload(payload: Any) -> list[OcrLine]:
    lines = []
    for raw in _raw_lines(payload):
        text = (raw.get("text") or raw.get("content") or "").strip() if isinstance(raw, dict) else ""
        if not text:
            continue
        height = _box_height(raw)
        if height is None:
            log.warning("OCR line %r has no usable geometry; using font height %s", text[:40], DEFAULT_FONT_HEIGHT)
            height = DEFAULT_FONT_HEIGHT
        lines.append(OcrLine(text, height))
    return lines


def extract_lines(
    image_path: str | os.PathLike,
    config: OcrServiceConfig,
    transport: httpx.BaseTransport | None = None,
) -> list[OcrLine]:
    data = Path(image_path).read_bytes()
    headers = {"Content-Type": "application/octet-stream"}
    if config.api_key:
        headers[config.key_header] = config.api_key
    try:
        with httpx.Client(transport=transport, timeout=config.timeout) as client:
            resp = client.post(config.endpoint, content=data, headers=headers)
    except httpx.TransportError as exc:
        raise ServiceUnreachable(f"OCR service unreachable: {exc}") from None
    if resp.status_code == 415 or (resp.status_code == 400 and _error_code(resp) in _BAD_IMAGE_CODES):
        raise UnsupportedImage(f"OCR service rejected image {image_path} ({resp.status_code})")
    if resp.status_code == 429 or (resp.status_code == 403 and "quota" in resp.text.lower()):
        raise QuotaExceeded(f"OCR service quota exceeded ({resp.status_code})")
    if resp.status_code >= 500:
        raise ServiceUnreachable(f"OCR service error HTTP {resp.status_code}")
    if resp.status_code != 200:
        raise ServiceUnreachable(f"OCR service returned HTTP {resp.status_code}")
    try:
        payload = resp.json()
    except ValueError:
        raise ServiceUnreachable("OCR service returned a non-JSON body") from None
    return lines_from_payload(payload)


def _error_code(resp: httpx.Response) -> str:
    try:
        err = resp.json().get("error", {})
    except (ValueError, AttributeError):
        return ""
    if not isinstance(err, dict):
        return ""
    inner = err.get("innererror")
    if isinstance(inner, dict) and inner.get("code"):
        return str(inner["code"])
    return str(err.get("code", ""))
