"""Page snapshots and labeled dataset manifests.

One snapshot is one JSON file.  Screenshots live next to it and are only
referenced by relative path.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterator
from urllib.parse import quote, urlsplit

from .errors import (
    DanglingPath,
    DuplicateId,
    MalformedManifest,
    MalformedSnapshot,
    SnapshotNotFound,
)

log = logging.getLogger(__name__)

PROFILE_NAMES = ("desktop_chrome", "mobile_safari")


class Label(str, Enum):
    PHISHING = "phishing"
    NON_PHISHING = "non_phishing"


@dataclass(frozen=True)
class OcrLine:
    text: str
    font_height: float

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise MalformedSnapshot("text", "OCR line text is empty")
        if isinstance(self.font_height, bool) or not isinstance(self.font_height, (int, float)):
            raise MalformedSnapshot("font_height", f"not a number: {self.font_height!r}")
        if not self.font_height > 0:
            raise MalformedSnapshot("font_height", f"must be > 0, got {self.font_height!r}")


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    user_agent: str
    viewport_width: int
    viewport_height: int
    mobile: bool = False
    device_scale_factor: float = 1.0

    def __post_init__(self):
        if self.name not in PROFILE_NAMES:
            raise ValueError(f"unknown device profile {self.name!r}")
        if self.viewport_width <= 0 or self.viewport_height <= 0:
            raise ValueError("viewport dimensions must be positive")


def is_absolute_url(value: Any) -> bool:
    if not isinstance(value, str) or not value:
        return False
    try:
        parts = urlsplit(value)
    except ValueError:
        return False
    return bool(parts.scheme) and bool(parts.netloc)


def _utc_seconds(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return _utc_seconds(ts).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(value: str) -> datetime:
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError("timestamp lacks a UTC offset")
    return _utc_seconds(ts)


@dataclass(frozen=True)
class PageSnapshot:
    """A captured page.

    ``fetched_at`` is normalized to UTC at one-second precision on
    construction, which is the precision the file format keeps.
    """

    id: str
    requested_url: str
    final_url: str
    html: str
    ocr_lines: tuple[OcrLine, ...] = ()
    profile: str = "desktop_chrome"
    fetched_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    screenshot_ref: str | None = None
    label: Label | None = None
    capture_error: bool = False

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise MalformedSnapshot("id", "must be a non-empty string")
        for name in ("requested_url", "final_url"):
            if not is_absolute_url(getattr(self, name)):
                raise MalformedSnapshot(name, f"not an absolute URL: {getattr(self, name)!r}")
        if not isinstance(self.html, str):
            raise MalformedSnapshot("html", "must be a string")
        if not self.html and not self.capture_error:
            raise MalformedSnapshot("html", "empty markup without a capture-error flag")
        if self.profile not in PROFILE_NAMES:
            raise MalformedSnapshot("profile", f"unknown profile {self.profile!r}")
        if self.screenshot_ref is not None and not isinstance(self.screenshot_ref, str):
            raise MalformedSnapshot("screenshot_ref", "must be a relative path string")
        if isinstance(self.screenshot_ref, str) and os.path.isabs(self.screenshot_ref):
            raise MalformedSnapshot("screenshot_ref", "must be relative")
        if not isinstance(self.fetched_at, datetime):
            raise MalformedSnapshot("fetched_at", "must be a datetime")
        object.__setattr__(self, "ocr_lines", tuple(self.ocr_lines))
        object.__setattr__(self, "fetched_at", _utc_seconds(self.fetched_at))
        if self.label is not None and not isinstance(self.label, Label):
            try:
                object.__setattr__(self, "label", Label(self.label))
            except ValueError:
                raise MalformedSnapshot("label", f"unknown label {self.label!r}") from None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "id": self.id,
            "requested_url": self.requested_url,
            "final_url": self.final_url,
            "html": self.html,
            "screenshot_ref": self.screenshot_ref,
            "ocr_lines": [{"text": ln.text, "font_height": ln.font_height} for ln in self.ocr_lines],
            "profile": self.profile,
            "fetched_at": format_timestamp(self.fetched_at),
        }
        if self.label is not None:
            d["label"] = self.label.value
        if self.capture_error:
            d["capture_error"] = True
        return d

    @classmethod
    def from_dict(cls, data: Any) -> "PageSnapshot":
        if not isinstance(data, dict):
            raise MalformedSnapshot("<root>", "top level must be an object")
        for key in ("id", "requested_url", "final_url", "html", "ocr_lines", "profile", "fetched_at"):
            if key not in data:
                raise MalformedSnapshot(key, "missing")
        raw_lines = data["ocr_lines"]
        if not isinstance(raw_lines, list):
            raise MalformedSnapshot("ocr_lines", "must be an array")
        lines = []
        for i, item in enumerate(raw_lines):
            if not isinstance(item, dict):
                raise MalformedSnapshot("ocr_lines", f"entry {i} is not an object")
            for key in ("text", "font_height"):
                if key not in item:
                    raise MalformedSnapshot(key, f"missing in ocr_lines[{i}]")
            lines.append(OcrLine(item["text"], item["font_height"]))
        fetched = data["fetched_at"]
        try:
            fetched_at = parse_timestamp(fetched)
        except (TypeError, ValueError, AttributeError) as exc:
            raise MalformedSnapshot("fetched_at", str(exc)) from None
        capture_error = data.get("capture_error", False)
        if not isinstance(capture_error, bool):
            raise MalformedSnapshot("capture_error", "must be a boolean")
        return cls(
            id=data["id"],
            requested_url=data["requested_url"],
            final_url=data["final_url"],
            html=data["html"],
            ocr_lines=tuple(lines),
            profile=data["profile"],
            fetched_at=fetched_at,
            screenshot_ref=data.get("screenshot_ref"),
            label=data.get("label"),
            capture_error=capture_error,
        )


def snapshot_filename(snapshot_id: str) -> str:
    return quote(snapshot_id, safe="") + ".json"


def load_snapshot(path: str | os.PathLike) -> PageSnapshot:
    path = Path(path)
    if not path.is_file():
        raise SnapshotNotFound(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedSnapshot("<file>", f"{path}: {exc}") from None
    return PageSnapshot.from_dict(data)


def store_snapshot(snapshot: PageSnapshot, directory: str | os.PathLike) -> Path:
    """Write ``snapshot`` into ``directory`` and return the file path.

    A screenshot reference whose file does not exist is recorded under a
    ``warnings`` key rather than rejected.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / snapshot_filename(snapshot.id)
    data = snapshot.to_dict()
    if snapshot.screenshot_ref is not None and not (directory / snapshot.screenshot_ref).is_file():
        log.warning("snapshot %s: screenshot %s not found", snapshot.id, snapshot.screenshot_ref)
        data["warnings"] = ["screenshot_missing"]
    payload = json.dumps(data, ensure_ascii=False, indent=2) + "\n"
    try:
        with open(target, "x", encoding="utf-8") as fh:
            fh.write(payload)
    except FileExistsError:
        raise DuplicateId(snapshot.id) from None
    return target


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    snapshot_path: Path
    label: Label
    capture_error: bool = False


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    metadata: dict[str, str] = field(default_factory=dict)
    path: Path | None = None

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def iter_snapshots(self) -> Iterator[tuple[ManifestEntry, PageSnapshot]]:
        """Load every snapshot in order, stopping at the first failure."""
        for entry in self.entries:
            snap = load_snapshot(entry.snapshot_path)
            if snap.id != entry.id:
                raise MalformedManifest(
                    f"entry {entry.id!r}: snapshot file carries id {snap.id!r}"
                )
            if not snap.html and not entry.capture_error:
                raise MalformedSnapshot("html", f"entry {entry.id!r} is empty but not flagged as a capture error")
            yield entry, snap


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise MalformedManifest(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"{path}: {exc}") from None
    if not isinstance(data, dict) or not isinstance(data.get("entries"), list):
        raise MalformedManifest("manifest must be an object with an 'entries' array")
    metadata = data.get("metadata", {})
    if not isinstance(metadata, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
    ):
        raise MalformedManifest("'metadata' must map strings to strings")

    base = path.parent
    seen: set[str] = set()
    entries = []
    for i, raw in enumerate(data["entries"]):
        if not isinstance(raw, dict):
            raise MalformedManifest(f"entries[{i}] is not an object")
        for key in ("id", "snapshot_path", "label"):
            if not isinstance(raw.get(key), str) or not raw[key]:
                raise MalformedManifest(f"entries[{i}]: missing or invalid {key!r}")
        entry_id = raw["id"]
        if entry_id in seen:
            raise MalformedManifest(f"duplicate id {entry_id!r}")
        seen.add(entry_id)
        try:
            label = Label(raw["label"])
        except ValueError:
            raise MalformedManifest(f"entries[{i}]: unknown label {raw['label']!r}") from None
        snap_path = Path(raw["snapshot_path"])
        if not snap_path.is_absolute():
            snap_path = base / snap_path
        if not snap_path.is_file():
            raise DanglingPath(entry_id, snap_path)
        entries.append(
            ManifestEntry(entry_id, snap_path, label, bool(raw.get("capture_error", False)))
        )
    return DatasetManifest(tuple(entries), dict(metadata), path)


def write_manifest(path: str | os.PathLike, entries: list[dict[str, Any]], metadata: dict[str, str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"entries": entries, "metadata": metadata or {}}
    path.write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return path
