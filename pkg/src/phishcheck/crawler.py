"""Capture pages through a running browser's remote-debugging endpoint.

Each capture opens a fresh page target, applies the device profile,
navigates, waits for the load event plus a settle delay, then reads the
final URL, the rendered markup and a screenshot before closing the target.
"""

from __future__ import annotations

import base64
import hashlib
import itertools
import json
import logging
import queue
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any
from urllib.parse import quote, urlsplit

import httpx
from websockets.exceptions import ConnectionClosed, InvalidHandshake, InvalidURI
from websockets.sync.client import connect as ws_connect

from .errors import BrowserUnreachable, NavigationFailed, NavigationTimeout, ProtocolError
from .snapshot import PROFILE_NAMES, DeviceProfile, PageSnapshot

log = logging.getLogger(__name__)

CONNECT_TIMEOUT = 5.0
COMMAND_TIMEOUT = 30.0


@lru_cache(maxsize=None)
def load_defaults() -> dict[str, Any]:
    text = resources.files("phishcheck").joinpath("data", "defaults.json").read_text(encoding="utf-8")
    return json.loads(text)


def builtin_profiles() -> list[DeviceProfile]:
    profiles = load_defaults()["profiles"]
    return [DeviceProfile(name=name, **profiles[name]) for name in PROFILE_NAMES]


def get_profile(name: str) -> DeviceProfile:
    for p in builtin_profiles():
        if p.name == name:
            return p
    raise ValueError(f"unknown device profile {name!r}; choose from {list(PROFILE_NAMES)}")


@dataclass(frozen=True)
class CrawlConfig:
    debug_endpoint: str = "http://127.0.0.1:9222"
    navigation_timeout: float = 30.0
    settle_delay: float = 3.0
    profile: str = "desktop_chrome"
    connect_timeout: float = CONNECT_TIMEOUT

    def __post_init__(self):
        if self.navigation_timeout <= 0:
            raise ValueError("navigation_timeout must be > 0")
        if self.settle_delay < 0:
            raise ValueError("settle_delay must be >= 0")
        if self.connect_timeout <= 0:
            raise ValueError("connect_timeout must be > 0")
        get_profile(self.profile)


class CdpSession:
    """One websocket to one page target.

    Writes are serialized; a reader thread routes replies to waiting
    callers by request id and queues events by method name.
    """

    def __init__(self, ws_url: str, url: str, connect_timeout: float = CONNECT_TIMEOUT):
        self.url = url
        try:
            self._ws = ws_connect(ws_url, open_timeout=connect_timeout, max_size=None, compression=None)
        except (OSError, InvalidHandshake, InvalidURI, TimeoutError) as exc:
            raise BrowserUnreachable(url, f"cannot open debugging socket {ws_url}: {exc}") from None
        self._ids = itertools.count(1)
        self._send_lock = threading.Lock()
        self._pending: dict[int, queue.Queue] = {}
        self._pending_lock = threading.Lock()
        self._events: dict[str, queue.Queue] = {}
        self._events_lock = threading.Lock()
        self._closed = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, name="cdp-reader", daemon=True)
        self._reader.start()

    def _event_queue(self, method: str) -> queue.Queue:
        with self._events_lock:
            return self._events.setdefault(method, queue.Queue())

    def _read_loop(self) -> None:
        try:
            for raw in self._ws:
                try:
                    msg = json.loads(raw)
                except ValueError:
                    log.warning("dropping non-JSON protocol frame")
                    continue
                if "id" in msg:
                    with self._pending_lock:
                        slot = self._pending.pop(msg["id"], None)
                    if slot is not None:
                        slot.put(msg)
                elif "method" in msg:
                    self._event_queue(msg["method"]).put(msg.get("params", {}))
        except ConnectionClosed:
            pass
        finally:
            self._closed.set()
            with self._pending_lock:
                waiting = list(self._pending.values())
                self._pending.clear()
            for slot in waiting:
                slot.put(None)

    def send(self, method: str, params: dict[str, Any] | None = None, timeout: float = COMMAND_TIMEOUT) -> dict[str, Any]:
        msg_id = next(self._ids)
        slot: queue.Queue = queue.Queue(maxsize=1)
        with self._pending_lock:
            self._pending[msg_id] = slot
        frame = json.dumps({"id": msg_id, "method": method, "params": params or {}})
        try:
            with self._send_lock:
                self._ws.send(frame)
        except ConnectionClosed:
            raise ProtocolError(self.url, f"socket closed while sending {method}") from None
        try:
            reply = slot.get(timeout=timeout)
        except queue.Empty:
            with self._pending_lock:
                self._pending.pop(msg_id, None)
            raise ProtocolError(self.url, f"no reply to {method} within {timeout}s") from None
        if reply is None:
            raise ProtocolError(self.url, f"socket closed awaiting reply to {method}")
        if "error" in reply:
            raise ProtocolError(self.url, f"{method} failed: {reply['error']}")
        result = reply.get("result")
        if not isinstance(result, dict):
            raise ProtocolError(self.url, f"{method} reply lacks a result object")
        return result

    def wait_event(self, method: str, timeout: float) -> dict[str, Any] | None:
        try:
            return self._event_queue(method).get(timeout=timeout)
        except queue.Empty:
            return None

    def evaluate(self, expression: str) -> Any:
        result = self.send("Runtime.evaluate", {"expression": expression, "returnByValue": True})
        if "exceptionDetails" in result:
            raise ProtocolError(self.url, f"evaluation of {expression!r} threw")
        value = result.get("result", {})
        if not isinstance(value, dict) or "value" not in value:
            raise ProtocolError(self.url, f"evaluation of {expression!r} returned no value")
        return value["value"]

    def close(self) -> None:
        self._ws.close()
        self._reader.join(timeout=2)


def _open_target(endpoint: str, url: str, timeout: float) -> dict[str, Any]:
    base = endpoint.rstrip("/")
    try:
        with httpx.Client(timeout=timeout) as http:
            resp = http.put(f"{base}/json/new?about:blank")
            if resp.status_code == 405:
                resp = http.get(f"{base}/json/new?about:blank")
    except httpx.TransportError as exc:
        raise BrowserUnreachable(url, f"debugging endpoint {endpoint} unreachable: {exc}") from None
    if resp.status_code != 200:
        raise ProtocolError(url, f"target creation returned HTTP {resp.status_code}")
    try:
        target = resp.json()
    except ValueError:
        raise ProtocolError(url, "target creation returned non-JSON") from None
    if not isinstance(target, dict) or "webSocketDebuggerUrl" not in target or "id" not in target:
        raise ProtocolError(url, "target description lacks id/webSocketDebuggerUrl")
    return target


def _close_target(endpoint: str, target_id: str, timeout: float) -> None:
    try:
        with httpx.Client(timeout=timeout) as http:
            http.get(f"{endpoint.rstrip('/')}/json/close/{quote(target_id, safe='')}")
    except httpx.TransportError as exc:
        log.warning("could not close target %s: %s", target_id, exc)


def snapshot_id_for(url: str, profile: str, fetched_at: datetime) -> str:
    digest = hashlib.sha256(f"{profile}\n{url}\n{fetched_at.isoformat()}".encode()).hexdigest()
    return digest[:16]


def capture(url: str, config: CrawlConfig, out_dir: str | Path, snapshot_id: str | None = None) -> PageSnapshot:
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise ValueError(f"not an absolute http(s) URL: {url!r}")
    profile = get_profile(config.profile)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    target = _open_target(config.debug_endpoint, url, config.connect_timeout)
    try:
        session = CdpSession(target["webSocketDebuggerUrl"], url, config.connect_timeout)
        try:
            session.send("Emulation.setUserAgentOverride", {"userAgent": profile.user_agent})
            session.send(
                "Emulation.setDeviceMetricsOverride",
                {
                    "width": profile.viewport_width,
                    "height": profile.viewport_height,
                    "deviceScaleFactor": profile.device_scale_factor,
                    "mobile": profile.mobile,
                },
            )
            session.send("Page.enable")
            started = time.monotonic()
            nav = session.send("Page.navigate", {"url": url}, timeout=config.navigation_timeout)
            if nav.get("errorText"):
                raise NavigationFailed(url, f"navigation failed: {nav['errorText']}")
            remaining = config.navigation_timeout - (time.monotonic() - started)
            if session.wait_event("Page.loadEventFired", max(remaining, 0.0)) is None:
                raise NavigationTimeout(url, f"no load event within {config.navigation_timeout}s")
            if config.settle_delay:
                time.sleep(config.settle_delay)

            final_url = session.evaluate("document.URL")
            html = session.evaluate("document.documentElement.outerHTML")
            shot = session.send("Page.captureScreenshot", {"format": "png"})
        finally:
            session.close()
    finally:
        _close_target(config.debug_endpoint, target["id"], config.connect_timeout)

    if not isinstance(final_url, str) or urlsplit(final_url).scheme not in ("http", "https"):
        raise NavigationFailed(url, f"browser ended on a non-http(s) document: {final_url!r}")
    if not isinstance(html, str):
        raise ProtocolError(url, "outerHTML evaluation did not return a string")
    try:
        png = base64.b64decode(shot["data"], validate=True)
    except (KeyError, TypeError, ValueError):
        raise ProtocolError(url, "screenshot reply lacks base64 data") from None

    fetched_at = datetime.now(timezone.utc)
    sid = snapshot_id or snapshot_id_for(url, profile.name, fetched_at)
    shot_name = f"{quote(sid, safe='')}.png"
    (out_dir / shot_name).write_bytes(png)
    return PageSnapshot(
        id=sid,
        requested_url=url,
        final_url=final_url,
        html=html,
        screenshot_ref=shot_name,
        profile=profile.name,
        fetched_at=fetched_at,
        capture_error=not html,
    )
