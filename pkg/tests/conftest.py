from __future__ import annotations

import socket
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cdp_stub import FixtureSite, StubBrowser  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def stub_browser():
    with StubBrowser() as browser:
        yield browser


@pytest.fixture
def fixture_site():
    with FixtureSite() as site:
        yield site


@pytest.fixture
def closed_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]
