"""Exception hierarchy shared across the pipeline stages."""

from __future__ import annotations


class PhishcheckError(Exception):
    """Base class for every error raised by this package."""


# -- snapshot / dataset -------------------------------------------------------


class LoadError(PhishcheckError):
    """Raised when an input file cannot be loaded."""


class SnapshotNotFound(LoadError):
    def __init__(self, path):
        super().__init__(f"snapshot file not found: {path}")
        self.path = path


class MalformedSnapshot(LoadError):
    def __init__(self, field: str, detail: str = ""):
        msg = f"malformed snapshot field {field!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.field = field


class DuplicateId(PhishcheckError):
    def __init__(self, snapshot_id: str):
        super().__init__(f"duplicate snapshot id: {snapshot_id}")
        self.snapshot_id = snapshot_id


class MalformedManifest(LoadError):
    pass


class DanglingPath(LoadError):
    def __init__(self, entry_id: str, path):
        super().__init__(f"manifest entry {entry_id!r} points at missing file {path}")
        self.entry_id = entry_id
        self.path = path


# -- crawler ------------------------------------------------------------------


class CrawlError(PhishcheckError):
    def __init__(self, url: str, detail: str):
        super().__init__(f"{detail} (url={url})")
        self.url = url


class BrowserUnreachable(CrawlError):
    pass


class NavigationTimeout(CrawlError):
    pass


class ProtocolError(CrawlError):
    pass


# -- html ---------------------------------------------------------------------


class UnparseableMarkup(PhishcheckError):
    pass


# -- backend ------------------------------------------------------------------


class BackendError(PhishcheckError):
    """A chat-completion request failed for good."""

    def __init__(self, message: str, *, attempts: int = 0, status: int | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.status = status


class AuthError(BackendError):
    pass


class RateLimited(BackendError):
    pass


class ServerError(BackendError):
    pass


class ContentFiltered(BackendError):
    pass


# -- ocr service --------------------------------------------------------------


class OcrServiceError(PhishcheckError):
    pass


class ServiceUnreachable(OcrServiceError):
    pass


class UnsupportedImage(OcrServiceError):
    pass


class QuotaExceeded(OcrServiceError):
    pass


# -- evaluation ---------------------------------------------------------------


class DegenerateClassBalance(PhishcheckError):
    pass


class MissingVerdict(PhishcheckError):
    def __init__(self, entry_id: str):
        super().__init__(f"no verdict for manifest entry {entry_id!r}")
        self.entry_id = entry_id


class NavigationFailed(CrawlError):
    """The browser reported a navigation error (DNS failure, refused connection...)."""
