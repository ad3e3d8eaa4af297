import logging
import sys
import contextvars
from contextlib import contextmanager
from typing import Optional
from settings import settings

# Context variables to hold per-request values (works with threads and async/await)
request_peer: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar(
    "request_peer", default=None
)
request_id: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar(
    "request_id", default=None
)


class RequestContextFilter(logging.Filter):
    """Attach request-scoped context (peer, request id) to LogRecord.

    This lets formatters reference %(peer)s and %(request_id)s in the log format.
    """

    def filter(self, record: logging.LogRecord) -> bool:
        record.peer = request_peer.get() or "-"
        record.request_id = request_id.get() or "-"
        return True


def configure_logging():
    root = logging.getLogger()
    # Avoid adding the handler multiple times if configure_logging is called more than once
    if any(getattr(h, "_peernet", False) for h in root.handlers):
        return

    level = getattr(logging, settings.log_level.upper(), logging.INFO)
    root.setLevel(level)

    # stderr: stdout belongs to CLI documents
    handler = logging.StreamHandler(sys.stderr)
    fmt = "%(asctime)s %(levelname)s [%(peer)s:%(request_id)s] %(message)s"
    datefmt = "%H:%M:%S"
    handler.setFormatter(logging.Formatter(fmt=fmt, datefmt=datefmt))
    handler.addFilter(RequestContextFilter())
    handler._peernet = True

    root.handlers = [handler]


def set_request_context(peer: Optional[str], rid: Optional[str]):
    """Set the contextvars for the current request. Pass None to clear a value."""
    request_peer.set(peer)
    request_id.set(rid)


def clear_request_context():
    set_request_context(None, None)


@contextmanager
def request_context(peer: Optional[str], rid: Optional[str]):
    """Scope the logging context; restores the outer values on exit.

    The simulator runs a remote peer's handler inside the caller's thread, so
    the outer peer's context must come back afterwards.
    """
    peer_token = request_peer.set(peer)
    rid_token = request_id.set(rid)
    try:
        yield
    finally:
        request_id.reset(rid_token)
        request_peer.reset(peer_token)


# Configure logging on import so modules that log during startup are formatted
configure_logging()
