"""Remote-call dispatch with retry and timeout.

Retries happen only on transport errors and timeouts; semantic errors
(HTTP 422 or an error-status body) are returned unchanged.  In-process
handlers are addressed as ``mock:<name>`` and registered on the
dispatcher, which keeps tests and mock mode free of sockets.
"""

from __future__ import annotations

import logging
import time
from typing import Callable

import httpx

from .errors import KindMismatch, ToolUnavailable
from .protocol import ToolEndpoint, ToolRequest, ToolResponse

logger = logging.getLogger(__name__)

Handler = Callable[[ToolRequest], ToolResponse]

_HANDLERS: dict[str, Handler] = {}


def register_handler(name: str, handler: Handler) -> None:
    """Register an in-process handler reachable as target ``mock:<name>``."""
    _HANDLERS[name] = handler


def unregister_handler(name: str) -> None:
    _HANDLERS.pop(name, None)


class TransportError(Exception):
    """A retryable failure: connection refused, timeout, or 5xx."""


def _call_once(
    request: ToolRequest, endpoint: ToolEndpoint, client: httpx.Client | None
) -> ToolResponse:
    if endpoint.target.startswith("mock:"):
        name = endpoint.target.split(":", 1)[1]
        handler = _HANDLERS.get(name)
        if handler is None:
            raise TransportError(f"no in-process handler registered as {name!r}")
        return handler(request)

    url = endpoint.target.rstrip("/") + request.kind.route
    timeout = endpoint.timeout_ms / 1000.0
    try:
        if client is not None:
            http_response = client.post(url, json=request.to_dict(), timeout=timeout)
        else:
            http_response = httpx.post(url, json=request.to_dict(), timeout=timeout)
    except (httpx.TransportError, httpx.TimeoutException) as exc:
        raise TransportError(str(exc)) from exc
    if http_response.status_code >= 500:
        raise TransportError(f"server error {http_response.status_code}")
    if http_response.status_code in (200, 422):
        return ToolResponse.from_dict(http_response.json())
    raise TransportError(f"unexpected status {http_response.status_code}")


def dispatch(
    request: ToolRequest,
    endpoint: ToolEndpoint,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ToolResponse:
    """Send a request to its endpoint with at most 1 + max_retries attempts."""
    if endpoint.kind != request.kind:
        raise KindMismatch(f"endpoint kind {endpoint.kind.value} != request kind {request.kind.value}")

    last_error: Exception | None = None
    attempts = endpoint.max_retries + 1
    for attempt in range(attempts):
        if attempt > 0:
            delay = endpoint.backoff_s[min(attempt - 1, len(endpoint.backoff_s) - 1)]
            if delay > 0:
                sleep(delay)
        try:
            return _call_once(request, endpoint, client)
        except TransportError as exc:
            last_error = exc
            logger.warning(
                "attempt %d/%d to %s failed: %s", attempt + 1, attempts, endpoint.target, exc
            )
    raise ToolUnavailable(
        f"{request.kind.value} endpoint {endpoint.target} failed after {attempts} attempts: {last_error}"
    )
