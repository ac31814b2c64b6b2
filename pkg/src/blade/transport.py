"""Outbound transport abstraction.

Nodes never open sockets themselves; they hand (base_url, method, path,
headers, body) to a Transport.  The real implementation speaks HTTP/1.1 via
the standard library; the simulation harness provides an in-process hub with
the same interface plus deterministic fault injection.
"""

from __future__ import annotations

import http.client
import urllib.error
import urllib.request
from urllib.parse import urlsplit
from typing import Protocol, runtime_checkable

from blade.errors import DispatchFailed


@runtime_checkable
class Transport(Protocol):
    def send(
        self,
        base_url: str,
        method: str,
        path: str,
        headers: dict[str, str],
        body: bytes,
    ) -> tuple[int, dict[str, str], bytes]:
        """Deliver a request; returns (status, headers, body).

        Raises DispatchFailed when the peer is unreachable.  Non-2xx statuses
        are returned, not raised: error responses are signed envelopes and
        the caller verifies them like any other."""
        ...

    def fetch(self, url: str) -> bytes:
        """Plain byte fetch (module packages)."""
        ...


class HttpTransport:
    def __init__(self, timeout: float = 10.0):
        self.timeout = timeout

    def send(self, base_url, method, path, headers, body):
        # http.client rather than urllib: urllib re-cases header names, and
        # the protocol sends its header names bit-exact
        parts = urlsplit(base_url)
        conn_cls = (
            http.client.HTTPSConnection
            if parts.scheme == "https"
            else http.client.HTTPConnection
        )
        connection = conn_cls(parts.netloc, timeout=self.timeout)
        url = (parts.path.rstrip("/") or "") + path
        try:
            connection.request(method, url, body=body or None, headers=headers)
            response = connection.getresponse()
            payload = response.read()
            return response.status, dict(response.getheaders()), payload
        except (http.client.HTTPException, OSError, TimeoutError) as exc:
            raise DispatchFailed(f"{method} {base_url}{path}: {exc}") from exc
        finally:
            connection.close()

    def fetch(self, url: str) -> bytes:
        if url.startswith("file://"):
            from urllib.request import url2pathname
            from urllib.parse import urlsplit

            with open(url2pathname(urlsplit(url).path), "rb") as handle:
                return handle.read()
        try:
            with urllib.request.urlopen(url, timeout=self.timeout) as response:
                return response.read()
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise DispatchFailed(f"GET {url}: {exc}") from exc
