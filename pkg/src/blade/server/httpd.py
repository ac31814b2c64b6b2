"""Real-HTTP binding for a node: stdlib threading server.

Routes: /admin/v1/* to the C2S API, /ui/* to static assets (the bundled web
frontend, when built), everything else to the S2S handler.  Deferred node
work (post-response pushes) is drained after each response; a background
thread pumps the retry queue.
"""

from __future__ import annotations

import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from blade.server.admin import ADMIN_PREFIX, AdminApi
from blade.server.node import BladeNode

logger = logging.getLogger(__name__)

_PUMP_INTERVAL = 0.5


class NodeHTTPServer:
    def __init__(self, node: BladeNode, ui_dir: Optional[str] = None):
        self.node = node
        self.admin = AdminApi(node)
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self._httpd: Optional[ThreadingHTTPServer] = None
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()

    # ------------------------------------------------------------------

    def start(self) -> str:
        """Bind and serve in background threads; returns the base URL."""
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):  # quiet by default
                logger.debug("%s " + fmt, self.client_address[0], *args)

            def _run(self):
                length = int(self.headers.get("Content-Length") or 0)
                body = self.rfile.read(length) if length else b""
                headers = {k: v for k, v in self.headers.items()}
                status, out_headers, out_body = server._route(
                    self.command, self.path, headers, body
                )
                self.send_response(status)
                for name, value in out_headers.items():
                    self.send_header(name, value)
                self.send_header("Content-Length", str(len(out_body)))
                self.end_headers()
                self.wfile.write(out_body)
                self.wfile.flush()
                # post-response work: pushes scheduled by the handler
                server.node.drain_deferred()

            do_GET = do_POST = do_PUT = do_DELETE = do_HEAD = _run

        config = self.node.config
        self._httpd = ThreadingHTTPServer(
            (config.listen_host, config.listen_port), Handler
        )
        config.listen_port = self._httpd.server_address[1]
        serve = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        serve.start()
        pump = threading.Thread(target=self._pump_loop, daemon=True)
        pump.start()
        self._threads = [serve, pump]
        return f"http://{config.listen_host}:{config.listen_port}"

    def stop(self) -> None:
        self._stop.set()
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    def _pump_loop(self) -> None:
        while not self._stop.wait(_PUMP_INTERVAL):
            try:
                self.node.pump_retries()
                self.node.drain_deferred()
            except Exception:  # pragma: no cover - defensive
                logger.exception("background pump failed")

    # ------------------------------------------------------------------

    def _route(self, method: str, path: str, headers: dict, body: bytes):
        if path.startswith(ADMIN_PREFIX):
            return self.admin.handle(method, path, headers, body)
        if path == "/ui" or path.startswith("/ui/"):
            return self._serve_static(path)
        return self.node.handle_request(method, path.split("?", 1)[0], headers, body)

    def _serve_static(self, path: str):
        if self.ui_dir is None:
            return 404, {"Content-Type": "text/plain"}, b"no UI bundled"
        relative = path[len("/ui"):].lstrip("/") or "index.html"
        target = (self.ui_dir / relative).resolve()
        try:
            target.relative_to(self.ui_dir.resolve())
        except ValueError:
            return 403, {"Content-Type": "text/plain"}, b"forbidden"
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            return 404, {"Content-Type": "text/plain"}, b"not found"
        content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        return 200, {"Content-Type": content_type}, target.read_bytes()
