"""Loopback one-shot HTTP server for documents too large for a data URL."""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class OneShotServer:
    """Serves a single HTML payload at /doc.html on an ephemeral loopback port.

    Anything else 404s, which is exactly what relative subresource references
    in offline dumps should see. One instance per worker; payload swapped per
    document.
    """

    def __init__(self):
        self._payload = b""
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):  # noqa: N802 (stdlib naming)
                if self.path == "/doc.html":
                    body = outer._payload
                    self.send_response(200)
                    self.send_header("Content-Type", "text/html; charset=utf-8")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                else:
                    self.send_error(404)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def url_for(self, html: str) -> str:
        self._payload = html.encode("utf-8")
        return f"http://127.0.0.1:{self.port}/doc.html"

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
