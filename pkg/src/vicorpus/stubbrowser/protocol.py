"""DevTools-protocol surface of the stub browser.

HTTP discovery endpoints (/json/version, /json/list, /json/new) live on the
advertised remote-debugging port; each page target gets a WebSocket CDP
session on a companion port, reached through the webSocketDebuggerUrl the
discovery endpoints hand out, exactly how clients consume real Chrome.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import re
import threading
import time
import urllib.parse
import urllib.request
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from websockets.sync.server import serve as ws_serve

from ..render.session import HEIGHT_PROBE
from .dom import REGION_TAGS
from .instrument import StubPage
from .paint import paint

log = logging.getLogger("vicorpus.stubbrowser")

STALL_MARKER = re.compile(r"<!--stub:stall-file:([^>]+?)-->")

PREPARE_RE = re.compile(r"__vicorpusPrepare\((.*)\)\s*;?\s*$", re.S)
COLLECT_RE = re.compile(r"__vicorpusCollect\((.*)\)\s*;?\s*$", re.S)


@dataclass
class Target:
    target_id: str
    url: str = "about:blank"
    page: StubPage | None = None
    metrics_width: int = 1280
    metrics_height: int = 720
    metrics_scale: float = 1.0
    fetch_enabled: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


class StubBrowser:
    def __init__(self, http_port: int = 0):
        self.targets: dict[str, Target] = {}
        self._targets_lock = threading.Lock()
        self._shutdown = threading.Event()

        self._ws_server = ws_serve(
            self._handle_ws, "127.0.0.1", 0, max_size=None
        )
        self.ws_port = self._ws_server.socket.getsockname()[1]
        self._ws_thread = threading.Thread(target=self._ws_server.serve_forever, daemon=True)

        browser = self

        class HttpHandler(BaseHTTPRequestHandler):
            def _reply(self, obj, status=200):
                body = json.dumps(obj).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json; charset=UTF-8")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _handle(self):
                path = urllib.parse.urlparse(self.path).path
                if path == "/json/version":
                    self._reply(
                        {
                            "Browser": "vicorpus-stub/0.1",
                            "Protocol-Version": "1.3",
                            "webSocketDebuggerUrl": f"ws://127.0.0.1:{browser.ws_port}/devtools/browser/stub",
                        }
                    )
                elif path in ("/json", "/json/list"):
                    self._reply([browser.describe_target(t) for t in browser.targets.values()])
                elif path == "/json/new":
                    target = browser.create_target()
                    self._reply(browser.describe_target(target))
                else:
                    self._reply({"error": f"unknown endpoint {path}"}, status=404)

            do_GET = do_PUT = do_POST = lambda self: self._handle()  # noqa: E731

            def log_message(self, *args):
                pass

        self._http_server = ThreadingHTTPServer(("127.0.0.1", http_port), HttpHandler)
        self.http_port = self._http_server.server_address[1]
        self._http_thread = threading.Thread(target=self._http_server.serve_forever, daemon=True)

    def start(self) -> None:
        self._ws_thread.start()
        self._http_thread.start()

    def wait(self) -> None:
        self._shutdown.wait()

    def shutdown(self) -> None:
        self._shutdown.set()
        self._http_server.shutdown()
        self._ws_server.shutdown()

    def create_target(self) -> Target:
        target = Target(target_id=uuid.uuid4().hex)
        with self._targets_lock:
            self.targets[target.target_id] = target
        return target

    def describe_target(self, target: Target) -> dict:
        return {
            "id": target.target_id,
            "type": "page",
            "title": "",
            "url": target.url,
            "devtoolsFrontendUrl": "",
            "webSocketDebuggerUrl": f"ws://127.0.0.1:{self.ws_port}/devtools/page/{target.target_id}",
        }

    # -- CDP session ------------------------------------------------------

    def _handle_ws(self, conn) -> None:
        path = conn.request.path
        m = re.match(r"^/devtools/page/(\w+)$", path)
        if not m:
            conn.close(code=1008, reason="unknown target path")
            return
        target = self.targets.get(m.group(1))
        if target is None:
            conn.close(code=1008, reason="no such target")
            return
        session = _CdpSession(self, conn, target)
        try:
            session.run()
        except Exception:
            log.exception("CDP session ended with error")


class _CdpSession:
    def __init__(self, browser: StubBrowser, conn, target: Target):
        self.browser = browser
        self.conn = conn
        self.target = target

    def run(self) -> None:
        while True:
            try:
                raw = self.conn.recv()
            except Exception:
                return
            msg = json.loads(raw)
            self.dispatch(msg)

    def send_result(self, msg_id: int, result: dict) -> None:
        self.conn.send(json.dumps({"id": msg_id, "result": result}))

    def send_error(self, msg_id: int, message: str) -> None:
        self.conn.send(json.dumps({"id": msg_id, "error": {"code": -32000, "message": message}}))

    def send_event(self, method: str, params: dict) -> None:
        self.conn.send(json.dumps({"method": method, "params": params}))

    def dispatch(self, msg: dict) -> None:
        method = msg.get("method", "")
        params = msg.get("params", {})
        msg_id = msg.get("id", 0)
        handler = {
            "Page.enable": self._ok,
            "Runtime.enable": self._ok,
            "Network.enable": self._ok,
            "Browser.getVersion": lambda i, p: self.send_result(i, {"product": "vicorpus-stub/0.1"}),
            "Emulation.setDeviceMetricsOverride": self._set_metrics,
            "Fetch.enable": self._fetch_enable,
            "Fetch.disable": self._ok,
            "Fetch.continueRequest": self._ok,
            "Fetch.failRequest": self._ok,
            "Page.navigate": self._navigate,
            "Runtime.evaluate": self._evaluate,
            "Page.captureScreenshot": self._screenshot,
            "Browser.close": self._close_browser,
        }.get(method)
        if handler is None:
            self.send_error(msg_id, f"'{method}' wasn't found")
            return
        handler(msg_id, params)

    def _ok(self, msg_id: int, _params: dict) -> None:
        self.send_result(msg_id, {})

    def _close_browser(self, msg_id: int, _params: dict) -> None:
        self.send_result(msg_id, {})
        self.browser.shutdown()

    def _set_metrics(self, msg_id: int, params: dict) -> None:
        self.target.metrics_width = int(params.get("width", 1280))
        self.target.metrics_height = int(params.get("height", 720))
        self.target.metrics_scale = float(params.get("deviceScaleFactor", 1.0))
        if self.target.page is not None:
            self.target.page.set_viewport_width(self.target.metrics_width)
        self.send_result(msg_id, {})

    def _fetch_enable(self, msg_id: int, _params: dict) -> None:
        self.target.fetch_enabled = True
        self.send_result(msg_id, {})

    # -- navigation ---------------------------------------------------------

    def _navigate(self, msg_id: int, params: dict) -> None:
        url = params.get("url", "about:blank")
        self.send_result(msg_id, {"frameId": "F0", "loaderId": "L0"})
        html = self._load_url(url)
        self.target.url = url
        if html is None:
            self.target.page = None
            self.send_event("Page.loadEventFired", {"timestamp": time.monotonic()})
            return

        stall = STALL_MARKER.search(html)
        if stall:
            marker_path = stall.group(1)
            if not os.path.exists(marker_path):
                with open(marker_path, "w") as f:
                    f.write("stalled once\n")
                log.info("stall-once marker hit; withholding load event")
                return  # no load event: the client's navigation times out

        self.target.page = StubPage(html=html, viewport_width=self.target.metrics_width)
        if self.target.fetch_enabled:
            self._intercept_subresources()
        self.send_event("Page.loadEventFired", {"timestamp": time.monotonic()})

    def _load_url(self, url: str) -> str | None:
        if url.startswith("about:"):
            return None
        if url.startswith("data:"):
            header, _, payload = url.partition(",")
            if ";base64" in header:
                return base64.b64decode(payload).decode("utf-8", errors="replace")
            return urllib.parse.unquote(payload)
        if url.startswith(("http://127.0.0.1:", "http://localhost:")):
            with urllib.request.urlopen(url, timeout=10) as resp:
                return resp.read().decode("utf-8", errors="replace")
        return f"<html><body><p>unreachable {url}</p></body></html>"

    def _intercept_subresources(self) -> None:
        """Emit Fetch.requestPaused for each remote subresource and wait for
        the client's continue/fail verdict, like a real interception pause."""
        assert self.target.page is not None
        remote: list[str] = []
        for el in self.target.page.root.walk():
            if el.tag in REGION_TAGS:
                src = el.attrs.get("src", "")
                if src.startswith(("http://", "https://")) and "127.0.0.1" not in src:
                    remote.append(src)
        for i, src in enumerate(remote):
            self.send_event(
                "Fetch.requestPaused",
                {
                    "requestId": f"req-{i}",
                    "request": {"url": src, "method": "GET"},
                    "resourceType": "Image",
                    "frameId": "F0",
                },
            )
            # wait for the verdict; blocked resources stay as placeholder boxes
            while True:
                msg = json.loads(self.conn.recv())
                method = msg.get("method", "")
                if method in ("Fetch.continueRequest", "Fetch.failRequest"):
                    self.send_result(msg.get("id", 0), {})
                    break
                self.dispatch(msg)

    # -- script evaluation -----------------------------------------------------

    def _evaluate(self, msg_id: int, params: dict) -> None:
        expr = params.get("expression", "")
        if "__vicorpusCrash()" in expr:
            log.info("crash hook invoked")
            os._exit(13)
        page = self.target.page
        if page is None:
            self.send_result(msg_id, {"result": {"type": "undefined"}, "exceptionDetails": {"text": "no document"}})
            return
        # Failure-injection hooks for exercising client error handling.
        if "<!--stub:crash-on-eval-->" in page.html:
            log.info("crash-on-eval marker hit")
            os._exit(13)
        if "<!--stub:eval-error-->" in page.html:
            self.send_result(
                msg_id, {"result": {"type": "undefined"}, "exceptionDetails": {"text": "injected eval error"}}
            )
            return
        m = PREPARE_RE.search(expr)
        if m:
            try:
                opts = json.loads(m.group(1))
                result = page.prepare(opts.get("families", []), int(opts.get("seed", "0")))
            except Exception as exc:  # surfaces as a script error to the client
                self.send_result(
                    msg_id, {"result": {"type": "undefined"}, "exceptionDetails": {"text": f"prepare threw: {exc}"}}
                )
                return
            self.send_result(msg_id, {"result": {"type": "string", "value": json.dumps(result)}})
            return
        m = COLLECT_RE.search(expr)
        if m:
            try:
                report = page.collect(
                    page_width=self.target.metrics_width, page_height=self.target.metrics_height
                )
            except Exception as exc:
                self.send_result(
                    msg_id, {"result": {"type": "undefined"}, "exceptionDetails": {"text": f"collect threw: {exc}"}}
                )
                return
            self.send_result(msg_id, {"result": {"type": "string", "value": report}})
            return
        if expr.strip() == HEIGHT_PROBE:
            self.send_result(msg_id, {"result": {"type": "number", "value": page.doc_height}})
            return
        self.send_result(
            msg_id,
            {"result": {"type": "undefined"}, "exceptionDetails": {"text": f"stub cannot evaluate: {expr[:80]}"}},
        )

    def _screenshot(self, msg_id: int, params: dict) -> None:
        fmt = params.get("format", "png")
        quality = int(params.get("quality", 90))
        t = self.target
        if t.page is None:
            from PIL import Image
            import io

            img = Image.new(
                "RGB",
                (max(1, round(t.metrics_width * t.metrics_scale)), max(1, round(t.metrics_height * t.metrics_scale))),
                (255, 255, 255),
            )
            buf = io.BytesIO()
            img.save(buf, format="JPEG" if fmt == "jpeg" else "PNG")
            data = buf.getvalue()
        else:
            data = paint(t.page, t.metrics_width, t.metrics_height, t.metrics_scale, fmt, quality)
        self.send_result(msg_id, {"data": base64.b64encode(data).decode("ascii")})
