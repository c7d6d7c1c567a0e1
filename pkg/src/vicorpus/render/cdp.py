"""Chrome DevTools Protocol client: browser process lifecycle, target
discovery over the /json HTTP endpoints, and a blocking JSON-RPC session per
page over WebSocket.

Works against any Chromium-family binary started with --remote-debugging-port
(including the bundled stub browser, which speaks the same endpoints).
"""

from __future__ import annotations

import base64
import json
import logging
import subprocess
import time
import urllib.error
import urllib.request
from pathlib import Path
from typing import Any, Callable

from websockets.sync.client import connect as ws_connect

log = logging.getLogger(__name__)


class CdpError(Exception):
    pass


class CdpTimeout(CdpError):
    """Retriable: navigation or evaluation did not complete in time."""


class BrowserCrashed(CdpError):
    """The browser process or socket died; the worker must restart it."""


class EvaluationError(CdpError):
    """The injected script threw; the page is skipped with this diagnostic."""


DEFAULT_BROWSER_FLAGS = [
    "--headless=new",
    "--disable-gpu",
    "--hide-scrollbars",
    "--mute-audio",
    "--no-first-run",
    "--no-default-browser-check",
    "--disable-background-networking",
    "--disable-renderer-backgrounding",
    "--force-color-profile=srgb",
    "--no-sandbox",
]


class BrowserProcess:
    """Owns one browser subprocess and its debugging endpoint."""

    def __init__(self, command: list[str], user_data_dir: Path, port: int = 0, startup_timeout: float = 20.0):
        self.user_data_dir = Path(user_data_dir)
        self.user_data_dir.mkdir(parents=True, exist_ok=True)
        args = list(command) + DEFAULT_BROWSER_FLAGS + [
            f"--remote-debugging-port={port}",
            f"--user-data-dir={self.user_data_dir}",
            "about:blank",
        ]
        self.proc = subprocess.Popen(
            args, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL
        )
        self.port = self._wait_for_port(port, startup_timeout)

    def _wait_for_port(self, requested: int, timeout: float) -> int:
        """Ephemeral ports are discovered through the DevToolsActivePort file."""
        port_file = self.user_data_dir / "DevToolsActivePort"
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.proc.poll() is not None:
                raise BrowserCrashed(f"browser exited with {self.proc.returncode} during startup")
            if port_file.exists():
                try:
                    line = port_file.read_text().splitlines()[0].strip()
                    port = int(line)
                    if port > 0:
                        self._probe(port)
                        return port
                except (ValueError, IndexError, OSError, urllib.error.URLError):
                    pass
            elif requested:
                try:
                    self._probe(requested)
                    return requested
                except (OSError, urllib.error.URLError):
                    pass
            time.sleep(0.05)
        raise CdpTimeout("browser did not open its debugging port in time")

    def _probe(self, port: int) -> dict:
        with urllib.request.urlopen(f"http://127.0.0.1:{port}/json/version", timeout=2) as resp:
            return json.loads(resp.read())

    def new_page(self) -> str:
        """Create a page target; returns its WebSocket debugger URL."""
        url = f"http://127.0.0.1:{self.port}/json/new?url=about:blank"
        last_error: Exception | None = None
        for method in ("PUT", "GET"):  # modern binaries require PUT, older ones GET
            try:
                req = urllib.request.Request(url, method=method)
                with urllib.request.urlopen(req, timeout=5) as resp:
                    target = json.loads(resp.read())
                return target["webSocketDebuggerUrl"]
            except (urllib.error.URLError, urllib.error.HTTPError, KeyError, json.JSONDecodeError) as exc:
                last_error = exc
        raise CdpError(f"could not create a page target: {last_error}")

    @property
    def alive(self) -> bool:
        return self.proc.poll() is None

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait(timeout=5)


class PageSession:
    """Blocking CDP session bound to one page target.

    Single-threaded by design: events (including Fetch interception) are
    pumped while a command waits for its response.
    """

    def __init__(self, ws_url: str, default_timeout: float = 30.0):
        self.ws = ws_connect(ws_url, max_size=None, close_timeout=2)
        self.default_timeout = default_timeout
        self._next_id = 0
        self._fetch_allow: Callable[[str], bool] | None = None
        self._pending_events: list[dict] = []

    def close(self) -> None:
        try:
            self.ws.close()
        except Exception:
            pass

    # -- plumbing ---------------------------------------------------------

    def _recv(self, timeout: float) -> dict:
        try:
            raw = self.ws.recv(timeout=timeout)
        except TimeoutError as exc:
            raise CdpTimeout("timed out waiting for browser message") from exc
        except Exception as exc:
            raise BrowserCrashed(f"websocket closed: {exc}") from exc
        return json.loads(raw)

    def _handle_event(self, msg: dict) -> None:
        if msg.get("method") == "Fetch.requestPaused":
            self._on_request_paused(msg["params"])
        else:
            self._pending_events.append(msg)
            if len(self._pending_events) > 256:
                del self._pending_events[:128]

    def send(self, method: str, params: dict | None = None, timeout: float | None = None) -> dict:
        self._next_id += 1
        msg_id = self._next_id
        payload = {"id": msg_id, "method": method, "params": params or {}}
        try:
            self.ws.send(json.dumps(payload))
        except Exception as exc:
            raise BrowserCrashed(f"websocket send failed: {exc}") from exc
        deadline = time.monotonic() + (timeout if timeout is not None else self.default_timeout)
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise CdpTimeout(f"{method} timed out")
            msg = self._recv(remaining)
            if msg.get("id") == msg_id:
                if "error" in msg:
                    raise CdpError(f"{method}: {msg['error'].get('message')}")
                return msg.get("result", {})
            if "method" in msg:
                self._handle_event(msg)

    def wait_event(self, name: str, timeout: float) -> dict:
        for i, msg in enumerate(self._pending_events):
            if msg.get("method") == name:
                return self._pending_events.pop(i).get("params", {})
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise CdpTimeout(f"timed out waiting for {name}")
            msg = self._recv(remaining)
            if msg.get("method") == name:
                return msg.get("params", {})
            if "method" in msg:
                self._handle_event(msg)

    # -- Fetch interception -------------------------------------------------

    def enable_fetch(self, allow: Callable[[str], bool]) -> None:
        self._fetch_allow = allow
        self.send("Fetch.enable", {"patterns": [{"urlPattern": "*"}]})

    def _on_request_paused(self, params: dict) -> None:
        request_id = params.get("requestId")
        url = params.get("request", {}).get("url", "")
        allow = self._fetch_allow(url) if self._fetch_allow else True
        try:
            if allow:
                self.send("Fetch.continueRequest", {"requestId": request_id})
            else:
                self.send("Fetch.failRequest", {"requestId": request_id, "errorReason": "BlockedByClient"})
        except CdpError as exc:
            log.debug("fetch interception response failed for %s: %s", url, exc)

    # -- page operations ------------------------------------------------------

    def enable_page_domain(self) -> None:
        self.send("Page.enable")

    def set_device_metrics(self, width: int, height: int, scale: float) -> None:
        self.send(
            "Emulation.setDeviceMetricsOverride",
            {"width": width, "height": height, "deviceScaleFactor": scale, "mobile": False},
        )

    def navigate(self, url: str, timeout: float, settle_s: float = 0.0) -> None:
        self.send("Page.navigate", {"url": url}, timeout=timeout)
        self.wait_event("Page.loadEventFired", timeout=timeout)
        if settle_s > 0:
            deadline = time.monotonic() + settle_s
            while True:  # keep pumping interception events during the settle delay
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                try:
                    msg = self._recv(remaining)
                except CdpTimeout:
                    break
                if "method" in msg:
                    self._handle_event(msg)

    def evaluate(self, expression: str, timeout: float | None = None) -> Any:
        result = self.send(
            "Runtime.evaluate",
            {"expression": expression, "returnByValue": True, "awaitPromise": True},
            timeout=timeout,
        )
        if "exceptionDetails" in result:
            detail = result["exceptionDetails"]
            text = detail.get("exception", {}).get("description") or detail.get("text", "script error")
            raise EvaluationError(text)
        return result.get("result", {}).get("value")

    def capture_screenshot(self, image_format: str = "png", quality: int = 90) -> bytes:
        params: dict = {"format": image_format, "captureBeyondViewport": False}
        if image_format == "jpeg":
            params["quality"] = quality
        result = self.send("Page.captureScreenshot", params, timeout=self.default_timeout)
        return base64.b64decode(result["data"])
