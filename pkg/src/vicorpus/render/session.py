"""Per-document rendering and the browser worker pool.

One worker owns one browser process and one page. Per-document seeds derive
from the run seed and doc_id, so results do not depend on scheduling order:
the same run seed yields byte-identical reports at any worker count.
"""

from __future__ import annotations

import base64
import io
import json
import logging
import queue
import tempfile
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Iterator

from PIL import Image

from ..ingest import SourceDocument
from ..report import InstrumentationReport
from ..seeds import derive_doc_seed
from .cdp import (
    BrowserCrashed,
    BrowserProcess,
    CdpError,
    CdpTimeout,
    EvaluationError,
    PageSession,
)
from .serve import OneShotServer

log = logging.getLogger(__name__)

MAX_REPORT_BYTES = 50 * 1024 * 1024

HEIGHT_PROBE = "Math.max(document.documentElement.scrollHeight, document.body ? document.body.scrollHeight : 0)"


class RenderError(Exception):
    pass


class PageSkipped(RenderError):
    """Non-retriable per-document failure; the run continues."""


@dataclass
class RenderConfig:
    viewport_width: int = 1280
    viewport_height: int = 720
    device_scale: float = 1.0
    nav_timeout_ms: int = 20000
    eval_timeout_ms: int = 30000
    block_remote_resources: bool = True
    max_page_height_px: int = 20000
    settle_ms: int = 150
    image_format: str = "png"
    jpeg_quality: int = 90
    data_url_limit: int = 2 * 1024 * 1024

    def __post_init__(self):
        if self.viewport_width < 320:
            raise RenderError("viewport_width must be >= 320")
        if self.nav_timeout_ms <= 0 or self.eval_timeout_ms <= 0:
            raise RenderError("timeouts must be positive")
        if self.max_page_height_px < self.viewport_height:
            raise RenderError("max_page_height_px must be >= viewport_height")
        if self.image_format not in ("png", "jpeg"):
            raise RenderError(f"unsupported image format {self.image_format!r}")


@dataclass
class Timings:
    nav_ms: float = 0.0
    instrument_ms: float = 0.0
    capture_ms: float = 0.0


@dataclass
class CaptureResult:
    doc_id: str
    lang: str
    image: bytes
    image_width: int
    image_height: int
    report: InstrumentationReport
    timings: Timings
    seed: int
    truncated: bool = False
    font_families: list[str] = field(default_factory=list)


def load_instrument_source(path: Path | str | None = None) -> str:
    """The bundled page script; an explicit path overrides the packaged copy."""
    if path is not None:
        return Path(path).read_text("utf-8")
    ref = resources.files("vicorpus").joinpath("data/instrument.js")
    try:
        return ref.read_text("utf-8")
    except FileNotFoundError:
        log.warning("packaged instrument.js missing; page evaluation will fail on real browsers")
        return "/* instrumentation bundle not built */"


def _doc_url(html: str, cfg: RenderConfig, server: OneShotServer) -> str:
    encoded = html.encode("utf-8")
    if len(encoded) <= cfg.data_url_limit:
        return "data:text/html;base64," + base64.b64encode(encoded).decode("ascii")
    return server.url_for(html)


def _allow_url(url: str, server_port: int) -> bool:
    if url.startswith(("data:", "about:", "blob:")):
        return True
    return url.startswith((f"http://127.0.0.1:{server_port}/", f"http://localhost:{server_port}/"))


def render(
    page: PageSession,
    doc: SourceDocument,
    cfg: RenderConfig,
    families: list[str],
    seed: int,
    instrument_source: str,
    server: OneShotServer,
) -> CaptureResult:
    """Render one document: navigate, instrument, resize, collect, capture.

    The report is collected strictly before the screenshot with no DOM
    mutation in between, so annotations match the pixels.
    """
    timings = Timings()
    t0 = time.monotonic()
    page.set_device_metrics(cfg.viewport_width, cfg.viewport_height, cfg.device_scale)
    url = _doc_url(doc.html, cfg, server)
    page.navigate(url, timeout=cfg.nav_timeout_ms / 1000, settle_s=cfg.settle_ms / 1000)
    timings.nav_ms = (time.monotonic() - t0) * 1000

    t1 = time.monotonic()
    opts = {"families": list(families), "seed": str(seed), "version": "1"}
    prepare_expr = f"{instrument_source}\n;__vicorpusPrepare({json.dumps(opts)})"
    raw = page.evaluate(prepare_expr, timeout=cfg.eval_timeout_ms / 1000)
    try:
        prep = json.loads(raw)
    except (TypeError, json.JSONDecodeError) as exc:
        raise EvaluationError(f"prepare returned no JSON: {raw!r}") from exc
    if not prep.get("ok"):
        raise EvaluationError(f"prepare failed: {prep.get('error', 'unknown')}")

    doc_height = int(page.evaluate(HEIGHT_PROBE, timeout=cfg.eval_timeout_ms / 1000))
    height = max(cfg.viewport_height, min(doc_height, cfg.max_page_height_px))
    truncated = doc_height > cfg.max_page_height_px
    page.set_device_metrics(cfg.viewport_width, height, cfg.device_scale)

    report_json = page.evaluate("__vicorpusCollect({})", timeout=cfg.eval_timeout_ms / 1000)
    if not isinstance(report_json, str):
        raise EvaluationError(f"collect returned {type(report_json).__name__}, expected JSON string")
    if len(report_json) > MAX_REPORT_BYTES:
        raise EvaluationError(f"report too large ({len(report_json)} bytes); page skipped")
    report = InstrumentationReport.from_json(report_json)
    timings.instrument_ms = (time.monotonic() - t1) * 1000

    t2 = time.monotonic()
    image = page.capture_screenshot(cfg.image_format, cfg.jpeg_quality)
    timings.capture_ms = (time.monotonic() - t2) * 1000

    with Image.open(io.BytesIO(image)) as im:
        image_width, image_height = im.size
    exp_w = report.page_width * cfg.device_scale
    exp_h = report.page_height * cfg.device_scale
    if abs(image_width - exp_w) > 1 + 1e-6 or abs(image_height - exp_h) > 1 + 1e-6:
        raise PageSkipped(
            f"image {image_width}x{image_height} disagrees with report "
            f"{report.page_width}x{report.page_height} at scale {cfg.device_scale}"
        )

    page.navigate("about:blank", timeout=cfg.nav_timeout_ms / 1000)
    return CaptureResult(
        doc_id=doc.doc_id,
        lang=doc.lang,
        image=image,
        image_width=image_width,
        image_height=image_height,
        report=report,
        timings=timings,
        seed=seed,
        truncated=truncated,
        font_families=list(families),
    )


@dataclass
class PoolConfig:
    browser_cmd: list[str]
    workers: int = 1
    run_seed: int = 0
    families_for: Callable[[SourceDocument], list[str]] = lambda doc: []
    instrument_source: str = ""
    max_failures: int = 10
    port_base: int | None = None
    user_data_root: Path | None = None

    def __post_init__(self):
        if self.workers < 1:
            raise RenderError("workers must be >= 1")


@dataclass
class SkippedDocument:
    doc_id: str
    lang: str
    reason: str


class RunAborted(RenderError):
    pass


def pool_run(
    docs: Iterable[tuple[int, SourceDocument]],
    cfg: RenderConfig,
    pool: PoolConfig,
) -> Iterator[tuple[int, CaptureResult | SkippedDocument]]:
    """Stream (doc_index, result) pairs in completion order.

    Each worker owns one browser process and one page. Navigation timeouts and
    crashes are retried once on a fresh browser; script failures skip the
    document. More than ``max_failures`` skipped documents aborts the run.
    """
    jobs: queue.Queue = queue.Queue(maxsize=pool.workers * 2)
    results: queue.Queue = queue.Queue()
    abort = threading.Event()
    tmp_root = pool.user_data_root or Path(tempfile.mkdtemp(prefix="vicorpus-browser-"))

    def worker(worker_idx: int) -> None:
        browser: BrowserProcess | None = None
        page: PageSession | None = None
        server = OneShotServer()

        def start_browser() -> tuple[BrowserProcess, PageSession]:
            port = 0 if pool.port_base is None else pool.port_base + worker_idx
            data_dir = Path(tmp_root) / f"worker-{worker_idx}-{time.monotonic_ns()}"
            b = BrowserProcess(pool.browser_cmd, data_dir, port=port)
            p = PageSession(b.new_page(), default_timeout=cfg.eval_timeout_ms / 1000)
            p.enable_page_domain()
            if cfg.block_remote_resources:
                p.enable_fetch(lambda url: _allow_url(url, server.port))
            return b, p

        def teardown():
            nonlocal browser, page
            if page is not None:
                page.close()
            if browser is not None:
                browser.close()
            browser = page = None

        try:
            while not abort.is_set():
                item = jobs.get()
                if item is None:
                    break
                doc_index, doc = item
                attempts = 0
                while True:
                    try:
                        if browser is None or not browser.alive:
                            teardown()
                            browser, page = start_browser()
                        seed = derive_doc_seed(pool.run_seed, doc.doc_id)
                        result = render(
                            page, doc, cfg, pool.families_for(doc), seed, pool.instrument_source, server
                        )
                        results.put((doc_index, result))
                        break
                    except (CdpTimeout, BrowserCrashed) as exc:
                        attempts += 1
                        log.warning("worker %d: %s on %s (attempt %d)", worker_idx, exc, doc.doc_id, attempts)
                        teardown()
                        if attempts > 1:
                            results.put((doc_index, SkippedDocument(doc.doc_id, doc.lang, f"retriable failure: {exc}")))
                            break
                    except (EvaluationError, PageSkipped, CdpError) as exc:
                        log.warning("worker %d: skipping %s: %s", worker_idx, doc.doc_id, exc)
                        results.put((doc_index, SkippedDocument(doc.doc_id, doc.lang, str(exc))))
                        try:
                            if page is not None:
                                page.navigate("about:blank", timeout=5)
                        except CdpError:
                            teardown()
                        break
        finally:
            teardown()
            server.close()
            results.put(("worker-done", worker_idx))

    threads = [threading.Thread(target=worker, args=(i,), daemon=True) for i in range(pool.workers)]
    for t in threads:
        t.start()

    def feeder():
        try:
            for doc_index, doc in docs:
                if abort.is_set():
                    break
                jobs.put((doc_index, doc))
        finally:
            for _ in threads:
                jobs.put(None)

    feed_thread = threading.Thread(target=feeder, daemon=True)
    feed_thread.start()

    done_workers = 0
    failures = 0
    try:
        while done_workers < len(threads):
            kind_or_index, payload = results.get()
            if kind_or_index == "worker-done":
                done_workers += 1
                continue
            if isinstance(payload, SkippedDocument):
                failures += 1
                if failures > pool.max_failures:
                    abort.set()
                    yield (kind_or_index, payload)
                    raise RunAborted(f"failure quota exceeded ({failures} > {pool.max_failures})")
            yield (kind_or_index, payload)
    finally:
        abort.set()
        # unblock any worker waiting on the job queue
        try:
            while True:
                jobs.get_nowait()
        except queue.Empty:
            pass
        for _ in threads:
            jobs.put(None)
        for t in threads:
            t.join(timeout=10)
        feed_thread.join(timeout=10)
