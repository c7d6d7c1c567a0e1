"""Stream source documents from HTML directory trees and NDJSON dump files.

All iterators are lazy: memory stays O(1) in the corpus size, and each yielded
document can be handed to a different worker. Iterators are single-consumer.
"""

from __future__ import annotations

import gzip
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Iterator

log = logging.getLogger(__name__)

LANG_RE = re.compile(r"^[a-z]{2,3}$")

GZIP_MAGIC = b"\x1f\x8b"


class IngestError(Exception):
    """Fatal ingest problem (unreadable root, bad shard spec, duplicate ids in strict mode)."""


@dataclass(frozen=True)
class SourceDocument:
    """One HTML article as pulled from a dump or a directory tree."""

    doc_id: str
    title: str
    lang: str
    html: str
    source_uri: str

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not self.html:
            raise ValueError("html must be non-empty")
        if not LANG_RE.match(self.lang):
            raise ValueError(f"lang {self.lang!r} does not match [a-z]{{2,3}}")


@dataclass
class IngestStats:
    """Mutable counters shared across the chained iterators of one run."""

    read: int = 0
    skipped: Counter = field(default_factory=Counter)

    @property
    def skipped_total(self) -> int:
        return sum(self.skipped.values())


def dig(obj: Any, dotted: str) -> Any:
    """Resolve a dotted key path (``article_body.html``) in nested dicts.

    Returns None when any segment is missing or a non-dict is hit mid-path.
    """
    cur = obj
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def open_maybe_gzip(path: Path) -> IO[bytes]:
    """Open a file, transparently decompressing when the gzip magic is present."""
    f = open(path, "rb")
    magic = f.read(2)
    f.seek(0)
    if magic == GZIP_MAGIC:
        return gzip.open(f, "rb")  # type: ignore[return-value]
    return f


def iter_directory(
    path: Path | str,
    lang: str,
    stats: IngestStats | None = None,
    strict: bool = False,
) -> Iterator[SourceDocument]:
    """Yield one document per ``*.html``/``*.htm`` file under ``path``.

    doc_id is the POSIX-style relative path; order is lexicographic on it, so
    re-runs see the same sequence. Unreadable files are skipped with a warning
    (fatal in strict mode); an unreadable root directory is always fatal.
    """
    root = Path(path)
    stats = stats if stats is not None else IngestStats()
    if not root.is_dir():
        raise IngestError(f"input directory not readable: {root}")
    try:
        files = sorted(
            p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in (".html", ".htm")
        )
    except OSError as exc:
        raise IngestError(f"cannot walk {root}: {exc}") from exc
    for fp in files:
        rel = fp.relative_to(root).as_posix()
        try:
            html = fp.read_text("utf-8", errors="replace")
        except OSError as exc:
            if strict:
                raise IngestError(f"unreadable file {fp}: {exc}") from exc
            log.warning("skipping unreadable file %s: %s", fp, exc)
            stats.skipped["unreadable_file"] += 1
            continue
        if not html:
            stats.skipped["empty_html"] += 1
            continue
        stats.read += 1
        yield SourceDocument(
            doc_id=rel,
            title=fp.stem,
            lang=lang,
            html=html,
            source_uri=fp.as_uri(),
        )


def iter_ndjson(
    path: Path | str,
    html_field: str,
    id_field: str,
    lang: str,
    title_field: str | None = None,
    stats: IngestStats | None = None,
    strict: bool = False,
) -> Iterator[SourceDocument]:
    """Yield documents from a newline-delimited JSON file (optionally gzipped).

    Records missing either addressed field are skipped and counted; malformed
    JSON lines are skipped too unless strict mode makes them fatal. File order
    is preserved.
    """
    path = Path(path)
    stats = stats if stats is not None else IngestStats()
    with open_maybe_gzip(path) as f:
        for lineno, raw in enumerate(f):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                if strict:
                    raise IngestError(f"{path}:{lineno + 1}: malformed JSON: {exc}") from exc
                log.warning("%s:%d: skipping malformed JSON line", path, lineno + 1)
                stats.skipped["malformed_json"] += 1
                continue
            html = dig(obj, html_field)
            doc_id = dig(obj, id_field)
            if not isinstance(html, str) or not html or doc_id is None:
                stats.skipped["missing_field"] += 1
                continue
            title = ""
            if title_field is not None:
                t = dig(obj, title_field)
                if isinstance(t, str):
                    title = t
            stats.read += 1
            yield SourceDocument(
                doc_id=str(doc_id),
                title=title,
                lang=lang,
                html=html,
                source_uri=f"{path.as_uri()}#L{lineno + 1}",
            )


def shard(
    stream: Iterable[SourceDocument], shard_index: int, shard_count: int
) -> Iterator[SourceDocument]:
    """Deterministic partition by sequence number modulo shard_count.

    The union over all shard_index values is the input stream and the shards
    are pairwise disjoint. Validates the spec before consuming anything.
    """
    if shard_count < 1 or not (0 <= shard_index < shard_count):
        raise IngestError(f"invalid shard spec {shard_index}/{shard_count}")

    def gen() -> Iterator[SourceDocument]:
        for pos, doc in enumerate(stream):
            if pos % shard_count == shard_index:
                yield doc

    return gen()


def limit(stream: Iterable[SourceDocument], n: int | None) -> Iterator[SourceDocument]:
    """Pass through at most n documents (None = unlimited)."""
    if n is None:
        yield from stream
        return
    for i, doc in enumerate(stream):
        if i >= n:
            return
        yield doc


def dedupe_ids(
    stream: Iterable[SourceDocument], strict: bool = False
) -> Iterator[SourceDocument]:
    """Resolve doc_id collisions: fatal in strict mode, suffixed -2, -3, ... otherwise.

    Downstream filenames derive from doc_id, so collisions cannot pass through.
    """
    seen: dict[str, int] = {}
    for doc in stream:
        n = seen.get(doc.doc_id, 0) + 1
        seen[doc.doc_id] = n
        if n == 1:
            yield doc
            continue
        if strict:
            raise IngestError(f"duplicate doc_id {doc.doc_id!r}")
        new_id = f"{doc.doc_id}-{n}"
        log.warning("doc_id collision: %r renamed to %r", doc.doc_id, new_id)
        yield SourceDocument(
            doc_id=new_id,
            title=doc.title,
            lang=doc.lang,
            html=doc.html,
            source_uri=doc.source_uri,
        )
