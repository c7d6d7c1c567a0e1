import gzip
import hashlib
import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vicorpus.ingest import (
    IngestError,
    IngestStats,
    SourceDocument,
    dedupe_ids,
    dig,
    iter_directory,
    iter_ndjson,
    limit,
    shard,
)


def _write_html_tree(root: Path, names):
    for name in names:
        p = root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(f"<html><body>{name}</body></html>", "utf-8")


def test_directory_lexicographic_order(tmp_path):
    _write_html_tree(tmp_path, ["b.html", "a.html"])
    docs = list(iter_directory(tmp_path, "en"))
    assert [d.doc_id for d in docs] == ["a.html", "b.html"]
    assert docs[0].lang == "en"
    assert "a.html" in docs[0].html


def test_directory_empty_is_empty_stream(tmp_path):
    assert list(iter_directory(tmp_path, "en")) == []


def test_directory_missing_root_fatal(tmp_path):
    with pytest.raises(IngestError):
        list(iter_directory(tmp_path / "nope", "en"))


def test_directory_unreadable_file_skipped_and_counted(tmp_path, monkeypatch):
    _write_html_tree(tmp_path, ["good.html", "locked.html"])
    real_read_text = Path.read_text

    def flaky(self, *args, **kwargs):
        if self.name == "locked.html":
            raise PermissionError(13, "permission denied", str(self))
        return real_read_text(self, *args, **kwargs)

    monkeypatch.setattr(Path, "read_text", flaky)
    stats = IngestStats()
    docs = list(iter_directory(tmp_path, "en", stats=stats))
    assert [d.doc_id for d in docs] == ["good.html"]
    assert stats.skipped["unreadable_file"] == 1


def test_directory_unreadable_file_fatal_in_strict(tmp_path, monkeypatch):
    _write_html_tree(tmp_path, ["locked.html"])
    monkeypatch.setattr(Path, "read_text", lambda self, *a, **k: (_ for _ in ()).throw(PermissionError()))
    with pytest.raises(IngestError):
        list(iter_directory(tmp_path, "en", strict=True))


def test_source_document_validation():
    with pytest.raises(ValueError):
        SourceDocument(doc_id="", title="", lang="en", html="<p/>", source_uri="x")
    with pytest.raises(ValueError):
        SourceDocument(doc_id="a", title="", lang="EN", html="<p/>", source_uri="x")
    with pytest.raises(ValueError):
        SourceDocument(doc_id="a", title="", lang="en", html="", source_uri="x")


def _ndjson_file(tmp_path, rows, name="dump.ndjson"):
    p = tmp_path / name
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n", "utf-8")
    return p


def test_ndjson_file_order_and_nested_fields(tmp_path):
    rows = [
        {"identifier": i, "article_body": {"html": f"<p>{i}</p>"}, "name": f"doc {i}"}
        for i in range(3)
    ]
    p = _ndjson_file(tmp_path, rows)
    docs = list(iter_ndjson(p, "article_body.html", "identifier", "en", title_field="name"))
    assert [d.doc_id for d in docs] == ["0", "1", "2"]
    assert docs[1].title == "doc 1"
    assert docs[2].html == "<p>2</p>"


def test_ndjson_missing_field_skipped(tmp_path):
    rows = [{"id": 1, "html": "<p>a</p>"}, {"id": 2}, {"id": 3, "html": "<p>c</p>"}]
    p = _ndjson_file(tmp_path, rows)
    stats = IngestStats()
    docs = list(iter_ndjson(p, "html", "id", "en", stats=stats))
    assert [d.doc_id for d in docs] == ["1", "3"]
    assert stats.skipped["missing_field"] == 1


def test_ndjson_malformed_line_counted_or_fatal(tmp_path):
    p = tmp_path / "bad.ndjson"
    p.write_text('{"id": 1, "html": "<p>a</p>"}\nnot json\n', "utf-8")
    stats = IngestStats()
    docs = list(iter_ndjson(p, "html", "id", "en", stats=stats))
    assert len(docs) == 1
    assert stats.skipped["malformed_json"] == 1
    with pytest.raises(IngestError):
        list(iter_ndjson(p, "html", "id", "en", strict=True))


def test_ndjson_gzip_detected_by_magic(tmp_path):
    rows = [{"id": i, "html": f"<p>{i}</p>"} for i in range(4)]
    p = tmp_path / "dump.ndjson.gz"
    p.write_bytes(gzip.compress(("\n".join(json.dumps(r) for r in rows)).encode()))
    docs = list(iter_ndjson(p, "html", "id", "en"))
    assert len(docs) == 4


def test_ndjson_shard_matches_brute_force_filter(tmp_path):
    rows = [{"id": i, "html": f"<p>{i}</p>"} for i in range(100)]
    p = _ndjson_file(tmp_path, rows)
    got = [d.doc_id for d in shard(iter_ndjson(p, "html", "id", "en"), 2, 4)]
    expected = [str(i) for i in range(100) if i % 4 == 2]
    assert got == expected


def test_dig_dotted_paths():
    obj = {"a": {"b": {"c": 1}}, "x": 2}
    assert dig(obj, "a.b.c") == 1
    assert dig(obj, "x") == 2
    assert dig(obj, "a.b.missing") is None
    assert dig(obj, "x.y") is None


def _docs(n):
    return [
        SourceDocument(doc_id=f"d{i:03d}", title="", lang="en", html="<p>x</p>", source_uri="mem")
        for i in range(n)
    ]


def test_shard_positions_and_identity():
    docs = _docs(10)
    got = [d.doc_id for d in shard(iter(docs), 0, 2)]
    assert got == [docs[i].doc_id for i in (0, 2, 4, 6, 8)]
    assert [d.doc_id for d in shard(iter(docs), 0, 1)] == [d.doc_id for d in docs]


def test_shard_sizes_97_over_4():
    docs = _docs(97)
    sizes = sorted(len(list(shard(iter(docs), i, 4))) for i in range(4))
    assert sizes == [24, 24, 24, 25]


def test_shard_invalid_spec_fatal_before_streaming():
    with pytest.raises(IngestError):
        shard(iter(_docs(3)), 4, 4)
    with pytest.raises(IngestError):
        shard(iter(_docs(3)), -1, 2)


@settings(max_examples=30)
@given(n=st.integers(0, 60), count=st.integers(1, 16))
def test_shard_partition_property(n, count):
    docs = _docs(n)
    parts = [[d.doc_id for d in shard(iter(docs), i, count)] for i in range(count)]
    merged = sorted(x for part in parts for x in part)
    assert merged == sorted(d.doc_id for d in docs)
    flat = [x for part in parts for x in part]
    assert len(flat) == len(set(flat))


def test_limit():
    assert len(list(limit(iter(_docs(10)), 3))) == 3
    assert len(list(limit(iter(_docs(2)), None))) == 2


def test_dedupe_suffixes_or_fatal():
    dup = [
        SourceDocument(doc_id="a", title="", lang="en", html="<p>1</p>", source_uri="m"),
        SourceDocument(doc_id="a", title="", lang="en", html="<p>2</p>", source_uri="m"),
    ]
    out = list(dedupe_ids(iter(dup)))
    assert [d.doc_id for d in out] == ["a", "a-2"]
    with pytest.raises(IngestError):
        list(dedupe_ids(iter(dup), strict=True))


def test_determinism_hash_of_id_sequence(tmp_path):
    _write_html_tree(tmp_path, [f"{i:02d}/{j}.html" for i in range(3) for j in "xyz"])

    def run():
        ids = [d.doc_id for d in iter_directory(tmp_path, "en")]
        return hashlib.sha256("\n".join(ids).encode()).hexdigest()

    assert run() == run()


def test_streams_are_lazy(tmp_path):
    # Pulling the first document must not consume the rest of the stream.
    p = tmp_path / "big.ndjson"
    with open(p, "w") as f:
        for i in range(5000):
            f.write(json.dumps({"id": i, "html": f"<p>{i}</p>"}) + "\n")
    stats = IngestStats()
    docs = iter_ndjson(p, "html", "id", "en", stats=stats)
    assert next(docs).doc_id == "0"
    assert stats.read == 1
