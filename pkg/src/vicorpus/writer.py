"""Serialize document records to the on-disk corpus layout and validate it.

Layout under the output root:

    images/<shard>/<name>.<ext>     raster pages
    annots/<shard>/<name>.json      one record per document, byte-stable
    manifest.jsonl                  run header line + one line per record

Shards are assigned from the ingest sequence number, never completion order,
so worker count cannot change the layout.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import re
import threading
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from PIL import Image

from . import GENERATOR_VERSION
from .annotate import AnnotationSet, CharAnn, LineAnn, ParaAnn, Quad, RegionAnn, WordAnn
from .schemas import load_schema

log = logging.getLogger(__name__)

_SAFE_CHARS = re.compile(r"[^A-Za-z0-9._-]+")


class WriteError(Exception):
    pass


def safe_name(doc_id: str) -> str:
    """Filesystem-safe stem derived from a doc_id (slashes etc. become '_')."""
    name = _SAFE_CHARS.sub("_", doc_id).strip("._") or "doc"
    return name[:180]


@dataclass
class DocumentRecord:
    doc_id: str
    lang: str
    image: str
    width: int
    height: int
    annotations: AnnotationSet
    font_assignment: dict[str, str]
    seed: int
    generator_version: str = GENERATOR_VERSION

    def to_json_obj(self) -> dict[str, Any]:
        a = self.annotations
        return {
            "doc_id": self.doc_id,
            "lang": self.lang,
            "image": self.image,
            "width": self.width,
            "height": self.height,
            "chars": [
                {
                    "text": c.text,
                    "quad": c.quad.to_flat(),
                    "loose_quad": c.loose_quad.to_flat(),
                    "seq": c.seq,
                    "tight": c.tight,
                }
                for c in a.chars
            ],
            "words": [
                {
                    "text": w.text,
                    "quad": w.quad.to_flat(),
                    "char_indices": w.char_indices,
                    "is_latex": w.is_latex,
                }
                for w in a.words
            ],
            "lines": [
                {"word_indices": l.word_indices, "quad": l.quad.to_flat()} for l in a.lines
            ],
            "paragraphs": [
                {
                    "line_indices": p.line_indices,
                    "quad": p.quad.to_flat(),
                    "dom_depth": p.dom_depth,
                }
                for p in a.paragraphs
            ],
            "regions": [{"quad": r.quad.to_flat(), "kind": r.kind} for r in a.regions],
            "font_assignment": dict(sorted(self.font_assignment.items())),
            "seed": self.seed,
            "generator_version": self.generator_version,
        }

    def to_json(self) -> str:
        """Canonical bytes: UTF-8, sorted keys, LF terminated, no trailing spaces."""
        return (
            json.dumps(self.to_json_obj(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
            + "\n"
        )

    @classmethod
    def from_json_obj(cls, obj: dict[str, Any]) -> "DocumentRecord":
        annset = AnnotationSet(
            chars=[
                CharAnn(
                    text=c["text"],
                    quad=Quad.from_flat(c["quad"]),
                    loose_quad=Quad.from_flat(c["loose_quad"]),
                    seq=c["seq"],
                    tight=c["tight"],
                )
                for c in obj["chars"]
            ],
            words=[
                WordAnn(
                    text=w["text"],
                    quad=Quad.from_flat(w["quad"]),
                    char_indices=list(w["char_indices"]),
                    is_latex=w["is_latex"],
                )
                for w in obj["words"]
            ],
            lines=[
                LineAnn(word_indices=list(l["word_indices"]), quad=Quad.from_flat(l["quad"]))
                for l in obj["lines"]
            ],
            paragraphs=[
                ParaAnn(
                    line_indices=list(p["line_indices"]),
                    quad=Quad.from_flat(p["quad"]),
                    dom_depth=p["dom_depth"],
                )
                for p in obj["paragraphs"]
            ],
            regions=[RegionAnn(quad=Quad.from_flat(r["quad"]), kind=r["kind"]) for r in obj["regions"]],
        )
        return cls(
            doc_id=obj["doc_id"],
            lang=obj["lang"],
            image=obj["image"],
            width=obj["width"],
            height=obj["height"],
            annotations=annset,
            font_assignment=dict(obj["font_assignment"]),
            seed=obj["seed"],
            generator_version=obj["generator_version"],
        )

    @classmethod
    def from_json(cls, text: str) -> "DocumentRecord":
        return cls.from_json_obj(json.loads(text))


def check_record_invariants(obj: dict[str, Any]) -> list[str]:
    """Structural invariants beyond the JSON schema; returns violation strings."""
    problems: list[str] = []
    w, h = obj["width"], obj["height"]
    eps = 1e-6

    def check_quad(flat: list[float], where: str) -> None:
        xs, ys = flat[0::2], flat[1::2]
        if min(xs) < -eps or min(ys) < -eps or max(xs) > w + eps or max(ys) > h + eps:
            problems.append(f"out_of_bounds_quad: {where} quad {flat} exceeds {w}x{h}")

    for i, c in enumerate(obj["chars"]):
        check_quad(c["quad"], f"chars[{i}]")
        check_quad(c["loose_quad"], f"chars[{i}].loose")
    n_chars = len(obj["chars"])
    n_words = len(obj["words"])
    n_lines = len(obj["lines"])
    for i, word in enumerate(obj["words"]):
        check_quad(word["quad"], f"words[{i}]")
        for ci in word["char_indices"]:
            if not (0 <= ci < n_chars):
                problems.append(f"dangling_index: words[{i}] references char {ci} of {n_chars}")
    for i, line in enumerate(obj["lines"]):
        check_quad(line["quad"], f"lines[{i}]")
        for wi in line["word_indices"]:
            if not (0 <= wi < n_words):
                problems.append(f"dangling_index: lines[{i}] references word {wi} of {n_words}")
    for i, para in enumerate(obj["paragraphs"]):
        check_quad(para["quad"], f"paragraphs[{i}]")
        for li in para["line_indices"]:
            if not (0 <= li < n_lines):
                problems.append(f"dangling_index: paragraphs[{i}] references line {li} of {n_lines}")
    for i, region in enumerate(obj["regions"]):
        check_quad(region["quad"], f"regions[{i}]")
    return problems


def pixel_sha256(image_bytes: bytes) -> str:
    """Hash of decoded RGBA pixels, invariant to encoder metadata."""
    with Image.open(io.BytesIO(image_bytes)) as im:
        rgba = im.convert("RGBA")
        return hashlib.sha256(rgba.tobytes()).hexdigest()


@dataclass
class ManifestEntry:
    doc_index: int
    doc_id: str
    lang: str
    shard: str
    image: str
    annot: str
    width: int
    height: int
    pixel_sha256: str
    truncated: bool = False

    def to_json_obj(self) -> dict[str, Any]:
        d = asdict(self)
        d["kind"] = "record"
        return d


class CorpusWriter:
    """Writes images + annotation JSON + the final manifest.

    Thread-safe: concurrent ``write`` calls touch distinct files; manifest
    entries are collected under a lock and flushed once by ``finalize``.
    """

    def __init__(self, out_root: Path | str, shard_size: int = 1000, image_format: str = "png"):
        if shard_size < 1:
            raise WriteError("shard_size must be >= 1")
        if image_format not in ("png", "jpeg"):
            raise WriteError(f"unsupported image format {image_format!r}")
        self.out_root = Path(out_root)
        self.shard_size = shard_size
        self.image_format = image_format
        self.entries: list[ManifestEntry] = []
        self._lock = threading.Lock()
        self._names: set[str] = set()
        self.out_root.mkdir(parents=True, exist_ok=True)

    def _unique_name(self, doc_id: str) -> str:
        base = safe_name(doc_id)
        with self._lock:
            name, n = base, 1
            while name in self._names:
                n += 1
                name = f"{base}-{n}"
            self._names.add(name)
        return name

    def write(
        self,
        doc_index: int,
        record: DocumentRecord,
        image_bytes: bytes,
        truncated: bool = False,
    ) -> DocumentRecord:
        """Persist one record; returns it with the final image path filled in."""
        shard = f"{doc_index // self.shard_size:05d}"
        name = self._unique_name(record.doc_id)
        ext = "png" if self.image_format == "png" else "jpg"
        image_rel = f"images/{shard}/{name}.{ext}"
        annot_rel = f"annots/{shard}/{name}.json"
        record = replace(record, image=image_rel)

        image_path = self.out_root / image_rel
        annot_path = self.out_root / annot_rel
        written: list[Path] = []
        try:
            image_path.parent.mkdir(parents=True, exist_ok=True)
            annot_path.parent.mkdir(parents=True, exist_ok=True)
            image_path.write_bytes(image_bytes)
            written.append(image_path)
            annot_path.write_text(record.to_json(), "utf-8")
            written.append(annot_path)
        except OSError as exc:
            for p in written:  # partial-file cleanup before surfacing the failure
                try:
                    p.unlink()
                except OSError:
                    pass
            raise WriteError(f"writing {record.doc_id}: {exc}") from exc

        entry = ManifestEntry(
            doc_index=doc_index,
            doc_id=record.doc_id,
            lang=record.lang,
            shard=shard,
            image=image_rel,
            annot=annot_rel,
            width=record.width,
            height=record.height,
            pixel_sha256=pixel_sha256(image_bytes),
            truncated=truncated,
        )
        with self._lock:
            self.entries.append(entry)
        return record

    def finalize(
        self,
        run_seed: int,
        config: dict[str, Any],
        errors: dict[str, int],
        timestamps: dict[str, str] | None = None,
    ) -> Path:
        """Write manifest.jsonl; entries sorted by ingest index for stability."""
        entries = sorted(self.entries, key=lambda e: e.doc_index)
        counts: dict[str, int] = {}
        for e in entries:
            counts[e.lang] = counts.get(e.lang, 0) + 1
        header = {
            "kind": "run",
            "generator_version": GENERATOR_VERSION,
            "run_seed": run_seed,
            "config": config,
            "counts": counts,
            "total_records": len(entries),
            "errors": errors,
            # Timestamps live in exactly one field so manifest diffing can drop it.
            "timestamps": timestamps or {},
        }
        path = self.out_root / "manifest.jsonl"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(header, sort_keys=True, ensure_ascii=False) + "\n")
            for e in entries:
                f.write(json.dumps(e.to_json_obj(), sort_keys=True, ensure_ascii=False) + "\n")
        return path


@dataclass
class ValidationReport:
    records_checked: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_corpus(out_root: Path | str, check_pixels: bool = True) -> ValidationReport:
    """Re-check every record invariant plus image/manifest agreement."""
    import jsonschema

    out_root = Path(out_root)
    rep = ValidationReport()
    manifest_path = out_root / "manifest.jsonl"
    if not manifest_path.exists():
        rep.violations.append("count_mismatch: manifest.jsonl missing")
        return rep
    header: dict[str, Any] | None = None
    entries: list[dict[str, Any]] = []
    for line in manifest_path.read_text("utf-8").splitlines():
        obj = json.loads(line)
        if obj.get("kind") == "run":
            header = obj
        else:
            entries.append(obj)
    if header is None:
        rep.violations.append("schema_violation: manifest has no run header")
        return rep
    if header.get("total_records") != len(entries):
        rep.violations.append(
            f"count_mismatch: header says {header.get('total_records')}, manifest has {len(entries)} entries"
        )
    if sum(header.get("counts", {}).values()) != len(entries):
        rep.violations.append("count_mismatch: per-language counts do not sum to entry count")

    on_disk = {p.relative_to(out_root).as_posix() for p in (out_root / "annots").rglob("*.json")} if (out_root / "annots").exists() else set()
    listed = {e["annot"] for e in entries}
    for extra in sorted(on_disk - listed):
        rep.violations.append(f"count_mismatch: {extra} on disk but not in manifest")

    schema = load_schema("record")
    validator = jsonschema.Draft202012Validator(schema)

    for entry in entries:
        annot_path = out_root / entry["annot"]
        image_path = out_root / entry["image"]
        if not annot_path.exists():
            rep.violations.append(f"count_mismatch: missing annotation file {entry['annot']}")
            continue
        raw = annot_path.read_text("utf-8")
        obj = json.loads(raw)
        rep.records_checked += 1
        for err in validator.iter_errors(obj):
            rep.violations.append(
                f"schema_violation: {entry['annot']}: {'/'.join(str(p) for p in err.absolute_path)}: {err.message}"
            )
        try:
            rechecked = DocumentRecord.from_json(raw).to_json()
            if rechecked != raw:
                rep.violations.append(f"schema_violation: {entry['annot']} does not round-trip byte-stably")
        except (KeyError, TypeError, ValueError) as exc:
            rep.violations.append(f"schema_violation: {entry['annot']} unparseable: {exc}")
        rep.violations.extend(f"{v} [{entry['annot']}]" for v in check_record_invariants(obj))
        if not image_path.exists():
            rep.violations.append(f"count_mismatch: missing image file {entry['image']}")
            continue
        img_bytes = image_path.read_bytes()
        with Image.open(io.BytesIO(img_bytes)) as im:
            if im.size != (obj["width"], obj["height"]):
                rep.violations.append(
                    f"dimension_mismatch: {entry['image']} is {im.size[0]}x{im.size[1]}, record says {obj['width']}x{obj['height']}"
                )
        if check_pixels and entry.get("pixel_sha256"):
            if pixel_sha256(img_bytes) != entry["pixel_sha256"]:
                rep.violations.append(f"pixel_hash_mismatch: {entry['image']}")
        if obj["image"] != entry["image"]:
            rep.violations.append(
                f"schema_violation: record image path {obj['image']} disagrees with manifest {entry['image']}"
            )
    return rep
