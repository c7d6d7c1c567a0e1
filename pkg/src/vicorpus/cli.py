"""Command-line entry point: build, analyze, viz, validate, fonts.

Configuration precedence: explicit flags > VICORPUS_* environment variables >
TOML config file (tables named after subcommands) > built-in defaults.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import html as html_mod
import json
import logging
import random
import re
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import click

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import GENERATOR_VERSION
from .analysis import analyze_corpora, load_stopwords
from .annotate import build_annotations
from .fonts import index_fonts
from .ingest import IngestError, IngestStats, dedupe_ids, iter_directory, iter_ndjson, limit, shard
from .overlay import DEFAULT_COLORMAP, LEVELS, OverlayError, colormap_names, render_overlay_file
from .render import PoolConfig, RenderConfig, RenderError, pool_run
from .render.session import SkippedDocument, load_instrument_source
from .writer import CorpusWriter, DocumentRecord, WriteError, validate_corpus

log = logging.getLogger("vicorpus")

STUB_BROWSER_SENTINEL = "stub"

_TAG_RE = re.compile(r"<[^>]*>")


class JsonLogHandler(logging.Handler):
    def emit(self, record):
        line = json.dumps(
            {
                "ts": datetime.now(timezone.utc).isoformat(timespec="milliseconds"),
                "level": record.levelname,
                "logger": record.name,
                "msg": record.getMessage(),
            },
            ensure_ascii=False,
        )
        print(line, file=sys.stderr)


def _setup_logging(log_json: bool, verbose: bool) -> None:
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.handlers.clear()
    if log_json:
        root.addHandler(JsonLogHandler())
    else:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as f:
        return tomllib.load(f)


@click.group(context_settings={"auto_envvar_prefix": "VICORPUS"})
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None, help="TOML config file.")
@click.option("--log-json", is_flag=True, default=False, help="Structured JSONL logs on stderr.")
@click.option("--verbose", is_flag=True, default=False, help="Debug-level logging.")
@click.version_option(version=GENERATOR_VERSION)
@click.pass_context
def main(ctx: click.Context, config: str | None, log_json: bool, verbose: bool) -> None:
    """Build visual corpora from HTML with hierarchical text annotations."""
    _setup_logging(log_json, verbose)
    ctx.default_map = _load_config(config)


def _parse_shard(spec: str | None) -> tuple[int, int] | None:
    if not spec:
        return None
    m = re.match(r"^(\d+)/(\d+)$", spec)
    if not m:
        raise click.UsageError(f"--shard must look like i/n, got {spec!r}")
    return int(m.group(1)), int(m.group(2))


def _visible_codepoints(html: str) -> set[int]:
    text = html_mod.unescape(_TAG_RE.sub(" ", html))
    return {ord(c) for c in text if not c.isspace()}


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True), help="HTML dir or NDJSON file.")
@click.option("--input-format", type=click.Choice(["dir", "ndjson"]), default="dir", show_default=True)
@click.option("--html-field", default="article_body.html", show_default=True, help="Dotted key path (ndjson).")
@click.option("--id-field", default="identifier", show_default=True, help="Dotted key path (ndjson).")
@click.option("--title-field", default=None, help="Dotted key path for titles (ndjson).")
@click.option("--lang", default="en", show_default=True)
@click.option("--shard", "shard_spec", default=None, help="i/n deterministic input partition.")
@click.option("--limit", "limit_n", type=int, default=None, help="Stop after N documents.")
@click.option("--strict", is_flag=True, default=False, help="Fail fast on malformed inputs and id collisions.")
@click.option("--out", "out_root", required=True, type=click.Path(), help="Corpus output root.")
@click.option("--shard-size", type=int, default=1000, show_default=True, help="Records per output shard dir.")
@click.option("--image-format", type=click.Choice(["png", "jpeg"]), default="png", show_default=True)
@click.option("--jpeg-quality", type=int, default=90, show_default=True)
@click.option("--fonts", "fonts_dir", type=click.Path(exists=True, file_okay=False), default=None, help="Font pool directory; enables glyph tightening.")
@click.option("--font-cache", type=click.Path(), default=None, help="Catalog cache file.")
@click.option("--browser-bin", default=STUB_BROWSER_SENTINEL, show_default=True, help="Chromium-family binary, or 'stub' for the bundled stub browser.")
@click.option("--port-base", type=int, default=None, help="First debugging port; default: ephemeral.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=None, help="Run seed; random (printed) when omitted.")
@click.option("--max-errors", type=int, default=10, show_default=True)
@click.option("--viewport-width", type=int, default=1280, show_default=True)
@click.option("--device-scale", type=float, default=1.0, show_default=True)
@click.option("--max-page-height", type=int, default=20000, show_default=True)
@click.option("--block-remote/--allow-remote", "block_remote", default=True, show_default=True)
@click.option("--settle-ms", type=int, default=150, show_default=True)
@click.option("--gap-factor", type=float, default=1.0, show_default=True, help="Word-break gap threshold x median advance.")
@click.option("--instrument-script", type=click.Path(exists=True, dir_okay=False), default=None, help="Override the bundled page script.")
def build(
    input_path,
    input_format,
    html_field,
    id_field,
    title_field,
    lang,
    shard_spec,
    limit_n,
    strict,
    out_root,
    shard_size,
    image_format,
    jpeg_quality,
    fonts_dir,
    font_cache,
    browser_bin,
    port_base,
    workers,
    seed,
    max_errors,
    viewport_width,
    device_scale,
    max_page_height,
    block_remote,
    settle_ms,
    gap_factor,
    instrument_script,
):
    """Render documents into images + hierarchical annotations + manifest."""
    t_start = time.monotonic()
    started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if seed is None:
        seed = random.SystemRandom().getrandbits(64)
    click.echo(f"run seed: {seed}")

    catalog = None
    if fonts_dir:
        catalog = index_fonts(fonts_dir, cache_path=font_cache)
        log.info("font catalog: %d families", len(catalog.families()))

    stats = IngestStats()
    if input_format == "dir":
        stream = iter_directory(input_path, lang, stats=stats, strict=strict)
    else:
        stream = iter_ndjson(
            input_path, html_field, id_field, lang, title_field=title_field, stats=stats, strict=strict
        )
    pair = _parse_shard(shard_spec)
    if pair is not None:
        stream = shard(stream, pair[0], pair[1])
    stream = dedupe_ids(limit(stream, limit_n), strict=strict)

    if browser_bin == STUB_BROWSER_SENTINEL:
        browser_cmd = [sys.executable, "-m", "vicorpus.stubbrowser"]
    else:
        browser_cmd = [browser_bin]

    def families_for(doc):
        if catalog is None:
            return []
        fams = catalog.families_covering(_visible_codepoints(doc.html))
        return fams if fams else catalog.families()

    cfg = RenderConfig(
        viewport_width=viewport_width,
        device_scale=device_scale,
        max_page_height_px=max_page_height,
        block_remote_resources=block_remote,
        settle_ms=settle_ms,
        image_format=image_format,
        jpeg_quality=jpeg_quality,
    )
    pool = PoolConfig(
        browser_cmd=browser_cmd,
        workers=workers,
        run_seed=seed,
        families_for=families_for,
        instrument_source=load_instrument_source(instrument_script),
        max_failures=max_errors,
        port_base=port_base,
    )
    writer = CorpusWriter(out_root, shard_size=shard_size, image_format=image_format)

    emitted = 0
    skipped: list[SkippedDocument] = []
    try:
        for doc_index, result in pool_run(enumerate(stream), cfg, pool):
            if isinstance(result, SkippedDocument):
                skipped.append(result)
                continue
            annset = build_annotations(result.report, catalog, gap_factor=gap_factor)
            annset = annset.scaled(device_scale)
            for quads in (annset.chars, annset.words, annset.lines, annset.paragraphs, annset.regions):
                for ann in quads:
                    ann.quad = ann.quad.clamped(result.image_width, result.image_height)
            for c in annset.chars:
                c.loose_quad = c.loose_quad.clamped(result.image_width, result.image_height)
            record = DocumentRecord(
                doc_id=result.doc_id,
                lang=result.lang,
                image="",
                width=result.image_width,
                height=result.image_height,
                annotations=annset,
                font_assignment=result.report.font_assignment,
                seed=result.seed,
            )
            writer.write(doc_index, record, result.image, truncated=result.truncated)
            emitted += 1
    except (RenderError, IngestError, WriteError) as exc:
        raise click.ClickException(str(exc))
    finally:
        config_echo = {
            "input": str(input_path),
            "input_format": input_format,
            "lang": lang,
            "shard": shard_spec,
            "limit": limit_n,
            "viewport_width": viewport_width,
            "device_scale": device_scale,
            "max_page_height": max_page_height,
            "block_remote": block_remote,
            "image_format": image_format,
            "shard_size": shard_size,
            "workers": workers,
            "gap_factor": gap_factor,
            "browser": browser_bin,
            "fonts": str(fonts_dir) if fonts_dir else None,
        }
        errors = {
            "skipped_render": len(skipped),
            "skipped_ingest": stats.skipped_total,
        }
        writer.finalize(
            run_seed=seed,
            config=config_echo,
            errors=errors,
            timestamps={
                "started_at": started_at,
                "finished_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                "wall_s": round(time.monotonic() - t_start, 3),
            },
        )
    for s in skipped:
        log.warning("skipped %s: %s", s.doc_id, s.reason)
    click.echo(f"emitted {emitted} records, skipped {len(skipped)} (ingest skipped {stats.skipped_total})")
    if len(skipped) > max_errors:
        raise click.ClickException(f"error count {len(skipped)} exceeds --max-errors {max_errors}")


@main.command()
@click.option("--corpus", "corpora", multiple=True, required=True, help="tag=path; repeatable. Path is a corpus root (manifest.jsonl) or a directory of .txt files.")
@click.option("--vocab-cap", type=int, default=10000, show_default=True)
@click.option("--components", type=int, default=10, show_default=True)
@click.option("--samples-per-corpus", type=int, default=3626, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--stopwords", type=click.Path(exists=True, dir_okay=False), default=None, help="Override the vendored stop-word list.")
@click.option("--svg/--no-svg", default=False, show_default=True, help="Also write scatter SVGs.")
def analyze(corpora, vocab_cap, components, samples_per_corpus, out_dir, stopwords, svg):
    """Bag-of-words + PCA comparison across corpora (consecutive component pairs)."""
    corpus_map: dict[str, list[tuple[str, str]]] = {}
    for spec in corpora:
        if "=" not in spec:
            raise click.UsageError(f"--corpus expects tag=path, got {spec!r}")
        tag, path = spec.split("=", 1)
        corpus_map[tag] = _load_corpus_texts(Path(path))
        if not corpus_map[tag]:
            raise click.ClickException(f"corpus {tag!r} at {path} has no documents")
    sw = load_stopwords(stopwords)
    try:
        model, paths = analyze_corpora(
            corpus_map,
            vocab_cap=vocab_cap,
            k=components,
            out_dir=out_dir,
            stopwords=sw,
            samples_per_corpus=samples_per_corpus,
            write_svg=svg,
        )
    except Exception as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {len(paths)} scatter tables to {out_dir}")
    click.echo("explained variance: " + ", ".join(f"{v:.4g}" for v in model.explained_variance))


def _load_corpus_texts(path: Path) -> list[tuple[str, str]]:
    """Word-level text per document from a built corpus, or raw .txt files."""
    docs: list[tuple[str, str]] = []
    if (path / "manifest.jsonl").exists():
        for line in (path / "manifest.jsonl").read_text("utf-8").splitlines():
            entry = json.loads(line)
            if entry.get("kind") != "record":
                continue
            record = DocumentRecord.from_json((path / entry["annot"]).read_text("utf-8"))
            words = " ".join(w.text for w in record.annotations.words if not w.is_latex)
            docs.append((record.doc_id, words))
    else:
        for txt in sorted(path.glob("*.txt")):
            docs.append((txt.stem, txt.read_text("utf-8", errors="replace")))
    return docs


@main.command()
@click.option("--record", "record_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--level", type=click.Choice(list(LEVELS)), required=True)
@click.option("--colormap", default=DEFAULT_COLORMAP, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--root", "corpus_root", type=click.Path(exists=True, file_okay=False), default=None, help="Corpus root (default: inferred from the record path).")
def viz(record_path, level, colormap, out_path, corpus_root):
    """Overlay one annotation level onto its page image, colored by reading order."""
    if colormap not in colormap_names():
        raise click.UsageError(f"unknown colormap {colormap!r}; have {', '.join(colormap_names())}")
    try:
        out = render_overlay_file(record_path, level, out_path, colormap, corpus_root)
    except OverlayError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--root", "corpus_root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--pixels/--no-pixels", default=True, show_default=True, help="Also verify pixel hashes.")
def validate(corpus_root, pixels):
    """Re-check every record invariant; nonzero exit on any violation."""
    report = validate_corpus(corpus_root, check_pixels=pixels)
    for v in report.violations:
        click.echo(f"VIOLATION {v}")
    click.echo(f"checked {report.records_checked} records, {len(report.violations)} violations")
    if not report.ok:
        raise click.ClickException("corpus validation failed")


@main.group()
def fonts():
    """Font catalog utilities."""


@fonts.command("index")
@click.option("--fonts", "fonts_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--cache", "cache_path", type=click.Path(), default=None)
def fonts_index(fonts_dir, cache_path):
    """Index a font directory (and optionally persist the catalog cache)."""
    try:
        catalog = index_fonts(fonts_dir, cache_path=cache_path)
    except Exception as exc:
        raise click.ClickException(str(exc))
    families = catalog.families()
    click.echo(f"indexed {len(catalog.entries)} faces, {len(families)} families")
    for fam in families:
        entry = catalog.entry_for(fam)
        click.echo(f"  {fam} [{entry.style}] coverage={len(entry.coverage)}")


if __name__ == "__main__":
    main()
