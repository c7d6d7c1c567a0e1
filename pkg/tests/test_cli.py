import json
import os
from pathlib import Path

import pytest
from click.testing import CliRunner

from vicorpus.cli import main
from vicorpus.writer import validate_corpus

FIXTURE_HTML = Path(__file__).parent / "fixtures" / "html"


def run_cli(args, env=None):
    runner = CliRunner()
    return runner.invoke(main, args, env=env, catch_exceptions=False)


def build_corpus(tmp_path, font_dir, out_name="corpus", seed=42, workers=1, extra=()):
    out = tmp_path / out_name
    result = run_cli(
        [
            "build",
            "--input", str(FIXTURE_HTML),
            "--out", str(out),
            "--fonts", str(font_dir),
            "--seed", str(seed),
            "--workers", str(workers),
            "--viewport-width", "640",
            "--browser-bin", "stub",
            *extra,
        ]
    )
    assert result.exit_code == 0, result.output
    return out


def corpus_annots(root):
    return {p.name: p.read_bytes() for p in (root / "annots").rglob("*.json")}


def manifest_lines(root, drop_timestamps=True):
    lines = [json.loads(l) for l in (root / "manifest.jsonl").read_text().splitlines()]
    if drop_timestamps:
        for obj in lines:
            obj.pop("timestamps", None)
    return lines


@pytest.fixture(scope="module")
def golden(tmp_path_factory, font_dir):
    tmp = tmp_path_factory.mktemp("golden")
    return build_corpus(tmp, font_dir)


def test_build_emits_all_fixture_records(golden):
    annots = corpus_annots(golden)
    assert len(annots) == 10
    report = validate_corpus(golden)
    assert report.ok, report.violations
    assert report.records_checked == 10


def test_validate_subcommand_exit_codes(golden, tmp_path):
    ok = run_cli(["validate", "--root", str(golden)])
    assert ok.exit_code == 0, ok.output
    # corrupt a copy
    import shutil

    broken = tmp_path / "broken"
    shutil.copytree(golden, broken)
    victim = next((broken / "annots").rglob("*.json"))
    obj = json.loads(victim.read_text())
    obj["words"][0]["char_indices"] = [9999]
    victim.write_text(json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n")
    bad = run_cli(["validate", "--root", str(broken)])
    assert bad.exit_code == 1
    assert "dangling_index" in bad.output


def test_build_deterministic_under_same_seed(tmp_path, font_dir):
    a = build_corpus(tmp_path, font_dir, "a", seed=42)
    b = build_corpus(tmp_path, font_dir, "b", seed=42)
    assert corpus_annots(a) == corpus_annots(b)
    ma, mb = manifest_lines(a), manifest_lines(b)
    assert ma == mb  # identical modulo the dropped timestamps field
    hashes_a = sorted(e["pixel_sha256"] for e in ma if e.get("kind") == "record")
    hashes_b = sorted(e["pixel_sha256"] for e in mb if e.get("kind") == "record")
    assert hashes_a == hashes_b


def test_build_workers_do_not_change_output(tmp_path, font_dir):
    serial = build_corpus(tmp_path, font_dir, "serial", seed=7, workers=1)
    parallel = build_corpus(tmp_path, font_dir, "parallel", seed=7, workers=4)
    assert corpus_annots(serial) == corpus_annots(parallel)


def test_viz_four_levels(golden, tmp_path):
    record = next((golden / "annots").rglob("*.json"))
    for level in ("char", "word", "line", "paragraph"):
        out = tmp_path / f"{level}.png"
        result = run_cli(["viz", "--record", str(record), "--level", level, "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert out.exists()


def test_viz_rejects_unknown_colormap(golden, tmp_path):
    record = next((golden / "annots").rglob("*.json"))
    result = run_cli(
        ["viz", "--record", str(record), "--level", "word", "--colormap", "nope", "--out", str(tmp_path / "x.png")]
    )
    assert result.exit_code == 2


def test_invalid_enum_usage_error():
    result = run_cli(["build", "--input", str(FIXTURE_HTML), "--out", "/tmp/x", "--image-format", "bmp"])
    assert result.exit_code == 2


def test_fonts_index_subcommand(font_dir, tmp_path):
    cache = tmp_path / "cache.json"
    result = run_cli(["fonts", "index", "--fonts", str(font_dir), "--cache", str(cache)])
    assert result.exit_code == 0, result.output
    assert "FixtureBox" in result.output
    assert cache.exists()


def test_analyze_from_built_corpus(golden, tmp_path):
    out = tmp_path / "analysis"
    result = run_cli(
        [
            "analyze",
            "--corpus", f"golden={golden}",
            "--corpus", f"again={golden}",
            "--vocab-cap", "200",
            "--components", "3",
            "--out", str(out),
        ]
    )
    assert result.exit_code == 0, result.output
    csvs = list(out.glob("pca_*_*.csv"))
    assert len(csvs) == 2 * 2  # 2 pairs x 2 corpus tags
    assert (out / "pca_model.json").exists()


def test_config_precedence_flag_env_file(tmp_path):
    # Corpus of text files so analyze runs without a build.
    corpus = tmp_path / "texts"
    corpus.mkdir()
    base = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa"]
    for i in range(5):
        doc = " ".join(w for j, w in enumerate(base) for _ in range((i + j) % 4 + 1))
        (corpus / f"d{i}.txt").write_text(doc)
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('[analyze]\nvocab_cap = 3\ncomponents = 2\n')

    def vocab_size(out_dir, extra_args=(), env=None):
        result = run_cli(
            [
                "--config", str(cfg),
                "analyze",
                "--corpus", f"t={corpus}",
                "--out", str(out_dir),
                "--components", "2",
                *extra_args,
            ],
            env=env,
        )
        assert result.exit_code == 0, result.output
        return len(json.loads((out_dir / "vocabulary.json").read_text())["terms"])

    assert vocab_size(tmp_path / "o1") == 3  # file value
    assert vocab_size(tmp_path / "o2", env={"VICORPUS_ANALYZE_VOCAB_CAP": "5"}) == 5  # env beats file
    assert (
        vocab_size(tmp_path / "o3", extra_args=("--vocab-cap", "7"), env={"VICORPUS_ANALYZE_VOCAB_CAP": "5"}) == 7
    )  # flag beats env


def test_help_lists_spec_flags():
    result = run_cli(["build", "--help"])
    for flag in (
        "--input",
        "--input-format",
        "--html-field",
        "--id-field",
        "--lang",
        "--shard",
        "--limit",
        "--strict",
        "--out",
        "--shard-size",
        "--image-format",
        "--browser-bin",
        "--port-base",
        "--workers",
        "--seed",
        "--max-errors",
        "--jpeg-quality",
    ):
        assert flag in result.output, flag
    top = run_cli(["--help"])
    for sub in ("build", "analyze", "viz", "validate", "fonts"):
        assert sub in top.output


def test_ndjson_build_with_shard(tmp_path, font_dir):
    dump = tmp_path / "dump.ndjson"
    rows = [
        {"identifier": f"art-{i}", "article_body": {"html": f"<html><body><p>article {i} text body</p></body></html>"}}
        for i in range(6)
    ]
    dump.write_text("\n".join(json.dumps(r) for r in rows))
    out = tmp_path / "ndjson-corpus"
    result = run_cli(
        [
            "build",
            "--input", str(dump),
            "--input-format", "ndjson",
            "--out", str(out),
            "--fonts", str(font_dir),
            "--seed", "1",
            "--shard", "0/2",
            "--viewport-width", "640",
        ]
    )
    assert result.exit_code == 0, result.output
    annots = corpus_annots(out)
    assert sorted(annots) == ["art-0.json", "art-2.json", "art-4.json"]
