#!/usr/bin/env python3
"""Build a small demo corpus from the bundled HTML fixtures using the stub
browser, then render the four overlay panels for one record.

Usage: python scripts/build_demo_corpus.py [OUT_DIR]
"""

import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "tests"))


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else REPO / "out" / "demo"
    fonts = out / "_fonts"
    from fixture_fonts import build_all  # noqa: E402 (fontTools, dev dependency)

    build_all(fonts)
    corpus = out / "corpus"
    cmd = [
        sys.executable, "-m", "vicorpus.cli", "build",
        "--input", str(REPO / "tests" / "fixtures" / "html"),
        "--out", str(corpus),
        "--fonts", str(fonts),
        "--seed", "42",
        "--viewport-width", "640",
        "--browser-bin", "stub",
    ]
    subprocess.run(cmd, check=True)
    subprocess.run([sys.executable, "-m", "vicorpus.cli", "validate", "--root", str(corpus)], check=True)

    record = sorted((corpus / "annots").rglob("*.json"))[7]  # multi-paragraph fixture
    for level in ("char", "word", "line", "paragraph"):
        subprocess.run(
            [
                sys.executable, "-m", "vicorpus.cli", "viz",
                "--record", str(record),
                "--level", level,
                "--out", str(out / f"overlay_{level}.png"),
            ],
            check=True,
        )
    print(f"demo corpus + overlays under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
