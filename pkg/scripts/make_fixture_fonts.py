#!/usr/bin/env python3
"""Regenerate the fixture fonts (known outlines, hand-derivable glyph boxes)
into a directory, for use as a --fonts pool in demos and tests.

Usage: python scripts/make_fixture_fonts.py [OUT_DIR]
"""

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "tests"))


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else REPO / "out" / "fixture-fonts"
    from fixture_fonts import build_all  # noqa: E402

    paths = build_all(out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
