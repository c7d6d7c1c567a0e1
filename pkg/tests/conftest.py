import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixture_fonts import build_all  # noqa: E402


@pytest.fixture(scope="session")
def font_dir(tmp_path_factory) -> Path:
    d = tmp_path_factory.mktemp("fixture-fonts")
    build_all(d)
    return d


@pytest.fixture(scope="session")
def catalog(font_dir):
    from vicorpus.fonts import index_fonts

    return index_fonts(font_dir)


@pytest.fixture(scope="session")
def box_entry(catalog):
    return catalog.entry_for("FixtureBox")
