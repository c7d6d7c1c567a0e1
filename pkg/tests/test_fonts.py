import math
import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vicorpus.fonts import (
    FontCatalog,
    GlyphBoxRatio,
    NotCoveredError,
    ZeroAdvanceError,
    index_fonts,
    pick_family,
    tighten,
)
from vicorpus.fonts.catalog import IDENTITY_RATIO, compute_glyph_ratio
from vicorpus.fonts.sfnt import FontParseError, parse_font_file

from fixture_fonts import ASC, DESC, UPEM


# -- indexing ---------------------------------------------------------------


def test_index_skips_non_fonts(tmp_path, font_dir):
    work = tmp_path / "fonts"
    work.mkdir()
    for f in Path(font_dir).iterdir():
        (work / f.name).write_bytes(f.read_bytes())
    (work / "readme.ttf").write_text("this is not a font")
    catalog = index_fonts(work)
    assert sorted(catalog.families()) == ["FixtureBox", "FixtureCJK", "FixtureCurves"]


def test_index_empty_dir_fatal(tmp_path):
    with pytest.raises(FontParseError):
        index_fonts(tmp_path)


def test_index_cache_hit_is_byte_identical(tmp_path, font_dir):
    cache = tmp_path / "catalog.json"
    index_fonts(font_dir, cache_path=cache)
    first = cache.read_bytes()
    catalog = index_fonts(font_dir, cache_path=cache)
    assert cache.read_bytes() == first
    assert sorted(catalog.families()) == ["FixtureBox", "FixtureCJK", "FixtureCurves"]
    entry = catalog.entry_for("FixtureBox")
    assert entry.units_per_em == UPEM
    assert entry.ascender == ASC and entry.descender == DESC


def test_cached_and_uncached_ratios_identical(tmp_path, font_dir):
    cache = tmp_path / "catalog.json"
    fresh = index_fonts(font_dir)
    cached = index_fonts(font_dir, cache_path=cache)
    cached = index_fonts(font_dir, cache_path=cache)  # hit path, entries lazy-load fonts
    for family in fresh.families():
        e1, e2 = fresh.entry_for(family), cached.entry_for(family)
        for cp in sorted(e1.coverage)[:40]:
            try:
                r1 = fresh.glyph_ratio(e1, cp)
            except (NotCoveredError, ZeroAdvanceError) as exc:
                with pytest.raises(type(exc)):
                    cached.glyph_ratio(e2, cp)
                continue
            assert cached.glyph_ratio(e2, cp) == r1


# -- glyph ratios on the fixture font ---------------------------------------


def test_full_box_glyph_is_identity_ratio(catalog, box_entry):
    ratio = catalog.glyph_ratio(box_entry, ord("A"))
    assert ratio == IDENTITY_RATIO


def test_narrow_bar_ratio_matches_hand_derivation(catalog, box_entry):
    # 'I': outline (200,0)-(300,800), advance 500, asc 800, desc -200
    ratio = catalog.glyph_ratio(box_entry, ord("I"))
    assert math.isclose(ratio.rx0, 0.4)
    assert math.isclose(ratio.rx1, 0.6)
    assert math.isclose(ratio.ry0, 0.0)
    assert math.isclose(ratio.ry1, ASC / (ASC - DESC))


def test_space_has_empty_outline_marker(catalog, box_entry):
    assert catalog.glyph_ratio(box_entry, ord(" ")) is None


def test_overhang_ratio_goes_negative(catalog, box_entry):
    # 'J': xMin -50 over advance 500
    ratio = catalog.glyph_ratio(box_entry, ord("J"))
    assert math.isclose(ratio.rx0, -0.1)
    assert ratio.rx0 < 0 < ratio.rx1


def test_not_covered_and_zero_advance_errors(catalog, box_entry):
    with pytest.raises(NotCoveredError):
        catalog.glyph_ratio(box_entry, 0x4E00)
    with pytest.raises(ZeroAdvanceError):
        catalog.glyph_ratio(box_entry, 0x0308)  # combining mark, aw = 0


def test_composite_glyph_resolved_through_components(catalog, box_entry):
    # Adieresis = A(0,-200..600,800) + mark shifted (+150,+100): (250,920)-(450,1000)
    ratio = catalog.glyph_ratio(box_entry, 0x00C4)
    assert math.isclose(ratio.rx0, 0.0)
    assert math.isclose(ratio.rx1, 1.0)
    # yMax = 1000 > ascender, so ry0 < 0 (extends above the loose box)
    assert math.isclose(ratio.ry0, (ASC - 1000) / (ASC - DESC))
    assert math.isclose(ratio.ry1, 1.0)


def test_ratio_finite_and_ordered_forall_fixture_coverage(catalog):
    for family in catalog.families():
        entry = catalog.entry_for(family)
        for cp in sorted(entry.coverage):
            try:
                ratio = catalog.glyph_ratio(entry, cp)
            except ZeroAdvanceError:
                continue
            if ratio is None:
                continue
            assert ratio.rx0 < ratio.rx1, (family, hex(cp))
            assert ratio.ry0 < ratio.ry1, (family, hex(cp))


def test_tight_area_bound_over_fixture_fonts(catalog):
    # Overhang bound: tight box area <= 1.5x the loose box area at any size.
    for family in catalog.families():
        entry = catalog.entry_for(family)
        for cp in sorted(entry.coverage):
            try:
                ratio = catalog.glyph_ratio(entry, cp)
            except ZeroAdvanceError:
                continue
            if ratio is None:
                continue
            area = (ratio.rx1 - ratio.rx0) * (ratio.ry1 - ratio.ry0)
            assert area <= 1.5, (family, hex(cp), area)


# -- tighten ----------------------------------------------------------------


def test_tighten_identity_exact():
    rect = (3.25, 7.5, 11.0, 23.0)
    out, ok = tighten(rect, IDENTITY_RATIO)
    assert ok and out == rect


def test_tighten_arithmetic_example():
    out, ok = tighten((0.0, 0.0, 10.0, 20.0), GlyphBoxRatio(0.4, 0.6, 0.0, 0.8))
    assert ok
    assert out == pytest.approx((4.0, 0.0, 2.0, 16.0))


def test_tighten_overhang_extends_left():
    out, ok = tighten((10.0, 0.0, 10.0, 10.0), GlyphBoxRatio(-0.05, 0.5, 0.0, 1.0))
    assert ok
    assert math.isclose(out[0], 9.5)


def test_tighten_degenerate_keeps_loose():
    rect = (0.0, 0.0, 10.0, 10.0)

    class Flat:
        rx0, rx1, ry0, ry1 = 0.5, 0.5, 0.0, 1.0

    out, ok = tighten(rect, Flat())
    assert not ok and out == rect


@given(
    x=st.floats(-1000, 1000),
    y=st.floats(-1000, 1000),
    w=st.floats(0.01, 500),
    h=st.floats(0.01, 500),
)
def test_tighten_identity_property(x, y, w, h):
    out, ok = tighten((x, y, w, h), IDENTITY_RATIO)
    assert ok and out == (x, y, w, h)


def test_hand_derived_boxes_at_32px(catalog, box_entry):
    # Loose box at font-size 32: w = aw*32/upem, h = (asc-desc)*32/upem = 32.
    cases = {
        "A": (600, (0, -200, 600, 800)),
        "I": (500, (200, 0, 300, 800)),
        "J": (500, (-50, -100, 450, 700)),
        "g": (500, (50, -200, 450, 550)),
    }
    fs = 32.0
    for ch, (aw, (x0, y0, x1, y1)) in cases.items():
        loose_w = aw * fs / UPEM
        loose_h = (ASC - DESC) * fs / UPEM
        lx, ly = 100.0, 40.0
        ratio = catalog.glyph_ratio(box_entry, ord(ch))
        (tx, ty, tw, th), ok = tighten((lx, ly, loose_w, loose_h), ratio)
        assert ok
        exp_x = lx + x0 * fs / UPEM
        exp_w = (x1 - x0) * fs / UPEM
        exp_y = ly + (ASC - y1) * fs / UPEM
        exp_h = (y1 - y0) * fs / UPEM
        assert abs(tx - exp_x) <= 0.51 and abs(tw - exp_w) <= 0.51
        assert abs(ty - exp_y) <= 0.51 and abs(th - exp_h) <= 0.51


# -- pick_family -------------------------------------------------------------


def test_pick_family_deterministic_under_seed(catalog):
    a = pick_family("ab", catalog, random.Random(7))
    b = pick_family("ab", catalog, random.Random(7))
    assert a == b
    assert a in catalog.families()


def test_pick_family_coverage_restriction(catalog):
    # Only FixtureCJK covers the CJK sample text.
    from fixture_fonts import CJK_SAMPLE

    for seed in range(5):
        assert pick_family(CJK_SAMPLE, catalog, random.Random(seed)) == "FixtureCJK"


def test_pick_family_empty_text_gets_default(catalog):
    assert pick_family("", catalog, random.Random(0), default="FixtureBox") == "FixtureBox"


def test_pick_family_fallback_when_nothing_covers(catalog):
    got = pick_family("\U0001F600", catalog, random.Random(0), default="FixtureBox")
    assert got == "FixtureBox"


def test_families_covering_ignores_whitespace(catalog):
    from fixture_fonts import CJK_SAMPLE

    text = CJK_SAMPLE[0] + " \n\t"
    fams = catalog.families_covering({ord(c) for c in text})
    assert fams == ["FixtureCJK"]


# -- oracle cross-checks against fontTools -----------------------------------


def test_ratios_match_fonttools_oracle_on_real_fonts():
    matplotlib = pytest.importorskip("matplotlib")
    from fontTools.misc.arrayTools import calcBounds
    from fontTools.ttLib import TTFont

    fontdir = Path(matplotlib.get_data_path()) / "fonts" / "ttf"
    fp = fontdir / "DejaVuSans.ttf"
    mine = parse_font_file(fp)[0]
    ft = TTFont(str(fp))
    glyf = ft["glyf"]
    hmtx = ft["hmtx"]
    cmap = ft.getBestCmap()
    checked = 0
    for cp in sorted(cmap):
        if cp > 0x500 and cp % 13:
            continue
        gname = cmap[cp]
        gid = ft.getGlyphID(gname)
        coords, _, _ = glyf[gname].getCoordinates(glyf)
        aw = hmtx[gname][0]
        try:
            ratio = compute_glyph_ratio(mine, cp)
        except ZeroAdvanceError:
            assert aw == 0
            continue
        if ratio is None:
            assert len(coords) == 0
            continue
        x_min, y_min, x_max, y_max = calcBounds(coords)
        asc, desc = ft["hhea"].ascender, ft["hhea"].descender
        assert math.isclose(ratio.rx0, x_min / aw, abs_tol=1e-9)
        assert math.isclose(ratio.rx1, x_max / aw, abs_tol=1e-9)
        assert math.isclose(ratio.ry0, (asc - y_max) / (asc - desc), abs_tol=1e-9)
        assert math.isclose(ratio.ry1, (asc - y_min) / (asc - desc), abs_tol=1e-9)
        checked += 1
    assert checked > 500


def test_cff_bounds_match_fonttools_bounds_pen(font_dir):
    from fontTools.pens.boundsPen import BoundsPen
    from fontTools.ttLib import TTFont

    fp = Path(font_dir) / "FixtureCurves-Regular.otf"
    mine = parse_font_file(fp)[0]
    ft = TTFont(str(fp))
    glyph_set = ft.getGlyphSet()
    for ch in "OS":
        gid = mine.cmap[ord(ch)]
        got = mine.glyph_bbox(gid)
        pen = BoundsPen(glyph_set)
        glyph_set[ft.getBestCmap()[ord(ch)]].draw(pen)
        exp = pen.bounds
        assert got is not None
        for g, e in zip(got, exp):
            assert math.isclose(g, e, abs_tol=1e-6), (ch, got, exp)


def test_ttc_collections_are_parseable(tmp_path, font_dir):
    fontTools = pytest.importorskip("fontTools")
    from fontTools.ttLib import TTCollection, TTFont

    coll = TTCollection()
    coll.fonts = [
        TTFont(str(Path(font_dir) / "FixtureBox-Regular.ttf")),
        TTFont(str(Path(font_dir) / "FixtureCJK-Regular.ttf")),
    ]
    out = tmp_path / "pair.ttc"
    coll.save(str(out))
    faces = parse_font_file(out)
    assert [f.family for f in faces] == ["FixtureBox", "FixtureCJK"]
