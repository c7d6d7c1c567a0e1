import copy
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vicorpus.annotate import (
    Quad,
    build_annotations,
    build_chars,
    group_lines,
    reading_order,
    union_all,
)
from vicorpus.report import CharRecord, InstrumentationReport, Rect, RegionRecord

from oracles import (
    oracle_connected_component_lines,
    oracle_group_lines,
    oracle_group_words,
    oracle_latex_merge,
)
from synth import make_report


def chars_from_row(text, x0=10.0, y=10.0, w=8.0, h=16.0, gap=0.0, para=(0, 1, 0), seq0=0):
    """One visual row of fixed-advance records; spaces become whitespace records."""
    key = "/".join(str(i) for i in para)
    out = []
    x = x0
    for i, ch in enumerate(text):
        out.append(
            CharRecord(
                text=ch,
                rect=Rect(x, y, w, h),
                node_path=para + (seq0 + i,),
                dom_depth=len(para) + 1,
                seq=seq0 + i,
                font_family="FixtureBox",
                font_size_px=h,
                is_whitespace=ch.isspace(),
                paragraph_key=key,
            )
        )
        x += w + gap
    return out


def report_of(chars, regions=(), w=800, h=600):
    return InstrumentationReport(page_width=w, page_height=h, chars=list(chars), regions=list(regions))


# -- quads -------------------------------------------------------------------


def test_quad_flat_round_trip():
    q = Quad(1, 2, 5, 9)
    assert q.to_flat() == [1, 2, 5, 2, 5, 9, 1, 9]
    assert Quad.from_flat(q.to_flat()) == q
    with pytest.raises(ValueError):
        Quad.from_flat([0, 0, 1, 1, 1, 1, 0, 0])  # not axis-aligned corners


def test_quad_union_contains():
    a, b = Quad(0, 0, 2, 2), Quad(1, 1, 5, 3)
    u = a.union(b)
    assert u == Quad(0, 0, 5, 3)
    assert u.contains(a) and u.contains(b)
    assert not a.contains(b)


# -- words -------------------------------------------------------------------


def test_hi_there_splits_on_whitespace():
    rep = report_of(chars_from_row("Hi there"))
    annset = build_annotations(rep)
    assert [w.text for w in annset.words] == ["Hi", "there"]


def test_single_char_page_one_word():
    rep = report_of(chars_from_row("x"))
    annset = build_annotations(rep)
    assert len(annset.words) == 1
    assert annset.words[0].char_indices == [0]
    assert annset.words[0].quad == annset.chars[0].loose_quad


def test_geometric_gap_splits_without_whitespace():
    # 3x-median gap mid-sequence, no whitespace records at all.
    chars = chars_from_row("abc")
    shifted = []
    for i, c in enumerate(chars_from_row("def", x0=chars[-1].rect.x1 + 3 * 8.0, seq0=3)):
        shifted.append(c)
    rep = report_of(chars + shifted)
    annset = build_annotations(rep)
    assert [w.text for w in annset.words] == ["abc", "def"]


def test_word_breaks_at_line_change_even_without_whitespace():
    row1 = chars_from_row("ab")
    row2 = chars_from_row("cd", y=40.0, seq0=2)
    annset = build_annotations(report_of(row1 + row2))
    assert [w.text for w in annset.words] == ["ab", "cd"]
    assert len(annset.lines) == 2


# -- lines ---------------------------------------------------------------


def test_one_visual_row_is_one_line():
    rep = report_of(chars_from_row("hello"))
    ids = group_lines([c for c in rep.chars if not c.is_whitespace])
    assert set(ids) == {0}


def test_two_stacked_rows_two_lines():
    rows = chars_from_row("aa") + chars_from_row("bb", y=100.0, seq0=2)
    ids = group_lines(rows)
    assert ids == [0, 0, 1, 1]


def test_jittered_rows_match_transitive_overlap_oracle():
    rng = random.Random(1234)
    for _ in range(50):
        rows = []
        seq = 0
        for r in range(2):
            y = 10.0 + r * 40.0
            x = 10.0
            for _ in range(rng.randint(2, 8)):
                h = 16.0
                rows.append(
                    CharRecord(
                        text="x",
                        rect=Rect(x, y + rng.uniform(-2, 2), 8.0, h),
                        node_path=(0, 1, 0, seq),
                        dom_depth=4,
                        seq=seq,
                        font_family="F",
                        font_size_px=16.0,
                        is_whitespace=False,
                        paragraph_key="0/1/0",
                    )
                )
                seq += 1
                x += 9.0
        greedy = group_lines(rows)
        components = oracle_connected_component_lines(rows)
        assert greedy == components


# -- paragraphs ----------------------------------------------------------


def test_two_p_elements_two_paragraphs():
    p0 = chars_from_row("aa", para=(0, 1, 0))
    p1 = chars_from_row("bb", y=60.0, para=(0, 1, 1), seq0=2)
    annset = build_annotations(report_of(p0 + p1))
    assert len(annset.paragraphs) == 2
    assert annset.paragraphs[0].dom_depth == 3
    assert [p.line_indices for p in annset.paragraphs] == [[0], [1]]


def test_single_paragraph_page_collects_all_lines():
    rows = chars_from_row("aaa") + chars_from_row("bbb", y=40.0, seq0=3)
    annset = build_annotations(report_of(rows))
    assert len(annset.paragraphs) == 1
    assert annset.paragraphs[0].line_indices == [0, 1]


def test_list_items_form_one_paragraph_per_item():
    items = []
    for i in range(3):
        items += chars_from_row("it", y=10.0 + 30 * i, para=(0, 1, 2, i), seq0=10 * i)
    annset = build_annotations(report_of(items))
    assert len(annset.paragraphs) == 3
    assert all(p.dom_depth == 4 for p in annset.paragraphs)


# -- latex regions ---------------------------------------------------------


def test_latex_region_absorbs_overlapping_word():
    chars = chars_from_row("E=mc2")
    quad = union_all([Quad.from_rect(c.rect) for c in chars])
    region = RegionRecord(
        rect=Rect(quad.x0 - 2, quad.y0 - 2, quad.width + 4, quad.height + 4),
        kind="latex",
        node_path=(0, 1, 0, 99),
        seq=len(chars),
        paragraph_key="0/1/0",
    )
    annset = build_annotations(report_of(chars, [region]))
    latex_words = [w for w in annset.words if w.is_latex]
    assert len(latex_words) == 1
    assert latex_words[0].text == "E=mc2"
    assert len(annset.words) == 1
    # word quad covers the region and the member chars
    for c in annset.chars:
        assert latex_words[0].quad.contains(c.loose_quad)
    assert len(annset.regions) == 1 and annset.regions[0].kind == "latex"


def test_bare_latex_region_becomes_empty_word():
    chars = chars_from_row("text")
    region = RegionRecord(
        rect=Rect(400, 10, 60, 18),
        kind="latex",
        node_path=(0, 1, 0, 99),
        seq=len(chars),
        paragraph_key="0/1/0",
    )
    annset = build_annotations(report_of(chars, [region]))
    latex_words = [w for w in annset.words if w.is_latex]
    assert len(latex_words) == 1
    assert latex_words[0].char_indices == []
    # it must still live in exactly one line of the hierarchy
    holders = [l for l in annset.lines if annset.words.index(latex_words[0]) in l.word_indices]
    assert len(holders) == 1


def test_image_regions_do_not_become_words():
    chars = chars_from_row("pic")
    region = RegionRecord(
        rect=Rect(300, 10, 100, 80),
        kind="image",
        node_path=(0, 1, 1),
        seq=len(chars),
        paragraph_key="0/1/1",
    )
    annset = build_annotations(report_of(chars, [region]))
    assert all(not w.is_latex for w in annset.words)
    assert [r.kind for r in annset.regions] == ["image"]


# -- build_chars -------------------------------------------------------------


def test_full_box_ratio_tight_equals_loose(catalog):
    chars = chars_from_row("AA")
    anns, fallbacks = build_chars(report_of(chars), catalog)
    assert fallbacks == 0
    for a in anns:
        assert a.tight
        assert a.quad == a.loose_quad  # 'A' has the identity ratio


def test_unknown_family_all_loose_counted(catalog):
    chars = [
        CharRecord(
            text="a",
            rect=Rect(10 + i * 10, 10, 8, 16),
            node_path=(0, 1, 0, i),
            dom_depth=4,
            seq=i,
            font_family="NoSuchFamily",
            font_size_px=16,
            is_whitespace=False,
            paragraph_key="0/1/0",
        )
        for i in range(4)
    ]
    anns, fallbacks = build_chars(report_of(chars), catalog)
    assert fallbacks == len(anns) == 4
    assert all(not a.tight and a.quad == a.loose_quad for a in anns)


def test_narrow_glyph_quad_narrower_by_ratio(catalog):
    chars = chars_from_row("I", w=10.0, h=20.0)
    anns, _ = build_chars(report_of(chars), catalog)
    a = anns[0]
    assert a.tight
    # 'I' ratio is (0.4, 0.6, 0.0, 0.8) against the loose 10x20 box
    assert a.quad.width == pytest.approx(2.0)
    assert a.quad.height == pytest.approx(16.0)
    assert a.quad.x0 == pytest.approx(a.loose_quad.x0 + 4.0)


# -- reading order and determinism -------------------------------------------


def test_word_order_strictly_increasing_first_seq():
    rep = make_report(random.Random(5), with_regions=False)
    annset = build_annotations(rep)
    firsts = [annset.chars[w.char_indices[0]].seq for w in annset.words if w.char_indices]
    assert firsts == sorted(firsts)
    assert all(a < b for a, b in zip(firsts, firsts[1:]))


def test_reading_order_restores_shuffled_annotations():
    rep = make_report(random.Random(6))
    annset = build_annotations(rep)
    shuffled = copy.deepcopy(annset)
    rng = random.Random(0)
    perm = list(range(len(shuffled.chars)))
    rng.shuffle(perm)
    shuffled.chars = [shuffled.chars[i] for i in perm]
    inverse = {old: new for new, old in enumerate(perm)}
    for w in shuffled.words:
        w.char_indices = [inverse[i] for i in w.char_indices]
    rng.shuffle(shuffled.words)  # also shuffle words; lines reference words
    # rebuild line word_indices against the shuffled word list
    # (simulate a consumer that lost ordering)
    old_to_new = {}
    for new_i, w in enumerate(shuffled.words):
        old_to_new[id(w)] = new_i
    reading_order(shuffled)
    assert [c.seq for c in shuffled.chars] == [c.seq for c in annset.chars]
    assert [w.text for w in shuffled.words] == [w.text for w in annset.words]


def test_empty_report_all_lists_empty():
    annset = build_annotations(report_of([]))
    assert annset.chars == [] and annset.words == []
    assert annset.lines == [] and annset.paragraphs == []


def test_builder_is_pure(catalog):
    rep = make_report(random.Random(7), with_regions=True)
    a = build_annotations(rep, catalog)
    b = build_annotations(rep, catalog)
    assert a == b


# -- oracle equivalence and global invariants ---------------------------------


def assert_hierarchy_invariants(annset):
    # partition: every char in exactly one word, word in one line, line in one para
    seen_chars = [i for w in annset.words for i in w.char_indices]
    assert sorted(seen_chars) == list(range(len(annset.chars)))
    seen_words = [i for l in annset.lines for i in l.word_indices]
    assert sorted(seen_words) == list(range(len(annset.words)))
    seen_lines = [i for p in annset.paragraphs for i in p.line_indices]
    assert sorted(seen_lines) == list(range(len(annset.lines)))
    # containment chain on loose geometry
    for li, line in enumerate(annset.lines):
        for wi in line.word_indices:
            word = annset.words[wi]
            assert line.quad.contains(word.quad), (li, wi)
            for ci in word.char_indices:
                assert word.quad.contains(annset.chars[ci].loose_quad)
    for para in annset.paragraphs:
        for li in para.line_indices:
            assert para.quad.contains(annset.lines[li].quad)


@pytest.mark.parametrize("seed", range(40))
def test_grouping_matches_oracle_on_synthetic_reports(seed):
    rep = make_report(random.Random(seed), with_regions=(seed % 3 == 0))
    non_ws = [c for c in rep.chars if not c.is_whitespace]
    ws_seqs = [c.seq for c in rep.chars if c.is_whitespace]

    got_lines = group_lines(non_ws)
    assert got_lines == oracle_group_lines(non_ws)

    annset = build_annotations(rep)
    exp_words = oracle_latex_merge(
        oracle_group_words(non_ws, got_lines, ws_seqs),
        [(c.rect.x, c.rect.y, c.rect.w, c.rect.h) for c in non_ws],
        rep.regions,
    )
    exp_words.sort(
        key=lambda w: min(
            [non_ws[i].seq for i in w["members"]] + ([w["region_seq"]] if w["region_seq"] is not None else [])
        )
    )
    assert len(annset.words) == len(exp_words)
    for got, exp in zip(annset.words, exp_words):
        assert got.char_indices == exp["members"]
        assert got.is_latex == exp["is_latex"]
    assert_hierarchy_invariants(annset)


def test_text_preservation_per_paragraph():
    text = "The quick brown fox"
    rep = report_of(chars_from_row(text))
    annset = build_annotations(rep)
    joined = " ".join(w.text for w in annset.words)
    assert joined == text
