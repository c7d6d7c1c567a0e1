"""Brute-force reference implementations of the grouping rules, written
directly from their prose definitions and kept independent of vicorpus
internals. Used to cross-check annotate.py exactly.
"""

from __future__ import annotations

import statistics


def oracle_group_lines(chars) -> list[int]:
    """Greedy clustering, re-derived step by step from the rule text.

    A char joins the current line iff it has the same paragraph key and the
    vertical overlap of its rect with the line's running union rect is at
    least half the smaller of the two heights.
    """
    ids = []
    lines = []  # list of dicts: {key, y0, y1}
    for rec in chars:
        placed = False
        if lines:
            line = lines[-1]
            if rec.paragraph_key == line["key"]:
                top = max(rec.rect.y, line["y0"])
                bottom = min(rec.rect.y + rec.rect.h, line["y1"])
                overlap = bottom - top
                smaller = min(rec.rect.h, line["y1"] - line["y0"])
                if smaller > 0 and overlap / smaller >= 0.5:
                    placed = True
        if placed:
            line["y0"] = min(line["y0"], rec.rect.y)
            line["y1"] = max(line["y1"], rec.rect.y + rec.rect.h)
        else:
            lines.append({"key": rec.paragraph_key, "y0": rec.rect.y, "y1": rec.rect.y + rec.rect.h})
        ids.append(len(lines) - 1)
    return ids


def oracle_connected_component_lines(chars) -> list[int]:
    """Alternative oracle: transitive closure of pairwise >= 0.5 vertical overlap
    within the same paragraph key. Agrees with the greedy rule on layouts whose
    rows are cleanly separated (no bridging chars)."""
    n = len(chars)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        parent[find(a)] = find(b)

    for i in range(n):
        for j in range(i + 1, n):
            a, b = chars[i], chars[j]
            if a.paragraph_key != b.paragraph_key:
                continue
            overlap = min(a.rect.y + a.rect.h, b.rect.y + b.rect.h) - max(a.rect.y, b.rect.y)
            smaller = min(a.rect.h, b.rect.h)
            if smaller > 0 and overlap / smaller >= 0.5:
                union(i, j)
    roots: dict[int, int] = {}
    ids = []
    for i in range(n):
        r = find(i)
        if r not in roots:
            roots[r] = len(roots)
        ids.append(roots[r])
    return ids


def oracle_group_words(chars, line_ids, ws_seqs, gap_factor=1.0) -> list[list[int]]:
    """Word member lists, re-derived from the break rules:

    break before char i when (a) a whitespace record sits between i-1 and i,
    (b) the line changed, or (c) the horizontal gap to the previous char
    exceeds gap_factor x the median loose width of the chars on that line.
    """
    if not chars:
        return []
    line_widths: dict[int, list[float]] = {}
    for rec, lid in zip(chars, line_ids):
        line_widths.setdefault(lid, []).append(rec.rect.w)
    medians = {lid: statistics.median(v) for lid, v in line_widths.items()}
    ws = sorted(ws_seqs)

    def whitespace_between(s0, s1):
        return any(s0 < s < s1 for s in ws)

    words = [[0]]
    for i in range(1, len(chars)):
        prev, cur = chars[i - 1], chars[i]
        split = (
            line_ids[i] != line_ids[i - 1]
            or whitespace_between(prev.seq, cur.seq)
            or (cur.rect.x - (prev.rect.x + prev.rect.w)) > gap_factor * medians[line_ids[i]]
        )
        if split:
            words.append([i])
        else:
            words[-1].append(i)
    return words


def oracle_latex_merge(words, char_rects, regions) -> list[dict]:
    """Words overlapping a latex region by >= 80% of their area merge into one
    word per region; regions with no overlapping words still yield one word."""

    def bbox(indices):
        xs0 = [char_rects[i][0] for i in indices]
        ys0 = [char_rects[i][1] for i in indices]
        xs1 = [char_rects[i][0] + char_rects[i][2] for i in indices]
        ys1 = [char_rects[i][1] + char_rects[i][3] for i in indices]
        return (min(xs0), min(ys0), max(xs1), max(ys1))

    def inter(a, b):
        w = min(a[2], b[2]) - max(a[0], b[0])
        h = min(a[3], b[3]) - max(a[1], b[1])
        return w * h if w > 0 and h > 0 else 0.0

    latex = [r for r in regions if r.kind == "latex"]
    out = []
    claimed: dict[int, list[int]] = {}
    for wi, members in enumerate(words):
        box = bbox(members)
        area = (box[2] - box[0]) * (box[3] - box[1])
        owner = None
        for ri, region in enumerate(latex):
            rbox = (region.rect.x, region.rect.y, region.rect.x1, region.rect.y1)
            if area > 0 and inter(box, rbox) >= 0.8 * area:
                owner = ri
                break
        if owner is None:
            out.append({"members": members, "is_latex": False, "region_seq": None})
        else:
            claimed.setdefault(owner, []).append(wi)
    for ri, region in enumerate(latex):
        members = sorted(i for wi in claimed.get(ri, []) for i in words[wi])
        out.append({"members": members, "is_latex": True, "region_seq": region.seq})
    return out
