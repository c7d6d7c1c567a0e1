"""Corpus distribution analysis: vocabulary, bag-of-words vectors, PCA, and
2-D projections for consecutive component pairs across multiple corpora.

The PCA fit is a matrix-free subspace iteration over the implicitly centered
sparse count matrix, so a 100k-dimensional vocabulary never materializes a
dense covariance. It is deterministic: fixed init seed, fixed convergence
schedule, and a sign convention (largest-magnitude entry positive).
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_INIT_SEED = 0
_MAX_ITERS = 2000
_RITZ_TOL = 1e-14


class AnalysisError(Exception):
    pass


class PcaRankError(AnalysisError):
    """Requested more components than the data can structurally support."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics (underscore counts as a split)."""
    return TOKEN_RE.findall(text.lower())


def load_stopwords(path: Path | str | None = None) -> frozenset[str]:
    """Vendored English stop-word list by default; one word per line, # comments."""
    if path is None:
        raw = resources.files("vicorpus").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    return frozenset(
        w.strip().lower() for w in raw.splitlines() if w.strip() and not w.startswith("#")
    )


@dataclass
class Vocabulary:
    terms: list[str]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise AnalysisError("vocabulary has duplicate terms")

    def __len__(self) -> int:
        return len(self.terms)

    def to_json(self) -> str:
        return json.dumps({"terms": self.terms}, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        return cls(terms=json.loads(text)["terms"])


def build_vocab(tokens: Iterable[str], cap: int, stopwords: frozenset[str]) -> Vocabulary:
    """Top-``cap`` terms by frequency, ties broken lexicographically."""
    counts = Counter(t for t in tokens if t not in stopwords)
    if not counts:
        raise AnalysisError("no tokens left after stop-word filtering")
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(terms=[t for t, _ in ordered[:cap]])


@dataclass(frozen=True)
class BowVector:
    """Sparse term counts for one document; indices strictly increasing."""

    indices: tuple[int, ...]
    counts: tuple[int, ...]
    corpus_tag: str
    doc_id: str

    def __post_init__(self):
        if len(self.indices) != len(self.counts):
            raise AnalysisError("indices/counts length mismatch")
        if any(c <= 0 for c in self.counts):
            raise AnalysisError("counts must be positive")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise AnalysisError("indices must be strictly increasing")


def vectorize(text: str, vocab: Vocabulary, corpus_tag: str = "", doc_id: str = "") -> BowVector:
    counts: Counter[int] = Counter()
    for tok in tokenize(text):
        idx = vocab.index.get(tok)
        if idx is not None:
            counts[idx] += 1
    items = sorted(counts.items())
    return BowVector(
        indices=tuple(i for i, _ in items),
        counts=tuple(c for _, c in items),
        corpus_tag=corpus_tag,
        doc_id=doc_id,
    )


def to_csr(vectors: Sequence[BowVector], dim: int) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for v in vectors:
        indices.extend(v.indices)
        data.extend(v.counts)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices), np.asarray(indptr)),
        shape=(len(vectors), dim),
    )


@dataclass
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def to_json_obj(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PcaModel":
        return cls(
            mean=np.asarray(obj["mean"], dtype=np.float64),
            components=np.asarray(obj["components"], dtype=np.float64),
            explained_variance=np.asarray(obj["explained_variance"], dtype=np.float64),
        )


def fit_pca(
    vectors: Sequence[BowVector],
    k: int,
    dim: int,
    allow_degenerate: bool = False,
) -> PcaModel:
    """Principal components of the sample covariance (ddof=1) of the vectors.

    Matrix-free subspace iteration with oversampling; eigenvalues refined by a
    k-dimensional Rayleigh-Ritz step. Raises PcaRankError when k exceeds
    min(dim, n-1); all-zero centered data raises unless allow_degenerate.
    """
    n = len(vectors)
    if n < k + 1:
        raise PcaRankError(f"need at least k+1={k + 1} vectors, got {n}")
    if k < 1:
        raise AnalysisError("k must be >= 1")
    max_rank = min(dim, n - 1)
    if k > max_rank:
        raise PcaRankError(f"k={k} exceeds structural rank bound min(dim={dim}, n-1={n - 1})={max_rank}")

    x = to_csr(vectors, dim)
    mu = np.asarray(x.mean(axis=0)).ravel()
    denom = n - 1

    total_var = (x.data @ x.data - n * (mu @ mu)) / denom
    if total_var <= 1e-12 * max(1.0, (x.data @ x.data) / denom):
        if not allow_degenerate:
            raise PcaRankError("centered data is identically zero (all vectors equal)")
        rng = np.random.default_rng(_INIT_SEED)
        q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
        return PcaModel(mean=mu, components=q.T.copy(), explained_variance=np.zeros(k))

    def cov_apply(v: np.ndarray) -> np.ndarray:
        # (Xc^T Xc v) / (n-1) without materializing Xc
        y = x @ v - np.outer(np.ones(n), mu @ v)
        return (x.T @ y - np.outer(mu, y.sum(axis=0))) / denom

    p = min(dim, k + 5)
    rng = np.random.default_rng(_INIT_SEED)
    v, _ = np.linalg.qr(rng.standard_normal((dim, p)))
    prev_ritz = None
    for it in range(_MAX_ITERS):
        w = cov_apply(v)
        v, _ = np.linalg.qr(w)
        if it % 5 == 4 or it == _MAX_ITERS - 1:
            b = v.T @ cov_apply(v)
            ritz = np.sort(np.linalg.eigvalsh(b))[::-1][:k]
            if prev_ritz is not None:
                scale = max(ritz[0], 1e-30)
                if np.max(np.abs(ritz - prev_ritz)) <= _RITZ_TOL * scale:
                    break
            prev_ritz = ritz

    b = v.T @ cov_apply(v)
    b = (b + b.T) / 2.0
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1][:k]
    components = (v @ evecs[:, order]).T
    variance = np.maximum(evals[order], 0.0)

    # Sign convention: the largest-magnitude entry of each component is positive.
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PcaModel(mean=mu, components=components, explained_variance=variance)


def project(model: PcaModel, vectors: Sequence[BowVector]) -> np.ndarray:
    """(n, k) coordinates of the vectors in component space."""
    dim = model.components.shape[1]
    x = to_csr(vectors, dim)
    return np.asarray(x @ model.components.T) - model.mean @ model.components.T


def consecutive_pairs(k: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(k - 1)]


def project_pairs(
    model: PcaModel,
    vectors: Sequence[BowVector],
    pairs: Sequence[tuple[int, int]],
    out_dir: Path | str,
    write_svg: bool = False,
) -> list[Path]:
    """Per (component pair, corpus tag): a CSV of (doc_id, x, y) scatter rows.

    File name pattern: pca_<i>_<j>_<tag>.csv (plus .svg when requested).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coords = project(model, vectors)
    tags: list[str] = []
    for v in vectors:
        if v.corpus_tag not in tags:
            tags.append(v.corpus_tag)
    written: list[Path] = []
    for i, j in pairs:
        if j >= model.k:
            raise AnalysisError(f"pair ({i},{j}) exceeds fitted components k={model.k}")
        for tag in tags:
            rows = [
                (v.doc_id, coords[vi, i], coords[vi, j])
                for vi, v in enumerate(vectors)
                if v.corpus_tag == tag
            ]
            path = out_dir / f"pca_{i}_{j}_{tag}.csv"
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write("doc_id,x,y\n")
                for doc_id, xv, yv in rows:
                    f.write(f"{doc_id},{xv:.12g},{yv:.12g}\n")
            written.append(path)
            if write_svg:
                svg_path = path.with_suffix(".svg")
                svg_path.write_text(
                    scatter_svg([(xv, yv) for _, xv, yv in rows], f"PC{i} vs PC{j} [{tag}]"),
                    "utf-8",
                )
                written.append(svg_path)
    return written


def scatter_svg(points: list[tuple[float, float]], title: str, size: int = 360) -> str:
    """Minimal dependency-free scatter plot, byte-stable for identical input."""
    pad = 28
    if points:
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    sx = (size - 2 * pad) / ((x1 - x0) or 1.0)
    sy = (size - 2 * pad) / ((y1 - y0) or 1.0)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{size // 2}" y="16" font-size="11" text-anchor="middle" font-family="sans-serif">{title}</text>',
    ]
    for x, y in points:
        cx = pad + (x - x0) * sx
        cy = size - pad - (y - y0) * sy
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2" fill="#1f6fb4" fill-opacity="0.6"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def analyze_corpora(
    corpora: dict[str, list[tuple[str, str]]],
    vocab_cap: int,
    k: int,
    out_dir: Path | str,
    stopwords: frozenset[str] | None = None,
    samples_per_corpus: int | None = None,
    write_svg: bool = False,
) -> tuple[PcaModel, list[Path]]:
    """End-to-end distribution comparison over named corpora.

    ``corpora`` maps tag -> list of (doc_id, text). The vocabulary is built
    over all corpora jointly; one PCA model is fit on the pooled vectors; the
    consecutive-pair scatter tables are written per corpus tag.
    """
    stopwords = stopwords if stopwords is not None else load_stopwords()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def doc_iter() -> Iterable[tuple[str, str, str]]:
        for tag in sorted(corpora):
            docs = corpora[tag]
            if samples_per_corpus is not None:
                docs = docs[:samples_per_corpus]
            for doc_id, text in docs:
                yield tag, doc_id, text

    def all_tokens() -> Iterable[str]:
        for _, _, text in doc_iter():
            yield from tokenize(text)

    vocab = build_vocab(all_tokens(), vocab_cap, stopwords)
    vectors = [vectorize(text, vocab, tag, doc_id) for tag, doc_id, text in doc_iter()]
    model = fit_pca(vectors, k, dim=len(vocab))
    paths = project_pairs(model, vectors, consecutive_pairs(k), out_dir, write_svg=write_svg)
    (out_dir / "pca_model.json").write_text(
        json.dumps(model.to_json_obj(), sort_keys=True) + "\n", "utf-8"
    )
    (out_dir / "vocabulary.json").write_text(vocab.to_json() + "\n", "utf-8")
    return model, paths
