#!/usr/bin/env python3
"""Distribution-comparison experiment at desk scale: four synthetic corpora
with distinct topic mixes, projected onto consecutive principal-component
pairs (the 9-row x 4-column panel grid), with scatter SVGs.

Usage: python scripts/run_pca_panels.py [OUT_DIR] [--docs N] [--vocab-cap N]
"""

import argparse
import random
import sys
from pathlib import Path

from vicorpus.analysis import analyze_corpora

TOPICS = {
    "web": "page link article section reference edit history view source note citation style",
    "scans": "form invoice total amount date signature account number copy receipt stamp line",
    "questions": "what where when which answer figure value title label count year percent",
    "charts": "axis legend series bar percent year growth rate trend data point scale",
}
SHARED = "the quick common words appear everywhere with varying rates and noise".split()


def synth_corpora(docs_per_corpus: int, seed: int = 7):
    gen = random.Random(seed)
    corpora = {}
    for tag, line in TOPICS.items():
        vocab = line.split()
        docs = []
        for i in range(docs_per_corpus):
            words = gen.choices(vocab, k=60) + gen.choices(SHARED, k=25)
            words += [f"{tag}{gen.randrange(80)}" for _ in range(12)]
            docs.append((f"{tag}-{i}", " ".join(words)))
        corpora[tag] = docs
    return corpora


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("out", nargs="?", default="out/pca-panels")
    parser.add_argument("--docs", type=int, default=200)
    parser.add_argument("--vocab-cap", type=int, default=2000)
    parser.add_argument("--components", type=int, default=10)
    args = parser.parse_args()

    corpora = synth_corpora(args.docs)
    model, paths = analyze_corpora(
        corpora,
        vocab_cap=args.vocab_cap,
        k=args.components,
        out_dir=Path(args.out),
        write_svg=True,
    )
    print(f"wrote {len(paths)} files to {args.out}")
    print("explained variance:", ", ".join(f"{v:.4g}" for v in model.explained_variance))
    return 0


if __name__ == "__main__":
    sys.exit(main())
