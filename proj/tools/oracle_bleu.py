#!/usr/bin/env python3
"""Standalone corpus BLEU oracle (orders 1 and 2).

Counts n-grams with plain dictionaries, one reference per candidate, clipped
counts, brevity penalty exp(1 - r/c) when c <= r, and precision floor
1 / (2c) for an order with zero matches. Writes tests/fixtures/bleu_oracle.json.
"""
import argparse
import json
import math
import random
from pathlib import Path


def ngrams(tokens, n):
    counts = {}
    for i in range(len(tokens) - n + 1):
        g = tuple(tokens[i:i + n])
        counts[g] = counts.get(g, 0) + 1
    return counts


def bleu(cands, refs, max_order):
    c = sum(len(x) for x in cands)
    r = sum(len(x) for x in refs)
    if c == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_order + 1):
        match = 0
        for cand, ref in zip(cands, refs):
            rc = ngrams(ref, n)
            for g, k in ngrams(cand, n).items():
                match += min(k, rc.get(g, 0))
        total = sum(max(0, len(x) - n + 1) for x in cands)
        p = match / total if match > 0 else 1.0 / (2.0 * c)
        log_sum += math.log(p)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / max_order)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=777)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests/fixtures/bleu_oracle.json"))
    args = ap.parse_args()
    rng = random.Random(args.seed)
    vocab = ["a", "b", "c", "d", "e", "f", "i", "feel", "."]

    corpora = [
        {"candidates": [["a", "b", "c"]], "references": [["a", "b", "d"]]},
        {"candidates": [["x", "y"]], "references": [["a", "b"]]},
        {"candidates": [["a", "b"], ["c"]], "references": [["a", "b"], ["c"]]},
    ]
    while len(corpora) < 500:
        m = rng.randint(1, 12)
        size = rng.randint(2, len(vocab))
        cands, refs = [], []
        for _ in range(m):
            ref = [rng.choice(vocab[:size]) for _ in range(rng.randint(0, 12))]
            if ref and rng.random() < 0.4:
                cand = [t if rng.random() < 0.8 else rng.choice(vocab) for t in ref]
            else:
                cand = [rng.choice(vocab[:size]) for _ in range(rng.randint(0, 12))]
            cands.append(cand)
            refs.append(ref)
        if sum(len(x) for x in cands) == 0:
            continue
        corpora.append({"candidates": cands, "references": refs})
    for c in corpora:
        c["bleu1"] = bleu(c["candidates"], c["references"], 1)
        c["bleu2"] = bleu(c["candidates"], c["references"], 2)
    out = {"seed": args.seed, "corpora": corpora}
    Path(args.out).write_text(json.dumps(out, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
