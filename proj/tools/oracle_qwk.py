#!/usr/bin/env python3
"""Brute-force quadratic weighted kappa oracle.

Builds W, O and E elementwise with exact rational arithmetic, then converts
the result to float. Writes tests/fixtures/qwk_oracle.json.
"""
import argparse
import json
import random
from fractions import Fraction
from pathlib import Path

ASPECTS = ["interest", "mood", "sleep", "appetite", "fatigue", "self_esteem", "concentration", "moving"]


def qwk(y, y_hat, r):
    n = len(y)
    observed = [[0] * r for _ in range(r)]
    for a, b in zip(y, y_hat):
        observed[a][b] += 1
    hist_y = [sum(1 for v in y if v == s) for s in range(r)]
    hist_p = [sum(1 for v in y_hat if v == s) for s in range(r)]
    wo = Fraction(0)
    we = Fraction(0)
    for i in range(r):
        for j in range(r):
            w = Fraction((i - j) ** 2, (r - 1) ** 2)
            wo += w * observed[i][j]
            we += w * Fraction(hist_y[i] * hist_p[j], n)
    if we == 0:
        return 1.0
    return float(1 - wo / we)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests/fixtures/qwk_oracle.json"))
    args = ap.parse_args()
    rng = random.Random(args.seed)

    cases = [
        {"y": [0, 1, 2, 3], "y_hat": [0, 1, 2, 3], "R": 4},
        {"y": [0, 0, 0], "y_hat": [3, 3, 3], "R": 4},
        {"y": [0, 1, 2], "y_hat": [1, 1, 2], "R": 4},
        {"y": [2, 2, 2], "y_hat": [2, 2, 2], "R": 4},
        # item scores at the detection boundary, read as one sequence
        {"y": [2, 2, 2, 2, 1, 1, 0, 0], "y_hat": [2, 2, 2, 1, 1, 1, 0, 0], "R": 4},
    ]
    while len(cases) < 1000:
        r = rng.randint(2, 6)
        n = rng.randint(1, 40)
        y = [rng.randrange(r) for _ in range(n)]
        if rng.random() < 0.3:
            y_hat = [min(r - 1, max(0, v + rng.choice([-1, 0, 0, 1]))) for v in y]
        else:
            y_hat = [rng.randrange(r) for _ in range(n)]
        cases.append({"y": y, "y_hat": y_hat, "R": r})
    for c in cases:
        c["K"] = qwk(c["y"], c["y_hat"], c["R"])

    dialogues = []
    for k in range(200):
        gold = {a: rng.randrange(4) for a in ASPECTS}
        pred = {a: (gold[a] if rng.random() < 0.5 else rng.randrange(4)) for a in ASPECTS}
        dialogues.append({"id": f"eval-{k:03d}", "gold": gold, "pred": pred})
    per_aspect = {a: qwk([d["gold"][a] for d in dialogues], [d["pred"][a] for d in dialogues], 4) for a in ASPECTS}

    out = {"seed": args.seed, "cases": cases,
           "assessment": {"dialogues": dialogues, "qwk": per_aspect}}
    Path(args.out).write_text(json.dumps(out, indent=None, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
