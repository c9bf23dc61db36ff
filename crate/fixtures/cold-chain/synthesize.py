#!/usr/bin/env python3
"""Regenerate the twelve expert response files for the cold-chain fixture.

Each response is consistent on its own (V/A/X/O judgments agree with the
0-4 scores), the per-pair modal symbol equals tables/ssim.csv and the
per-cell mean equals tables/average.csv at three decimals (every cell of
that table is a multiple of 1/12).

Output is deterministic; rerunning overwrites responses/ byte-identically.
"""
import csv
import itertools
import os

HERE = os.path.dirname(os.path.abspath(__file__))
EXPERTS = 12
SYMBOLS = "VAXO"


def load():
    with open(os.path.join(HERE, "registry.csv")) as f:
        abbrs = [row["abbr"] for row in csv.DictReader(f)]
    with open(os.path.join(HERE, "tables", "ssim.csv")) as f:
        ssim = {(int(r["i"]), int(r["j"])): r["symbol"] for r in csv.DictReader(f)}
    with open(os.path.join(HERE, "tables", "average.csv")) as f:
        rows = list(csv.reader(f))[1:]
    totals = [[round(float(v) * EXPERTS) for v in row[1:]] for row in rows]
    return abbrs, ssim, totals


def pick_counts(mode, s_ij, s_ji):
    """Symbol counts (V, A, X, O) with `mode` as strict plurality."""
    best = None
    for counts in itertools.product(range(EXPERTS + 1), repeat=4):
        if sum(counts) != EXPERTS:
            continue
        c = dict(zip(SYMBOLS, counts))
        m = c[mode]
        if any(c[s] >= m for s in SYMBOLS if s != mode):
            continue
        if c["V"] + c["X"] > s_ij or c["A"] + c["X"] > s_ji:
            continue
        active = EXPERTS - c["O"]
        if s_ij > 4 * active or s_ji > 4 * active:
            continue
        key = (m, -c["X"], c["V"], c["A"])
        if best is None or key > best[0]:
            best = (key, c)
    if best is None:
        raise SystemExit(f"no feasible split for {mode} ({s_ij}, {s_ji})")
    return best[1]


def fill(total, minimum, eligible):
    """Distribute `total` points over experts, each in [minimum, 4]."""
    scores = [0] * EXPERTS
    for e in eligible:
        scores[e] = minimum[e]
    rest = total - sum(scores)
    assert rest >= 0
    # experts earlier in the list score systematically higher
    for e in eligible:
        take = min(4 - scores[e], rest)
        scores[e] += take
        rest -= take
    assert rest == 0
    return scores


def main():
    abbrs, ssim, totals = load()
    n = len(abbrs)
    judgments = [dict() for _ in range(EXPERTS)]
    scores = [[[0] * n for _ in range(n)] for _ in range(EXPERTS)]
    for pair_no, ((i, j), mode) in enumerate(sorted(ssim.items())):
        s_ij, s_ji = totals[i - 1][j - 1], totals[j - 1][i - 1]
        c = pick_counts(mode, s_ij, s_ji)
        labels = [s for s in SYMBOLS for _ in range(c[s])]
        # rotate dissenting judgments across experts
        shift = pair_no % EXPERTS
        order = [(e + shift) % EXPERTS for e in range(EXPERTS)]
        for slot, e in enumerate(order):
            judgments[e][(i, j)] = labels[slot]
        eligible = [e for e in range(EXPERTS) if judgments[e][(i, j)] != "O"]
        min_ij = [1 if judgments[e][(i, j)] in "VX" else 0 for e in range(EXPERTS)]
        min_ji = [1 if judgments[e][(i, j)] in "AX" else 0 for e in range(EXPERTS)]
        fwd = fill(s_ij, min_ij, eligible)
        bwd = fill(s_ji, min_ji, list(reversed(eligible)) if pair_no % 2 else eligible)
        for e in range(EXPERTS):
            scores[e][i - 1][j - 1] = fwd[e]
            scores[e][j - 1][i - 1] = bwd[e]

    out = os.path.join(HERE, "responses")
    os.makedirs(out, exist_ok=True)
    for e in range(EXPERTS):
        lines = ["[SSIM]"]
        for (i, j) in sorted(judgments[e]):
            lines.append(f"{i},{j},{judgments[e][(i, j)]}")
        lines.append("")
        lines.append("[SCORES]")
        lines.append("," + ",".join(abbrs))
        for r in range(n):
            lines.append(abbrs[r] + "," + ",".join(str(v) for v in scores[e][r]))
        with open(os.path.join(out, f"expert{e + 1:02}.txt"), "w") as f:
            f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
