"""Builds the synthetic per-run metrics fixture standing in for the published
Table 1 data, and freezes scipy's Mann-Whitney results for it.

Each model's pooled sample is constructed around a fixed median: the two
middle order statistics equal the target and the remaining values sit on
either side. A seeded search picks the spread so that every significance
flag agrees with Table 1 and the p-values land near the published ones.

Writes fixtures/table1/metrics.csv and fixtures/table1/expected.json.
"""

import csv
import json
import math
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np
from scipy.stats import mannwhitneyu

ROOT = Path(__file__).resolve().parents[1] / "table1"

MODELS = ["gpt-4.1-nano", "gpt-o1", "llama4-maverick", "llama4-scout", "llava-llama3"]
GPT_METHODS = ["d2kg", "d2kg_rag", "i2kg"]
LLAMA_METHODS = ["dpe", "d2kg", "d2kg_rag", "i2kg"]
KINDS = ["observation", "action"]
RUNS = 10

MEDIANS = {
    "compliance": {
        "gpt-4.1-nano": Fraction(0),
        "gpt-o1": Fraction(9, 10),
        "llama4-maverick": Fraction(6, 7),
        "llama4-scout": Fraction(18, 35),
        "llava-llama3": Fraction(0),
    },
    "coverage": {
        "gpt-4.1-nano": Fraction(0),
        "gpt-o1": Fraction(41, 48),
        "llama4-maverick": Fraction(3, 4),
        "llama4-scout": Fraction(5, 12),
        "llava-llama3": Fraction(0),
    },
}

# Table 1, in row order. None stands for "<0.001".
TABLE1 = {
    "compliance": [0.003, 0.004, None, None, None, None, 0.271, None, None, 0.302],
    "coverage": [0.005, 0.002, None, None, 0.007, None, 0.344, None, None, 0.478],
}


def methods(model):
    return GPT_METHODS if model.startswith("gpt") else LLAMA_METHODS


def failed_blocks(model):
    """Blocks whose output is not valid RDF: written as NA, pooled as zero."""
    if model.startswith("gpt"):
        return {("d2kg_rag", k) for k in KINDS}
    if model == "llava-llama3":
        return {("i2kg", k) for k in KINDS}
    return set()


def zero_blocks(model):
    """Valid blocks with zero compliance and coverage."""
    return {("dpe", k) for k in KINDS} if not model.startswith("gpt") else set()


def pairs():
    order = sorted(MODELS)
    for i in range(len(order)):
        for j in range(len(order) - 1, i, -1):
            yield order[i], order[j]


def build_sample(rng, n, target, zeros, lo, hi):
    """n values with median exactly `target` and at least `zeros` zeros."""
    half = n // 2
    if target == 0:
        positives = np.round(rng.uniform(0.05, hi, n - zeros), 3)
        return [0.0] * zeros + sorted(positives.tolist())
    t = float(target)
    below = np.round(rng.uniform(lo * t, t, half - 1 - zeros), 3)
    above = np.round(rng.uniform(t, hi, half - 1), 3)
    return [0.0] * zeros + sorted(below.tolist()) + [t, t] + sorted(above.tolist())


def score(samples, metric):
    total = 0.0
    for (a, b), published in zip(pairs(), TABLE1[metric]):
        p = mannwhitneyu(samples[a], samples[b], alternative="two-sided",
                         method="asymptotic", use_continuity=True).pvalue
        want_sig = published is None or published < 0.05
        if (p < 0.05) != want_sig:
            return math.inf
        if published is None:
            total += 0.0 if p < 0.001 else 10.0
        else:
            total += abs(math.log(p) - math.log(published))
    return total


def search(metric, zeros, seed):
    rng = np.random.default_rng(seed)
    best = (math.inf, None)
    for _ in range(600):
        params = {}
        for m in MODELS:
            n = len(methods(m)) * len(KINDS) * RUNS
            params[m] = (n, rng.uniform(0.0, 0.9), rng.uniform(0.9, 1.0) if MEDIANS[metric][m] else rng.uniform(0.1, 1.0))
        draw = int(rng.integers(1 << 31))
        local = np.random.default_rng(draw)
        samples = {
            m: build_sample(local, n, MEDIANS[metric][m], zeros[m], lo, hi)
            for m, (n, lo, hi) in params.items()
        }
        s = score(samples, metric)
        if s < best[0]:
            best = (s, samples)
    return best


def main():
    rng = np.random.default_rng(20250101)
    best = None
    for attempt in range(12):
        zeros = {}
        for m in MODELS:
            n = len(methods(m)) * len(KINDS) * RUNS
            forced = RUNS * len(KINDS) * (len(failed_blocks(m)) // 2 + len(zero_blocks(m)) // 2)
            if MEDIANS["compliance"][m] == 0:
                zeros[m] = int(rng.integers(n // 2 + 1, n - 4))
            else:
                zeros[m] = int(rng.integers(forced, n // 2 - 2))
            zeros[m] = max(zeros[m], forced)
        results = {metric: search(metric, zeros, 1000 * attempt + k)
                   for k, metric in enumerate(["compliance", "coverage"])}
        total = sum(r[0] for r in results.values())
        if best is None or total < best[0]:
            best = (total, zeros, {k: v[1] for k, v in results.items()})
            print(f"attempt {attempt}: score {total:.3f}")
    total, zeros, samples = best
    assert math.isfinite(total), "no assignment reproduces every flag"
    write(zeros, samples)


def write(zeros, samples):
    ROOT.mkdir(parents=True, exist_ok=True)
    rows = []
    shuffle = np.random.default_rng(7)
    for m in MODELS:
        slots = [(meth, kind, run) for meth, kind in product(methods(m), KINDS) for run in range(RUNS)]
        failed = [s for s in slots if (s[0], s[1]) in failed_blocks(m)]
        zeroed = [s for s in slots if (s[0], s[1]) in zero_blocks(m)]
        rest = [s for s in slots if s not in failed and s not in zeroed]
        shuffle.shuffle(rest)
        order = failed + zeroed + rest
        comp = samples["compliance"][m]
        cov = samples["coverage"][m]
        # both lists are sorted, so zeros line up on the same rows
        for slot, c, v in zip(order, comp, cov):
            meth, kind, run = slot
            invalid = slot in failed
            rows.append({
                "model": m, "method": meth, "graph_kind": kind, "run": run + 1,
                "file": f"{m}/{meth}/{kind}/run_{run + 1:02d}.ttl",
                "rdf_valid": "false" if invalid else "true",
                "triple_count": 0 if invalid else 20 + (run * 7 + len(meth)) % 40,
                "shacl_violations": "" if invalid else 0,
                "shacl_violation_ratio": "NA:invalid-rdf" if invalid else ("NA:no-ontology-terms" if c == 0 else "0"),
                **{f"compliance_{p}": "NA:invalid-rdf" if invalid else repr(c) for p in ("class", "property", "avg")},
                **{f"coverage_{p}": "NA:invalid-rdf" if invalid else repr(v) for p in ("class", "property", "avg")},
            })
    rows.sort(key=lambda r: (r["model"], r["method"], r["graph_kind"], r["run"]))
    with open(ROOT / "metrics.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    expected = {"alpha": 0.05, "pooling": "per-run", "missing": "zero", "metrics": {}}
    for metric in ["compliance", "coverage"]:
        out = []
        for (a, b), published in zip(pairs(), TABLE1[metric]):
            xa, xb = samples[metric][a], samples[metric][b]
            r = mannwhitneyu(xa, xb, alternative="two-sided", method="asymptotic", use_continuity=True)
            out.append({
                "model_1": a, "model_2": b,
                "median_1": float(np.median(xa)), "median_2": float(np.median(xb)),
                "median_1_exact": str(MEDIANS[metric][a]), "median_2_exact": str(MEDIANS[metric][b]),
                "u_statistic": float(r.statistic), "p_value": float(r.pvalue),
                "significant": bool(r.pvalue < 0.05),
                "table1_p": published, "table1_significant": published is None or published < 0.05,
            })
        expected["metrics"][metric] = out
    with open(ROOT / "expected.json", "w") as f:
        json.dump(expected, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
