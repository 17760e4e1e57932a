#!/usr/bin/env python3
"""Render figures from qmap CSV artifacts (plotting stays out of the CLI).

    python scripts/plot_results.py breakdown run1/map.csv run2/map.csv -o energy.png
    python scripts/plot_results.py fronts search/generations.csv -o fronts.png
    python scripts/plot_results.py correlation corr/correlate.csv -o corr.png
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def plot_breakdown(paths, output):
    """Stacked memory-vs-MAC energy bars, one bar per map.csv (TOTAL rows)."""
    labels, stacks, keys = [], [], None
    for path in paths:
        total = [r for r in read_rows(path) if r["layer"] == "TOTAL"][0]
        if keys is None:
            keys = [k for k in total if k.startswith("energy_pj_mem_") and k != "energy_pj_mem_total"]
        labels.append(Path(path).parent.name)
        stacks.append([float(total[k]) for k in keys] + [float(total["energy_pj_mac"])])
    names = [k.removeprefix("energy_pj_mem_") for k in keys] + ["MAC"]
    fig, ax = plt.subplots(figsize=(1.2 + len(labels), 4))
    bottom = [0.0] * len(labels)
    for i, name in enumerate(names):
        values = [s[i] for s in stacks]
        ax.bar(labels, values, bottom=bottom, label=name)
        bottom = [b + v for b, v in zip(bottom, values)]
    ax.set_ylabel("energy [pJ]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(output, dpi=150)


def plot_fronts(path, output):
    """Accuracy-vs-EDP fronts across generations from generations.csv."""
    rows = read_rows(path)
    generations = sorted({int(r["generation"]) for r in rows})
    shown = {generations[0], generations[len(generations) // 2], generations[-1]}
    fig, ax = plt.subplots(figsize=(5, 4))
    for gen in generations:
        if gen not in shown:
            continue
        pts = sorted((float(r["edp_j_cycles"]), float(r["accuracy"]))
                     for r in rows if int(r["generation"]) == gen)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=f"gen {gen}")
    ax.set_xlabel("EDP [J*cycles]")
    ax.set_ylabel("top-1 accuracy")
    ax.set_xscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(output, dpi=150)


def plot_correlation(path, output):
    rows = read_rows(path)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, column, label in ((axes[0], "weight_memory_words", "packed weight words"),
                              (axes[1], "edp_j_cycles", "EDP [J*cycles]")):
        xs = [int(r["model_size_bits"]) for r in rows if r["is_reference"] == "0"]
        ys = [float(r[column]) for r in rows if r["is_reference"] == "0"]
        ax.scatter(xs, ys, s=6, alpha=0.4)
        ref = [r for r in rows if r["is_reference"] == "1"]
        if ref:
            ax.scatter([int(ref[0]["model_size_bits"])], [float(ref[0][column])],
                       color="tab:blue", edgecolor="black", s=60, zorder=3, label="uniform 8")
            ax.legend(fontsize=8)
        ax.set_xlabel("model size [bits]")
        ax.set_ylabel(label)
    fig.tight_layout()
    fig.savefig(output, dpi=150)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True)
    p = sub.add_parser("breakdown")
    p.add_argument("csvs", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p = sub.add_parser("fronts")
    p.add_argument("csv")
    p.add_argument("-o", "--output", required=True)
    p = sub.add_parser("correlation")
    p.add_argument("csv")
    p.add_argument("-o", "--output", required=True)
    args = parser.parse_args()
    if args.kind == "breakdown":
        plot_breakdown(args.csvs, args.output)
    elif args.kind == "fronts":
        plot_fronts(args.csv, args.output)
    else:
        plot_correlation(args.csv, args.output)


if __name__ == "__main__":
    main()
