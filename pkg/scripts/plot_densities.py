#!/usr/bin/env python3
"""Render the density grids written by the compare command into one figure.

Usage: plot_densities.py example_output/report.json
"""

import argparse
import csv
import json
import sys
from pathlib import Path


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("report", help="report JSON written by the compare command")
    ap.add_argument("--output", default=None, help="PNG path (default: next to the report)")
    args = ap.parse_args(argv)
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib is required for this script", file=sys.stderr)
        return 2

    report_path = Path(args.report)
    params = json.loads(report_path.read_text())["parameters"]
    n = len(params)
    cols = 4
    nrows = -(-n // cols)
    fig, axes = plt.subplots(nrows, cols, figsize=(3.2 * cols, 2.4 * nrows))
    flat = axes.ravel()
    for ax in flat[n:]:
        ax.set_visible(False)
    for ax, (name, row) in zip(flat, params.items()):
        with open(report_path.parent / row["density_csv"], newline="") as fh:
            body = list(csv.reader(fh))[1:]
        x = [float(r[0]) for r in body]
        ax.plot(x, [float(r[2]) for r in body], lw=1.2, label="mcmc")
        ax.plot(x, [float(r[1]) for r in body], lw=1.2, ls="--", label="vmp")
        ax.set_title(f"{name}  ({row['accuracy']:.0f}%)", fontsize=9)
        ax.set_yticks([])
    flat[0].legend(fontsize=8, frameon=False)
    fig.tight_layout()
    out = args.output or report_path.with_suffix(".png")
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
