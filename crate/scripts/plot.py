#!/usr/bin/env python3
"""Render every table under an artifact directory's plots/ folder to PNG.

Each CSV is drawn with its first column on the x axis and every other column
as a line. A first column named `t` (heat time) gets a logarithmic axis.
Non-interactive: figures are written next to the CSVs.

Usage: scripts/plot.py ARTIFACT_DIR [ARTIFACT_DIR ...]
"""

import argparse
import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_table(path: pathlib.Path) -> pathlib.Path:
    table = pd.read_csv(path)
    x = table.columns[0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for column in table.columns[1:]:
        ax.plot(table[x], table[column], marker=".", label=column)
    if x == "t" and (table[x] > 0).all():
        ax.set_xscale("log")
    ax.set_xlabel(x)
    ax.set_title(path.stem)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out = path.with_suffix(".png")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("dirs", nargs="+", type=pathlib.Path)
    args = parser.parse_args()
    tables = sorted(p for d in args.dirs for p in (d / "plots").glob("*.csv"))
    if not tables:
        print("no plot tables found", file=sys.stderr)
        return 1
    for table in tables:
        print(plot_table(table))
    return 0


if __name__ == "__main__":
    sys.exit(main())
