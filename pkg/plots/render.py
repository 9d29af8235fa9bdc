#!/usr/bin/env python3
"""Render the three report figures from harness CSV files.

    render.py --figure fig1 --in trajectory.csv --n 1000 --out fig1.png
    render.py --figure fig2 --in sweep.csv --out fig2.svg --format svg
    render.py --figure fig3 --in equilibrium.csv --out fig3.png

fig1: collective accuracy and diversity against log time, one line per
reward scheme, solid for the uniform initial allocation and dashed for
the concentrated one. fig2: equilibrium accuracy against the number of
factors with mean lines and standard-deviation bands. fig3: 2x2 panels
of equilibrium attention share against factor weight per scheme.

Output is deterministic: fixed style, no timestamps, fixed SVG hash salt.
Input files are validated against the expected column sets before any
drawing; a missing column fails naming it.
"""

from __future__ import annotations

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "cilab-plots"
import matplotlib.pyplot as plt  # noqa: E402

SCHEME_COLORS = {
    "binary": "black",
    "market": "tab:blue",
    "minority": "tab:red",
    "uniform": "tab:green",
}
INIT_STYLES = {"uniform": "-", "concentrated": "--"}

REQUIRED_COLUMNS = {
    "fig1": ["scheme", "n", "init", "seed", "t", "accuracy", "diversity"],
    "fig2": ["scheme", "n", "seed", "accuracy"],
    "fig3": ["scheme", "n", "seed", "beta", "rho_eq"],
}


class RenderError(Exception):
    pass


def load_rows(path: Path, figure: str) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for column in REQUIRED_COLUMNS[figure]:
                if column not in header:
                    raise RenderError(f"input is missing required column {column!r}")
            return list(reader)
    except OSError as err:
        raise RenderError(f"cannot read {path}: {err}") from err


def plot_fig1(rows: list[dict], n: int):
    rows = [r for r in rows if int(r["n"]) == n]
    if not rows:
        raise RenderError(f"no rows with n={n} in the input")
    fig, (ax_acc, ax_div) = plt.subplots(1, 2, figsize=(10, 4))
    series = defaultdict(list)
    for r in rows:
        series[(r["scheme"], r["init"], r["seed"])].append(
            (float(r["t"]), float(r["accuracy"]), float(r["diversity"])))
    for (scheme, init, _seed), pts in sorted(series.items()):
        pts.sort()
        t = [p[0] for p in pts]
        ax_acc.plot(t, [p[1] for p in pts], INIT_STYLES.get(init, "-"),
                    color=SCHEME_COLORS.get(scheme, "gray"), lw=1.2)
        ax_div.plot(t, [p[2] for p in pts], INIT_STYLES.get(init, "-"),
                    color=SCHEME_COLORS.get(scheme, "gray"), lw=1.2,
                    label=f"{scheme}/{init}")
    for ax, ylabel in ((ax_acc, "collective accuracy"), (ax_div, "diversity")):
        ax.set_xscale("log")
        ax.set_xlabel("time")
        ax.set_ylabel(ylabel)
        ax.set_ylim(-0.02, 1.02)
    ax_div.legend(fontsize=7, loc="lower left")
    fig.suptitle(f"n = {n}")
    fig.tight_layout()
    return fig


def plot_fig2(rows: list[dict]):
    if not rows:
        raise RenderError("input has no data rows")
    fig, ax = plt.subplots(figsize=(6, 4.2))
    per_point = defaultdict(list)
    for r in rows:
        per_point[(r["scheme"], int(r["n"]))].append(float(r["accuracy"]))
    schemes = sorted({s for s, _ in per_point})
    for scheme in schemes:
        ns = sorted(n for s, n in per_point if s == scheme)
        mean = [sum(per_point[(scheme, n)]) / len(per_point[(scheme, n)]) for n in ns]
        std = []
        for n in ns:
            vals = per_point[(scheme, n)]
            mu = sum(vals) / len(vals)
            std.append((sum((v - mu) ** 2 for v in vals) / len(vals)) ** 0.5)
        color = SCHEME_COLORS.get(scheme, "gray")
        ax.plot(ns, mean, "-o", color=color, ms=3, lw=1.4, label=scheme)
        ax.fill_between(ns, [m - s for m, s in zip(mean, std)],
                        [m + s for m, s in zip(mean, std)],
                        color=color, alpha=0.2, lw=0)
    ax.set_xscale("log")
    ax.set_xlabel("number of factors")
    ax.set_ylabel("equilibrium accuracy")
    ax.set_ylim(0.4, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def plot_fig3(rows: list[dict]):
    if not rows:
        raise RenderError("input has no data rows")
    panels = ["binary", "market", "minority", "uniform"]
    fig, axes = plt.subplots(2, 2, figsize=(8, 7))
    for ax, scheme in zip(axes.flat, panels):
        pts = [(float(r["beta"]), float(r["rho_eq"]))
               for r in rows if r["scheme"] == scheme]
        if pts:
            ax.scatter([p[0] for p in pts], [p[1] for p in pts], s=4,
                       color=SCHEME_COLORS.get(scheme, "gray"), alpha=0.5)
            top = max(max(p[0] for p in pts), max(p[1] for p in pts))
            ax.plot([0, top], [0, top], "k:", lw=0.8)
        ax.set_title(scheme, fontsize=9)
        ax.set_xlabel("factor weight")
        ax.set_ylabel("equilibrium attention")
    fig.tight_layout()
    return fig


def render(figure: str, in_path: Path, out_path: Path, fmt: str,
           n: int | None = None) -> None:
    rows = load_rows(in_path, figure)
    if figure == "fig1":
        if n is None:
            raise RenderError("fig1 needs --n to select the factor count")
        fig = plot_fig1(rows, n)
    elif figure == "fig2":
        fig = plot_fig2(rows)
    else:
        fig = plot_fig3(rows)
    metadata = {"Date": None} if fmt == "svg" else {"Software": "cilab-plots"}
    fig.savefig(out_path, format=fmt, dpi=150, metadata=metadata)
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render.py")
    parser.add_argument("--figure", required=True, choices=["fig1", "fig2", "fig3"])
    parser.add_argument("--in", dest="in_path", required=True, type=Path)
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--format", default="png", choices=["png", "svg"])
    args = parser.parse_args(argv)
    try:
        render(args.figure, args.in_path, args.out, args.format, n=args.n)
    except RenderError as err:
        print(f"render.py: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
