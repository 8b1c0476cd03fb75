#!/usr/bin/env python3
"""Render experiment results CSVs as log-log regret figures.

Consumes the results CSV written by the spbandit experiment harness (columns
``algo, instance_id, seed, horizon, t, inst_regret, cum_regret, flags``; lines
starting with ``#`` are comments) and produces one panel per algorithm with
the mean curve over (instance, seed) runs, a shaded +/-1 standard deviation
band, and the fitted log-log slope in the panel title.

Aggregation mirrors the harness: algorithms run at several horizons are
plotted as mean final regret per horizon; single-horizon algorithms as the
mean cumulative-regret trajectory, fitted on [sqrt(T), T] by default.  The
only statistics used are mean, standard deviation, and ordinary least
squares on (ln t, ln R).

Usage:
    plots.py --csv results.csv --out figure.png [--tmin T0] [--tmax T1]

Both PNG and SVG versions of the figure are written.  Requires numpy and
matplotlib; independent of the spbandit package.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLUMNS = ("algo", "instance_id", "seed", "horizon", "t", "inst_regret",
           "cum_regret", "flags")
PANEL_ORDER = ("emc", "mvm")  # canonical two-panel layout, others follow


class SchemaMismatch(Exception):
    """The CSV does not carry the expected result columns."""


class EmptyGroup(Exception):
    """An algorithm group has no usable rows to plot."""


def read_results(path) -> dict:
    rows = {name: [] for name in COLUMNS}
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch("empty file") from None
        if tuple(header) != COLUMNS:
            raise SchemaMismatch(f"expected columns {COLUMNS}, found {tuple(header)}")
        for row in reader:
            if len(row) != len(COLUMNS):
                raise SchemaMismatch(f"row with {len(row)} fields: {row!r}")
            for name, value in zip(COLUMNS, row):
                rows[name].append(value)
    return {
        "algo": np.asarray(rows["algo"], dtype=object),
        "instance_id": np.asarray(rows["instance_id"], dtype=np.int64),
        "seed": np.asarray(rows["seed"], dtype=np.int64),
        "horizon": np.asarray(rows["horizon"], dtype=np.int64),
        "t": np.asarray(rows["t"], dtype=np.int64),
        "cum_regret": np.asarray(rows["cum_regret"], dtype=np.float64),
        "flags": np.asarray(rows["flags"], dtype=object),
    }


def ols_loglog(t, r, t_min=None, t_max=None):
    """(slope, intercept, r2, n) of ln R against ln t; non-positive R dropped."""
    t = np.asarray(t, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    lo = float(t_min) if t_min is not None else float(t.min())
    hi = float(t_max) if t_max is not None else float(t.max())
    mask = (t >= lo) & (t <= hi) & (r > 0) & np.isfinite(r)
    if mask.sum() < 3:
        return None
    x, y = np.log(t[mask]), np.log(r[mask])
    xm, ym = x.mean(), y.mean()
    var = float(((x - xm) ** 2).sum())
    if var == 0.0:
        return None
    slope = float(((x - xm) * (y - ym)).sum() / var)
    intercept = float(ym - slope * xm)
    ss_res = float(((y - (intercept + slope * x)) ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return {"slope": slope, "intercept": intercept, "r2": r2, "n_points": int(mask.sum())}


def _algo_groups(cols):
    seen = []
    for a in cols["algo"]:
        if a not in seen:
            seen.append(a)
    ordered = [a for a in PANEL_ORDER if a in seen]
    ordered += [a for a in sorted(seen) if a not in ordered]
    return ordered


def aggregate(cols, algo, t_min=None, t_max=None) -> dict:
    """Mean and std curves for one algorithm, plus its fitted slope."""
    ok = np.asarray([not f.startswith("error:") for f in cols["flags"]])
    sel = (cols["algo"] == algo) & ok
    if not sel.any():
        raise EmptyGroup(f"no usable rows for algorithm {algo!r}")
    horizons = sorted(set(cols["horizon"][sel].tolist()))
    if len(horizons) > 1:
        xs, mean, std = [], [], []
        for horizon in horizons:
            at_end = sel & (cols["horizon"] == horizon) & (cols["t"] == horizon)
            vals = cols["cum_regret"][at_end]
            xs.append(horizon)
            mean.append(float(vals.mean()))
            std.append(float(vals.std()))
        fit = ols_loglog(xs, mean, t_min, t_max)
        return {"mode": "endpoint", "t": np.asarray(xs, dtype=np.float64),
                "mean": np.asarray(mean), "std": np.asarray(std), "fit": fit,
                "xlabel": "horizon T"}
    horizon = horizons[0]
    at = sel & (cols["horizon"] == horizon)
    ts = np.unique(cols["t"][at])
    mean = np.empty(ts.shape[0])
    std = np.empty(ts.shape[0])
    for i, t in enumerate(ts):
        vals = cols["cum_regret"][at & (cols["t"] == t)]
        mean[i] = float(vals.mean())
        std[i] = float(vals.std())
    lo = t_min if t_min is not None else math.ceil(math.sqrt(horizon))
    hi = t_max if t_max is not None else horizon
    fit = ols_loglog(ts, mean, lo, hi)
    return {"mode": "trajectory", "t": ts.astype(np.float64), "mean": mean,
            "std": std, "fit": fit, "xlabel": "round t"}


def render(csv_path, out_path, t_min=None, t_max=None) -> dict:
    """Write the figure (PNG and SVG) and return the per-algorithm slopes."""
    cols = read_results(csv_path)
    algos = _algo_groups(cols)
    if not algos:
        raise EmptyGroup("no algorithms in the CSV")
    groups = {algo: aggregate(cols, algo, t_min, t_max) for algo in algos}

    fig, axes = plt.subplots(1, len(algos), figsize=(5.2 * len(algos), 4.2),
                             squeeze=False)
    for ax, algo in zip(axes[0], algos):
        g = groups[algo]
        positive = g["mean"] > 0
        ax.plot(g["t"][positive], g["mean"][positive], marker="o", ms=3, lw=1.4,
                label="mean")
        lo_band = np.maximum(g["mean"] - g["std"], 1e-12)
        hi_band = g["mean"] + g["std"]
        ax.fill_between(g["t"][positive], lo_band[positive], hi_band[positive],
                        alpha=0.25, lw=0, label="+/- 1 std")
        if g["fit"] is not None:
            slope = g["fit"]["slope"]
            xs = g["t"][positive]
            ax.plot(xs, np.exp(g["fit"]["intercept"]) * xs ** slope, "--", lw=1,
                    label=f"fit slope {slope:.3f}")
            ax.set_title(f"{algo}: slope {slope:.3f}")
        else:
            ax.set_title(f"{algo}: no fit")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(g["xlabel"])
        ax.set_ylabel("cumulative regret")
        ax.legend(fontsize=8)
    fig.tight_layout()

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    targets = {out_path.suffix.lower().lstrip(".")} if out_path.suffix else set()
    targets |= {"png", "svg"}
    written = []
    for ext in sorted(targets):
        target = out_path.with_suffix(f".{ext}")
        fig.savefig(target)
        written.append(str(target))
    plt.close(fig)
    return {"slopes": {algo: (g["fit"]["slope"] if g["fit"] else None)
                       for algo, g in groups.items()},
            "files": written}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--tmin", type=float, default=None)
    parser.add_argument("--tmax", type=float, default=None)
    args = parser.parse_args(argv)
    try:
        result = render(args.csv, args.out, args.tmin, args.tmax)
    except (SchemaMismatch, EmptyGroup) as exc:
        print(f"error:{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 3
    for algo, slope in result["slopes"].items():
        shown = "n/a" if slope is None else repr(slope)
        print(f"{algo}: slope {shown}")
    for path in result["files"]:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
