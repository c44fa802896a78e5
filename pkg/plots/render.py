#!/usr/bin/env python3
"""Render publication figures from simulation CSV files.

Standalone by design: this script talks to the simulator package only
through its published CSV schemas (a per-trial file and a quantile summary
file), so the simulator's test suite runs and passes with this directory
deleted.  It renders what the files already contain — empirical success
fractions from recorded stopping times, their Wilson intervals, and
differences of published quantile columns — and never re-runs simulations
or re-derives the estimates the summary files publish.

Usage:
    python3 render.py --in <dir> --out <dir> --kind curves|fit|width

Kinds:
    curves  success probability vs t/n, one curve per n with a shaded
            Wilson 95% band; needs trials.csv for at least two values of n.
    fit     mean stopping time over n versus n, log-x, with 95% error
            bars; needs trials.csv for at least two values of n.
    width   threshold-width decay: (t_hat(theta_hi) - t_hat(theta_lo))/n
            versus n, log-x, with a band from the published confidence
            columns; needs summary.csv for at least two values of n.

Exit codes match the simulator CLI: 0 ok, 2 usage error, 3 malformed data.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

TRIALS_HEADER = "property,strategy,n,seed_base,trial,stopping_time,censored"
SUMMARY_HEADER = "property,strategy,n,theta,t_hat,ci_lo,ci_hi,trials"

WILSON_Z = 1.96


class UsageError(Exception):
    pass


class SchemaError(Exception):
    pass


def read_rows(path: str, expected_header: str) -> list[dict]:
    """Parse one CSV file, skipping `#` comment lines, enforcing the schema."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body:
        raise SchemaError(f"{path}: empty file")
    if body[0] != expected_header:
        raise SchemaError(
            f"{path}: unexpected schema; first column line is {body[0]!r}, "
            f"expected {expected_header!r}"
        )
    cols = expected_header.split(",")
    rows = []
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != len(cols):
            raise SchemaError(f"{path}: row has {len(parts)} fields, expected {len(cols)}")
        rows.append(dict(zip(cols, parts)))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def find_files(in_dir: str, filename: str) -> list[str]:
    if not os.path.isdir(in_dir):
        raise UsageError(f"input directory not found: {in_dir}")
    found = []
    for root, _dirs, files in os.walk(in_dir):
        if filename in files:
            found.append(os.path.join(root, filename))
    if not found:
        raise UsageError(f"no {filename} found under {in_dir}")
    return sorted(found)


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = p + z * z / (2 * trials)
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return ((centre - half) / denom, (centre + half) / denom)


def load_trial_groups(in_dir: str) -> dict[int, dict]:
    """All trials.csv rows under in_dir, grouped by n."""
    groups: dict[int, dict] = {}
    for path in find_files(in_dir, "trials.csv"):
        for row in read_rows(path, TRIALS_HEADER):
            try:
                n = int(row["n"])
                censored = row["censored"] == "1"
                time = None if row["stopping_time"] == "" else int(row["stopping_time"])
            except ValueError as exc:
                raise SchemaError(f"{path}: bad numeric field: {exc}") from exc
            if time is None and not censored:
                raise SchemaError(f"{path}: missing stopping time on uncensored row")
            g = groups.setdefault(n, {"times": [], "censored": 0, "label": None})
            g["label"] = f"{row['property']} / {row['strategy']}"
            if time is None:
                g["censored"] += 1
            else:
                g["times"].append(time)
    return groups


def render_curves(in_dir: str, out_dir: str) -> str:
    groups = load_trial_groups(in_dir)
    if len(groups) < 2:
        raise UsageError(
            f"success curves need trials for at least two values of n, got {sorted(groups)}"
        )
    fig, ax = plt.subplots(figsize=(7.2, 4.6))
    for n in sorted(groups):
        g = groups[n]
        times = sorted(g["times"])
        trials = len(times) + g["censored"]
        xs, ps, los, his = [0.0], [0.0], [0.0], [0.0]
        for i, t in enumerate(times):
            if i + 1 < len(times) and times[i + 1] == t:
                continue  # step at the last tied value
            lo, hi = wilson_interval(i + 1, trials)
            xs.append(t / n)
            ps.append((i + 1) / trials)
            los.append(lo)
            his.append(hi)
        (line,) = ax.step(xs, ps, where="post", label=f"n = {n}")
        ax.fill_between(
            xs, los, his, step="post", alpha=0.18, color=line.get_color(), linewidth=0
        )
    ax.set_xlabel("steps / n")
    ax.set_ylabel("empirical success probability")
    any_label = next(iter(groups.values()))["label"]
    ax.set_title(f"Success curves: {any_label}")
    ax.legend()
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    out = os.path.join(out_dir, "curves.svg")
    fig.savefig(out, bbox_inches="tight")
    plt.close(fig)
    return out


def render_fit(in_dir: str, out_dir: str) -> str:
    groups = load_trial_groups(in_dir)
    if len(groups) < 2:
        raise UsageError(
            f"the convergence plot needs trials for at least two values of n, got {sorted(groups)}"
        )
    ns, ys, errs = [], [], []
    for n in sorted(groups):
        g = groups[n]
        if g["censored"]:
            raise SchemaError(
                f"n={n}: {g['censored']} censored trials; means would be biased"
            )
        times = g["times"]
        k = len(times)
        mean = sum(times) / k
        if k > 1:
            var = sum((t - mean) ** 2 for t in times) / (k - 1)
            half = WILSON_Z * math.sqrt(var / k)
        else:
            half = 0.0
        ns.append(n)
        ys.append(mean / n)
        errs.append(half / n)
    fig, ax = plt.subplots(figsize=(7.2, 4.6))
    ax.errorbar(ns, ys, yerr=errs, fmt="o-", capsize=4)
    ax.set_xscale("log")
    ax.set_xlabel("n (log scale)")
    ax.set_ylabel("mean stopping time / n")
    any_label = next(iter(groups.values()))["label"]
    ax.set_title(f"Normalised mean stopping time: {any_label}")
    ax.grid(alpha=0.3, which="both")
    out = os.path.join(out_dir, "fit.svg")
    fig.savefig(out, bbox_inches="tight")
    plt.close(fig)
    return out


def load_summary_groups(in_dir: str) -> dict[int, dict]:
    groups: dict[int, dict] = {}
    for path in find_files(in_dir, "summary.csv"):
        for row in read_rows(path, SUMMARY_HEADER):
            try:
                n = int(row["n"])
                theta = Fraction(row["theta"])
                t_hat = int(row["t_hat"])
                ci_lo = int(row["ci_lo"])
                ci_hi = int(row["ci_hi"])
            except (ValueError, ZeroDivisionError) as exc:
                raise SchemaError(f"{path}: bad numeric field: {exc}") from exc
            g = groups.setdefault(n, {"by_theta": {}, "label": None})
            g["label"] = f"{row['property']} / {row['strategy']}"
            g["by_theta"][theta] = (t_hat, ci_lo, ci_hi)
    return groups


def render_width(in_dir: str, out_dir: str) -> str:
    groups = load_summary_groups(in_dir)
    if len(groups) < 2:
        raise UsageError(
            f"the width plot needs summaries for at least two values of n, got {sorted(groups)}"
        )
    ns, widths, lo_band, hi_band = [], [], [], []
    theta_pair = None
    for n in sorted(groups):
        by_theta = groups[n]["by_theta"]
        if len(by_theta) < 2:
            raise SchemaError(f"n={n}: need at least two theta rows to form a width")
        t_lo_theta, t_hi_theta = min(by_theta), max(by_theta)
        theta_pair = (t_lo_theta, t_hi_theta)
        hat_lo, ci_lo_lo, ci_lo_hi = by_theta[t_lo_theta]
        hat_hi, ci_hi_lo, ci_hi_hi = by_theta[t_hi_theta]
        ns.append(n)
        widths.append((hat_hi - hat_lo) / n)
        # extreme combinations of the published interval endpoints
        lo_band.append((ci_hi_lo - ci_lo_hi) / n)
        hi_band.append((ci_hi_hi - ci_lo_lo) / n)
    fig, ax = plt.subplots(figsize=(7.2, 4.6))
    ax.plot(ns, widths, "o-", label="width / n")
    ax.fill_between(ns, lo_band, hi_band, alpha=0.2, linewidth=0)
    ax.set_xscale("log")
    ax.set_xlabel("n (log scale)")
    ax.set_ylabel(
        f"(t_hat({theta_pair[1]}) - t_hat({theta_pair[0]})) / n" if theta_pair else "width / n"
    )
    any_label = next(iter(groups.values()))["label"]
    ax.set_title(f"Threshold width decay: {any_label}")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    out = os.path.join(out_dir, "width.svg")
    fig.savefig(out, bbox_inches="tight")
    plt.close(fig)
    return out


RENDERERS = {
    "curves": render_curves,
    "fit": render_fit,
    "width": render_width,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render.py", description="Render figures from simulation CSV files."
    )
    parser.add_argument("--in", dest="in_dir", required=True, help="directory to scan for CSV files")
    parser.add_argument("--out", dest="out_dir", required=True, help="directory for figure files")
    parser.add_argument("--kind", required=True, choices=sorted(RENDERERS), help="figure kind")
    args = parser.parse_args(argv)
    try:
        os.makedirs(args.out_dir, exist_ok=True)
        out = RENDERERS[args.kind](args.in_dir, args.out_dir)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
