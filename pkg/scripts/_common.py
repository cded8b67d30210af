"""Shared argument handling for the experiment scripts."""

import argparse
import sys

from bdris_isac.sweep import emit, summarize


def parser(description: str, seeds: int = 20) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--seeds", type=int, default=seeds, help="number of channel realizations")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, help="CSV with one row per run (default: no file)")
    return ap


def report(rows, out=None, label="point"):
    if out:
        emit(rows, "csv", out)
    print(f"{label:>10s} {'topology':>9s} {'runs':>5s} {'R_sum[bit]':>11s} {'tr(F^-1)/Q':>11s} {'objective':>10s}")
    for s in summarize(rows):
        print(
            f"{s['point']!s:>10s} {s['topology']:>9s} {s['runs'] - s['failed']:>5d} "
            f"{s['sum_rate']:11.4f} {s['crb_avg']:11.4e} {s['objective']:10.4f}"
        )
    if any(r.error for r in rows):
        print(f"{sum(bool(r.error) for r in rows)} runs failed; see the error column", file=sys.stderr)
