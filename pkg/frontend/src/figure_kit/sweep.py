"""Regularization-decay figure: log-log error curves with a slope-1 guide."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

ERROR_COLUMNS = {
    "l2": (("err_y_l2q", "y"), ("err_z_l2q", "z"), ("err_u_l2q", "u")),
    "linf": (("err_y_linfq", "y"), ("err_z_linfq", "z"), ("err_u_linfq", "u")),
}


def load_sweep(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [{k: float(v) for k, v in row.items()} for row in reader]
    if not rows:
        raise ValueError(f"{path}: empty sweep table")
    return rows


def plot_sweep(path, out_dir) -> list:
    """Render L2 and max-norm error decay panels; returns written paths.

    The reference row (smallest weight, zero self-distance) is dropped;
    remaining non-positive errors are rejected for the log axes. A single
    surviving row degenerates to a scatter plot without a slope guide.
    """
    rows = load_sweep(path)
    omegas_all = np.array([r["omega_u"] for r in rows])
    reference = omegas_all.min()
    rows = [r for r in rows if r["omega_u"] > reference]
    os.makedirs(out_dir, exist_ok=True)

    written = []
    for norm, columns in ERROR_COLUMNS.items():
        fig, ax = plt.subplots(figsize=(4.6, 3.6))
        plotted_any = False
        for column, label in columns:
            pts = [(r["omega_u"], r[column]) for r in rows if r.get(column, 0) > 0]
            if not pts:
                continue
            w, e = np.array(pts).T
            if np.any(e <= 0):
                raise ValueError(f"{column}: non-positive error on log axis")
            if len(pts) == 1:
                ax.plot(w, e, "o", label=label)
            else:
                ax.plot(w, e, "o-", lw=1.2, label=label)
            plotted_any = True
        if plotted_any and len(rows) > 1:
            w = np.array([r["omega_u"] for r in rows])
            anchor = max(r.get("err_u_l2q" if norm == "l2" else "err_u_linfq", 0)
                         for r in rows)
            if anchor > 0:
                guide = anchor * (w / w.max())
                ax.plot(w, guide, "k--", lw=0.9, label="slope 1")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("quadratic penalty weight")
        ax.set_ylabel(f"{norm} distance to reference")
        ax.legend(fontsize=8)
        fig.tight_layout()
        target = os.path.join(out_dir, f"sweep_{norm}.png")
        fig.savefig(target, dpi=150)
        plt.close(fig)
        written.append(target)
    return written


def fitted_slope(rows, column: str = "err_u_l2q") -> float:
    """Log-log slope of one error column over the positive entries."""
    pts = [(r["omega_u"], r[column]) for r in rows if r.get(column, 0) > 0]
    if len(pts) < 2:
        raise ValueError("need at least two positive entries for a slope")
    w, e = np.array(sorted(pts)).T
    return float(np.polyfit(np.log10(w), np.log10(e), 1)[0])
