"""Centerline profile panels: one panel per variable, one curve per run."""

from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

VARIABLES = ("y", "z", "u")


@dataclass
class ProfileRecord:
    """One centerline profile: sorted x1 positions plus field columns."""

    path: str
    x1: np.ndarray
    values: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        order = np.argsort(self.x1)
        self.x1 = self.x1[order]
        self.values = {k: v[order] for k, v in self.values.items()}


class ProfileFormatError(ValueError):
    pass


def load_profile(path, label: str = "") -> ProfileRecord:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "x1":
            raise ProfileFormatError(f"{path}: first column must be x1")
        missing = [v for v in VARIABLES if v not in header and v != "u"]
        if missing:
            raise ProfileFormatError(f"{path}: missing columns {missing}")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows)
    if data.size == 0:
        raise ProfileFormatError(f"{path}: no data rows")
    columns = {name: data[:, i] for i, name in enumerate(header)}
    x1 = columns.pop("x1")
    if not label:
        label = _label_from_path(path)
    return ProfileRecord(path=str(path), x1=x1, values=columns, label=label)


def _label_from_path(path) -> str:
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    match = re.search(r"profile_t([0-9.]+)", stem)
    run = os.path.basename(os.path.dirname(str(path)))
    return run or stem if not match else f"{run or stem}"


def plot_profiles(paths, out_dir, group_label: str = "run") -> list:
    """Render one PNG per variable with one curve per input CSV.

    Returns the list of written file paths; raises ProfileFormatError on
    malformed input and ValueError on an empty path list.
    """
    paths = list(paths)
    if not paths:
        raise ValueError("no profile files given")
    records = [load_profile(p) for p in paths]
    os.makedirs(out_dir, exist_ok=True)

    written = []
    available = [v for v in VARIABLES
                 if all(v in r.values for r in records)]
    for variable in available:
        fig, ax = plt.subplots(figsize=(7.0, 3.2))
        for record in records:
            ax.plot(record.x1, record.values[variable], lw=1.4,
                    label=record.label)
        ax.set_xlabel("x1")
        ax.set_ylabel(variable)
        ax.set_title(f"centerline {variable}")
        if len(records) > 1:
            ax.legend(fontsize=8, title=group_label)
        fig.tight_layout()
        target = os.path.join(out_dir, f"profiles_{variable}.png")
        fig.savefig(target, dpi=150)
        plt.close(fig)
        written.append(target)
    return written
