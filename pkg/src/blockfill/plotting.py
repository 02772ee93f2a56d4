"""Figure rendering for fullness sweeps: mean curve, min-max band, theory overlays."""
from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bounds import guaranteed_fill, harmonic
from .core import ParameterError

CSV_HEADER = ["hammer_h", "mean_fullness", "min_fullness", "max_fullness"]


class CsvFormatError(ValueError):
    """Sweep CSV does not match the expected schema; message names the line."""


def read_sweep_csv(path):
    """Load a sweep CSV into a dict of arrays, validating the schema strictly."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise CsvFormatError(f"{path}:1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise CsvFormatError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise CsvFormatError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise CsvFormatError(f"{path}:1: no data rows")
    arr = np.asarray(rows)
    return {name: arr[:, i] for i, name in enumerate(CSV_HEADER)}


def _overlay_harmonic_segments(ax, a_min, a_max):
    """Red segments: the exact deferred-even fill 2 i a (H_2i - H_i) on (1/2i, 1/(2i-1)]."""
    label = "deferred even split, exact fill"
    i = 1
    while 1.0 / (2 * i - 1) > a_min:
        lo = max(a_min, 1.0 / (2 * i))
        hi = min(a_max, 1.0 / (2 * i - 1))
        if lo < hi:
            hdiff = harmonic(2 * i) - harmonic(i)
            xs = np.array([lo, hi])
            ax.plot(xs, 2 * i * xs * hdiff, color="red", alpha=0.6, lw=2.5,
                    label=label, zorder=3)
            label = None
        i += 1
        if i > 4096:
            break


def _overlay_bound_curve(ax, B, a_min, a_max):
    """Orange curve: the proven fill for the recommended strategy at each r/B."""
    rs = np.arange(max(1, int(np.floor(a_min * B))), int(np.ceil(a_max * B)) + 1)
    vals = [guaranteed_fill(B, int(r)).fill for r in rs]
    ax.plot(rs / B, vals, color="orange", lw=2, label="proven fill", zorder=3)


def render_fullness_figure(csv_paths, B, out_path, overlay="none", titles=None):
    """One panel per CSV: shaded min-max band, mean fullness line, optional overlay.

    The x axis is the batch size relative to capacity, the y axis is fullness
    clipped to [0.5, 1] like the sweep figures this reproduces.  Writes a
    self-contained image (format from the file extension, SVG by default).
    """
    if overlay not in ("none", "lemma61", "table1"):
        raise ParameterError(f"unknown overlay {overlay!r}")
    data = [read_sweep_csv(p) for p in csv_paths]
    n = len(data)
    fig, axes = plt.subplots(1, n, figsize=(5.2 * n, 3.6), squeeze=False, sharey=True)
    for i, (d, ax) in enumerate(zip(data, axes[0])):
        alpha = d["hammer_h"] / B
        ax.fill_between(alpha, d["min_fullness"], d["max_fullness"],
                        color="tab:blue", alpha=0.35, lw=0, label="min-max across runs")
        ax.plot(alpha, d["mean_fullness"], color="tab:blue", lw=1.2, label="mean fullness")
        if overlay == "lemma61":
            _overlay_harmonic_segments(ax, float(alpha.min()), float(alpha.max()))
        elif overlay == "table1":
            _overlay_bound_curve(ax, B, float(alpha.min()), float(alpha.max()))
        ax.set_xlim(float(alpha.min()), float(alpha.max()))
        ax.set_ylim(0.5, 1.0)
        ax.grid(True, alpha=0.4)
        ax.set_xlabel(r"$\alpha = r/B$")
        if i == 0:
            ax.set_ylabel("mean fullness")
        if titles and i < len(titles):
            ax.set_title(titles[i])
        ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
