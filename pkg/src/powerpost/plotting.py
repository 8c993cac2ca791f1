"""SVG figures drawn from the CSV outputs.

Every plot reads a CSV written by the harness and renders a byte-stable SVG:
the hash salt is fixed, the date stamp is suppressed and text is stored as
text rather than glyph paths.
"""

from __future__ import annotations

import csv
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import SchemaMismatch  # noqa: E402

KINDS = ("histogram_grid", "loglog_fit", "decay_curves")
BINS = 30
LOG_AXIS_METHODS = {"bcv", "bcv-vi", "train-test"}

STYLE = {
    "svg.hashsalt": "powerpost",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _read(path, required) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            rows = list(reader)
    except OSError as exc:
        raise SchemaMismatch(f"cannot read {path}: {exc}") from exc
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaMismatch(f"{path}: missing columns {missing}")
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    return rows


def _num(v: str) -> float:
    try:
        return float(v)
    except ValueError:
        return math.nan


def gamma_label(gamma: float) -> str:
    return f"γ̂={gamma:.2f}".replace("-", "−")


def _save(fig, out) -> None:
    tmp = f"{out}.tmp"
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, out)


def histogram_grid(path, out) -> None:
    """Rows are sample sizes, columns are (method, spec) cells; corners are counted, not drawn."""
    rows = _read(path, ("n", "method", "alpha_hat", "is_corner"))
    rows = [r for r in rows if r.get("status", "ok") == "ok"]
    if not rows:
        raise SchemaMismatch(f"{path}: no successful rows")
    ns = sorted({int(_num(r["n"])) for r in rows})
    cells = sorted({(r["method"], r.get("spec", "")) for r in rows})
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(ns), len(cells), figsize=(2.6 * len(cells), 1.9 * len(ns)),
                                 squeeze=False)
        for j, (method, spec) in enumerate(cells):
            use_log = method in LOG_AXIS_METHODS
            for i, n in enumerate(ns):
                ax = axes[i, j]
                sel = [r for r in rows if int(_num(r["n"])) == n and r["method"] == method
                       and r.get("spec", "") == spec]
                vals = np.array([_num(r["alpha_hat"]) for r in sel if r["is_corner"] in ("0", "False")])
                vals = vals[np.isfinite(vals)]
                corners = len(sel) - vals.size
                if use_log:
                    vals = np.log10(vals[vals > 0])
                if vals.size:
                    ax.hist(vals, bins=BINS, color="0.35")
                ax.set_title(f"{method} {spec} n={n}".strip(), fontsize=8)
                ax.text(0.98, 0.92, f"corners {corners}/{len(sel)}", transform=ax.transAxes,
                        ha="right", va="top", fontsize=7)
                if i == len(ns) - 1:
                    ax.set_xlabel("log10 α̂" if use_log else "α̂")
        fig.tight_layout()
        _save(fig, out)


def loglog_fit(path, out) -> None:
    """Non-corner ``alpha_hat`` against ``n`` on log axes with the fitted power law."""
    from .experiments import estimate_rate, read_alpha_samples
    from .errors import InsufficientData

    _read(path, ("n", "method", "alpha_hat", "is_corner"))
    samples = read_alpha_samples(path)
    cells = sorted({(s.method, s.spec) for s in samples})
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(cells), figsize=(3.0 * len(cells), 2.8), squeeze=False)
        for ax, (method, spec) in zip(axes[0], cells):
            cell = [s for s in samples if s.method == method and s.spec == spec]
            pts = [(s.n, s.alpha_hat) for s in cell if s.ok and not s.is_corner and s.alpha_hat > 0]
            if pts:
                n, a = np.array(pts, dtype=float).T
                ax.scatter(n, a, s=6, color="0.5", alpha=0.5, linewidths=0)
            try:
                est = estimate_rate(cell)
                grid = np.geomspace(min(s.n for s in cell), max(s.n for s in cell), 50)
                ax.plot(grid, np.exp(est.log_c) * grid ** est.gamma_hat, color="k")
                label = gamma_label(est.gamma_hat)
            except InsufficientData:
                label = "γ̂ n/a"
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel("n")
            ax.set_ylabel("α̂")
            ax.set_title(f"{method} {spec}".strip(), fontsize=8)
            ax.text(0.97, 0.95, label, transform=ax.transAxes, ha="right", va="top")
        fig.tight_layout()
        _save(fig, out)


_DECAY_VALUES = ("mean_sq_scaled_diff_mle", "mean_sq_scaled_diff_truth",
                 "mean_scaled_diff_mle", "value")
_DECAY_GROUPS = ("schedule", "metric")


def decay_curves(path, out) -> None:
    """Value against ``n`` on log axes, one line per schedule or metric, one panel per value column."""
    rows = _read(path, ("n",))
    header = rows[0].keys()
    values = [c for c in _DECAY_VALUES if c in header]
    groups = [c for c in _DECAY_GROUPS if c in header]
    if not values or not groups:
        raise SchemaMismatch(f"{path}: need a value column {_DECAY_VALUES} and a group column {_DECAY_GROUPS}")
    gcol = groups[0]
    labels = list(dict.fromkeys(r[gcol] for r in rows))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(values), figsize=(3.6 * len(values), 3.0), squeeze=False)
        for ax, vcol in zip(axes[0], values):
            for k, lab in enumerate(labels):
                pts = sorted((_num(r["n"]), _num(r[vcol])) for r in rows if r[gcol] == lab)
                pts = [(n, v) for n, v in pts if np.isfinite(v) and v > 0]
                if pts:
                    n, v = np.array(pts).T
                    ax.plot(n, v, marker="o", ms=3, color=str(0.15 + 0.25 * (k % 3)),
                            linestyle=("-", "--", ":", "-.")[k % 4], label=lab)
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel("n")
            ax.set_title(vcol, fontsize=8)
            ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        _save(fig, out)


def render_plot(csv_path, kind: str, out) -> str:
    """Render ``kind`` from ``csv_path`` to the SVG file ``out``; nothing is written on error."""
    if kind not in KINDS:
        raise SchemaMismatch(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    {"histogram_grid": histogram_grid, "loglog_fit": loglog_fit,
     "decay_curves": decay_curves}[kind](csv_path, out)
    return str(out)
