"""Figure rendering for simulator sweep CSVs and security-bound CSVs.

Inputs are the two CSV schemas the simulator emits:

* sweep rows: mechanism,nrh,mix,throttler,status,weighted_speedup,
  ws_normalized,max_slowdown,actions_total,energy_total_j,energy_benign_j,
  lat_p50_ns,lat_p90_ns,lat_p99_ns,suspects
* security bound rows: f_atk,th_outlier,ratio

Rendering is deterministic: series are sorted, styles fixed, and image
metadata carries no timestamps, so re-rendering the same CSV is
byte-identical. Inputs are never mutated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "hammerplots"  # deterministic SVG ids
import matplotlib.pyplot as plt

FIGURE_KINDS = (
    "ws_vs_nrh",
    "actions_vs_nrh",
    "latency_percentiles",
    "security_bound",
    "energy_vs_nrh",
    "unfairness_vs_nrh",
)

_SWEEP_VALUE_COLUMN = {
    "ws_vs_nrh": "ws_normalized",
    "actions_vs_nrh": "actions_total",
    "energy_vs_nrh": "energy_total_j",
    "unfairness_vs_nrh": "max_slowdown",
}

_Y_LABEL = {
    "ws_vs_nrh": "weighted speedup (normalized)",
    "actions_vs_nrh": "preventive actions",
    "energy_vs_nrh": "DRAM energy [J]",
    "unfairness_vs_nrh": "maximum slowdown",
    "latency_percentiles": "read latency [ns]",
    "security_bound": "max attack score / benign average",
}


class FigureError(ValueError):
    pass


@dataclass(frozen=True)
class FigureSpec:
    input_csv: str
    kind: str
    output: str
    group_keys: tuple = ("mechanism", "throttler")
    title: str = ""

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}")


def _read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FigureError(f"{path}: no data rows")
    return rows


def _require(rows: list[dict], columns) -> None:
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise FigureError(f"missing columns: {missing}")


def _to_float(value: str) -> float:
    if value in ("", None, "None"):
        return math.nan
    if value == "inf":
        return math.inf
    return float(value)


def _group(rows, keys):
    grouped: dict[tuple, list[dict]] = {}
    for row in rows:
        grouped.setdefault(tuple(row[k] for k in keys), []).append(row)
    return dict(sorted(grouped.items()))


def _sweep_series_figure(spec: FigureSpec, value_column: str):
    rows = [r for r in _read_csv(spec.input_csv) if r.get("status", "ok") == "ok"]
    if not rows:
        raise FigureError(f"{spec.input_csv}: no usable rows")
    _require(rows, ("nrh", value_column) + tuple(spec.group_keys))
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for key, members in _group(rows, spec.group_keys).items():
        pts = sorted(((int(r["nrh"]), _to_float(r[value_column])) for r in members
                      if not math.isnan(_to_float(r[value_column]))), reverse=True)
        if not pts:
            continue
        label = "/".join(str(k) for k in key)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    ax.set_xscale("log", base=2)
    ax.invert_xaxis()  # threat worsens left to right
    ax.set_xlabel("disturbance threshold (activations)")
    ax.set_ylabel(_Y_LABEL[spec.kind])
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return fig, ax


def _latency_figure(spec: FigureSpec):
    rows = [r for r in _read_csv(spec.input_csv) if r.get("status", "ok") == "ok"]
    cols = ("lat_p50_ns", "lat_p90_ns", "lat_p99_ns")
    _require(rows, cols + tuple(spec.group_keys))
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    percentiles = (50, 90, 99)
    for key, members in _group(rows, spec.group_keys).items():
        row = members[0]
        ys = [_to_float(row[c]) for c in cols]
        ax.plot(percentiles, ys, marker="s", label="/".join(str(k) for k in key))
    ax.set_xlabel("percentile")
    ax.set_ylabel(_Y_LABEL[spec.kind])
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return fig, ax


def _security_bound_figure(spec: FigureSpec):
    rows = _read_csv(spec.input_csv)
    _require(rows, ("f_atk", "th_outlier", "ratio"))
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for t, members in _group(rows, ("th_outlier",)).items():
        pts = sorted((float(r["f_atk"]), _to_float(r["ratio"])) for r in members)
        xs = [p[0] for p in pts if math.isfinite(p[1])]
        ys = [p[1] for p in pts if math.isfinite(p[1])]
        ax.plot(xs, ys, label=f"outlier ratio {t[0]}")
    ax.set_xlabel("fraction of threads used by the attacker")
    ax.set_ylabel(_Y_LABEL[spec.kind])
    ax.set_ylim(0, 12)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return fig, ax


def build_figure(spec: FigureSpec):
    """Figure object for a spec; exposed separately so tests can inspect data."""
    if spec.kind in _SWEEP_VALUE_COLUMN:
        return _sweep_series_figure(spec, _SWEEP_VALUE_COLUMN[spec.kind])
    if spec.kind == "latency_percentiles":
        return _latency_figure(spec)
    if spec.kind == "security_bound":
        return _security_bound_figure(spec)
    raise FigureError(f"unhandled kind {spec.kind!r}")


def render(spec: FigureSpec) -> str:
    """Render the figure to spec.output (png or svg); returns the path."""
    fig, _ = build_figure(spec)
    try:
        if spec.output.endswith(".svg"):
            # strip the volatile date so identical inputs give identical bytes
            fig.savefig(spec.output, metadata={"Date": None})
        else:
            fig.savefig(spec.output, metadata={"Software": None})
    finally:
        plt.close(fig)
    return spec.output
