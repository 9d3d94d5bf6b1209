"""CSV, JSON and SVG outputs for a run."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("range_m", "x_o_m", "pl_total_db", "pl_sca_db", "pl_ref_db", "q_sca_j", "q_ref_j",
               "blocked_fraction", "mcpt_pl_db", "mcpt_stderr_db", "delta_db", "status")


@dataclass
class ReportRow:
    range_m: float
    x_o_m: float | None = None
    pl_total_db: float | None = None
    pl_sca_db: float | None = None
    pl_ref_db: float | None = None
    q_sca_j: float | None = None
    q_ref_j: float | None = None
    blocked_fraction: float | None = None
    mcpt_pl_db: float | None = None
    mcpt_stderr_db: float | None = None
    delta_db: float | None = None
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)

    def cells(self) -> list[str]:
        return [_cell(getattr(self, name)) for name in CSV_COLUMNS]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def write_csv(path: Path, rows: list[ReportRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.cells())


def write_summary(path: Path, summary: dict) -> None:
    Path(path).write_text(json.dumps(jsonable(summary), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _finite(values):
    return np.array([v if v is not None and math.isfinite(v) else np.nan for v in values], dtype=float)


def write_plot(path: Path, rows: list[ReportRow], mode: str, title: str = "") -> None:
    """Path loss against the swept variable (or a bar chart for a single point)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "uvnlos", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        if mode == "sweep-offset":
            xs = _finite([r.x_o_m for r in rows])
            ax.set_xlabel("obstacle centre x_o (m)")
        else:
            xs = _finite([r.range_m for r in rows])
            ax.set_xlabel("range r (m)")
        if len(rows) == 1 and mode in ("analytic", "mcpt"):
            r = rows[0]
            labels, vals = [], []
            for label, v in (("total", r.pl_total_db), ("scattered", r.pl_sca_db),
                             ("reflected", r.pl_ref_db), ("photon tracing", r.mcpt_pl_db)):
                if v is not None and math.isfinite(v):
                    labels.append(label)
                    vals.append(v)
            ax.bar(labels, vals, color="tab:blue")
            ax.set_xlabel("")
            ax.set_ylim(min(vals, default=0.0) - 10.0, max(vals, default=1.0) + 5.0)
        else:
            series = (("total", [r.pl_total_db for r in rows], "-o"),
                      ("scattered", [r.pl_sca_db for r in rows], "--s"),
                      ("reflected", [r.pl_ref_db for r in rows], ":^"))
            for label, ys, style in series:
                y = _finite(ys)
                if np.isfinite(y).any():
                    ax.plot(xs, y, style, label=label, markersize=4)
            y_mc = _finite([r.mcpt_pl_db for r in rows])
            if np.isfinite(y_mc).any():
                err = _finite([r.mcpt_stderr_db for r in rows])
                ax.errorbar(xs, y_mc, yerr=err, fmt="x", color="k", label="photon tracing", capsize=3)
            ax.legend()
        ax.set_ylabel("path loss (dB)")
        ax.grid(True, alpha=0.3)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
