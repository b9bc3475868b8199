"""Turn experiment summary CSVs into comparison figures.

Expected input: a CSV with one row per (series, x) pair, a numeric y
column, and optionally an error column with standard errors — the layout
the tomography harness's ``*_summary.csv`` files use.  Output is one line
plot with a series per group value and symmetric error bars, written as
SVG by default so the bytes are reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


class RenderError(ValueError):
    """Input CSV cannot be rendered (missing columns, no rows)."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    out_path: str
    x_column: str = "L"
    y_column: str = "mean_trace_distance"
    series_column: str = "scheme"
    error_column: str | None = "stderr"
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    log_y: bool = False
    fmt: str = "svg"  # svg (vector, default) or png

    def __post_init__(self):
        if self.fmt not in ("svg", "png"):
            raise RenderError(f"unsupported output format {self.fmt!r}")


@dataclass
class RenderReport:
    out_path: str
    series: list[str] = field(default_factory=list)
    x_values: list[float] = field(default_factory=list)
    n_points: int = 0


def read_rows(csv_path: str) -> list[dict]:
    path = Path(csv_path)
    if not path.exists():
        raise RenderError(f"input CSV {csv_path} does not exist")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise RenderError(f"input CSV {csv_path} has no data rows")
    return rows


def _require_columns(rows: list[dict], spec: FigureSpec):
    present = set(rows[0].keys())
    needed = {spec.x_column, spec.y_column, spec.series_column}
    if spec.error_column:
        needed.add(spec.error_column)
    missing = sorted(needed - present)
    if missing:
        raise RenderError(
            f"missing column(s) {missing}; the CSV provides {sorted(present)}"
        )


def render(spec: FigureSpec) -> RenderReport:
    """Render one figure; returns what was drawn.

    The output is deterministic for a fixed input: a fixed hash salt and
    stripped date metadata keep repeated renders byte-identical.
    """
    rows = read_rows(spec.csv_path)
    _require_columns(rows, spec)
    groups: dict[str, list[tuple[float, float, float]]] = {}
    for row in rows:
        key = row[spec.series_column]
        y_raw = row[spec.y_column]
        if y_raw in ("", None):
            continue
        err = 0.0
        if spec.error_column and row.get(spec.error_column) not in ("", None):
            err = float(row[spec.error_column])
        groups.setdefault(key, []).append((float(row[spec.x_column]), float(y_raw), err))
    groups = {k: sorted(v) for k, v in groups.items() if v}
    if not groups:
        raise RenderError(f"no plottable rows for y column {spec.y_column!r}")

    with matplotlib.rc_context({"svg.hashsalt": "tomofig"}):
        fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=150)
        for name in sorted(groups):
            pts = groups[name]
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            es = [p[2] for p in pts]
            ax.errorbar(xs, ys, yerr=es if any(es) else None, marker="o", markersize=3.5,
                        capsize=2.5, linewidth=1.2, label=name)
        all_x = sorted({p[0] for pts in groups.values() for p in pts})
        ax.set_xticks(all_x)
        ax.set_xlim(min(all_x) - 0.4, max(all_x) + 0.4)
        if spec.log_y:
            ax.set_yscale("log")
        ax.set_xlabel(spec.x_label or spec.x_column)
        ax.set_ylabel(spec.y_label or spec.y_column)
        if spec.title:
            ax.set_title(spec.title)
        ax.legend(frameon=False, fontsize=8)
        ax.grid(True, alpha=0.25, linewidth=0.5)
        fig.tight_layout()
        out = Path(spec.out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format=spec.fmt, metadata=_stable_metadata(spec.fmt))
        plt.close(fig)
    return RenderReport(
        out_path=str(out),
        series=sorted(groups),
        x_values=[float(x) for x in all_x],
        n_points=sum(len(v) for v in groups.values()),
    )


def _stable_metadata(fmt: str) -> dict:
    if fmt == "svg":
        return {"Date": None}
    return {}
