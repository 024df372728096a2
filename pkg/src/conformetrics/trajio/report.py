"""Analysis reports: CSV/JSON emission, text tables and series files.

Internal values are nm / nm^2 / counts. This is the only place they are
converted to the angstrom-based units used in published tables.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import NM2_TO_ANGSTROM2, NM_TO_ANGSTROM
from ..errors import FormatError, UsageError
from ..stats import SINGLE_TRAJECTORY_CAVEAT, WindowSpec, WindowStats, format_pct, pct_delta

CSV_COLUMNS = ("condition", "metric", "mean", "sd", "unit", "window_start_ps", "window_end_ps",
               "delta_pct_vs_control")

# metric -> (unit label, scale from internal units, decimals)
REPORT_UNITS = {
    "rmsd": ("angstrom", NM_TO_ANGSTROM, 2),
    "rg": ("angstrom", NM_TO_ANGSTROM, 2),
    "sasa": ("angstrom^2", NM2_TO_ANGSTROM2, 0),
    "hbonds": ("count", 1.0, 1),
    "rmsf": ("angstrom", NM_TO_ANGSTROM, 2),
}

METRIC_ORDER = ("rmsd", "rg", "sasa", "hbonds")

TABLE_HEADERS = {"rmsd": "RMSD (Å)", "rg": "Rg (Å)", "sasa": "SASA (Å²)", "hbonds": "H-Bonds"}


def to_report_units(metric: str, values):
    return np.asarray(values, dtype=float) * REPORT_UNITS[metric][1]


def render_number(metric: str, value_internal: float, thousands: bool = False) -> str:
    _, scale, decimals = REPORT_UNITS[metric]
    spec = f"{',' if thousands else ''}.{decimals}f"
    return format(value_internal * scale, spec)


def render_mean_sd(metric: str, stats: WindowStats, thousands: bool = True) -> str:
    """Text-table cell such as ``32.06 ± 0.69``."""
    return f"{render_number(metric, stats.mean, thousands)} ± {render_number(metric, stats.sd, thousands)}"


@dataclass
class MetricReport:
    condition_label: str
    stats: dict
    series: dict = field(default_factory=dict)
    per_chain: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def metrics(self) -> list:
        return [m for m in METRIC_ORDER if m in self.stats]


def report_rows(report: MetricReport, control: Optional[MetricReport] = None,
                require_delta: bool = False) -> list:
    if require_delta and control is None:
        raise UsageError("a control-relative delta was requested but no control report is present")
    rows = []
    for metric in report.metrics():
        st = report.stats[metric]
        delta = None
        if control is not None and metric in control.stats:
            delta = pct_delta(control.stats[metric], st)
        rows.append({
            "condition": report.condition_label,
            "metric": metric,
            "mean": render_number(metric, st.mean),
            "sd": render_number(metric, st.sd),
            "unit": REPORT_UNITS[metric][0],
            "window_start_ps": f"{st.window.start:g}",
            "window_end_ps": f"{st.window.end:g}",
            "delta_pct_vs_control": format_pct(delta),
        })
    return rows


def _stats_dict(st: WindowStats) -> dict:
    return {"mean": st.mean, "sd": st.sd, "n_frames": st.n_frames,
            "window_start_ps": st.window.start, "window_end_ps": st.window.end, "caveat": st.caveat}


def emit_report(report: MetricReport, fmt: str = "csv", control: Optional[MetricReport] = None,
                require_delta: bool = False) -> bytes:
    """Serialise a report as CSV or JSON bytes.

    Both carry the same per-metric row keys. JSON additionally holds raw
    internal-unit statistics, per-chain statistics, convergence
    diagnostics and provenance, and always the single-trajectory caveat.
    """
    rows = report_rows(report, control, require_delta)
    fmt = fmt.lower()
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue().encode()
    if fmt == "json":
        doc = {
            "condition": report.condition_label,
            "caveat": SINGLE_TRAJECTORY_CAVEAT,
            "rows": rows,
            "stats": {m: _stats_dict(report.stats[m]) for m in report.metrics()},
            "per_chain": {m: {str(c): _stats_dict(s) for c, s in per.items()}
                          for m, per in report.per_chain.items()},
            "convergence": {
                "block_se": {m: d.get("block_se") for m, d in report.convergence.items()},
                "tau_int": {m: d.get("tau_int") for m, d in report.convergence.items()},
            },
            "provenance": report.provenance,
        }
        return (json.dumps(doc, indent=2, sort_keys=False) + "\n").encode()
    raise UsageError(f"unknown report format {fmt!r} (use csv or json)")


def _stats_from_dict(d: dict) -> WindowStats:
    return WindowStats(mean=float(d["mean"]), sd=float(d["sd"]), n_frames=int(d["n_frames"]),
                       window=WindowSpec(float(d["window_start_ps"]), float(d["window_end_ps"])),
                       caveat=d.get("caveat", SINGLE_TRAJECTORY_CAVEAT))


def report_from_json(data) -> MetricReport:
    try:
        doc = json.loads(data)
        stats = {m: _stats_from_dict(d) for m, d in doc["stats"].items()}
        label = doc["condition"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"not a metric report: {exc}") from None
    per_chain = {m: {int(c): _stats_from_dict(s) for c, s in per.items()}
                 for m, per in doc.get("per_chain", {}).items()}
    conv = {}
    for kind in ("block_se", "tau_int"):
        for m, d in doc.get("convergence", {}).get(kind, {}).items():
            conv.setdefault(m, {})[kind] = d
    return MetricReport(label, stats, per_chain=per_chain, convergence=conv,
                        provenance=doc.get("provenance", {}))


def comparison_table(reports, control_label: Optional[str] = None):
    """Rows of a multi-condition table plus its rendered text.

    Returns ``(csv_bytes, text)``. With a control label, a delta column is
    added for Rg and SASA; the control row shows "-".
    """
    labels = [r.condition_label for r in reports]
    dupes = sorted({l for l in labels if labels.count(l) > 1})
    if dupes:
        raise UsageError(f"duplicate condition labels: {dupes}")
    metric_sets = {tuple(r.metrics()) for r in reports}
    if len(metric_sets) != 1:
        raise UsageError(f"reports disagree on their metric sets: {sorted(metric_sets)}")
    metrics = list(metric_sets.pop())
    control = None
    if control_label is not None:
        matches = [r for r in reports if r.condition_label == control_label]
        if not matches:
            raise UsageError(f"control {control_label!r} not among conditions {labels}")
        control = matches[0]
    delta_metrics = [m for m in ("rg", "sasa") if m in metrics] if control else []
    header = ["Condition"]
    for m in metrics:
        header.append(TABLE_HEADERS[m])
        if m in delta_metrics:
            header.append(f"Δ{TABLE_HEADERS[m].split(' ')[0]} (%)")
    csv_header = ["condition"]
    for m in metrics:
        csv_header += [f"{m}_mean", f"{m}_sd"]
        if m in delta_metrics:
            csv_header.append(f"{m}_delta_pct")
    text_rows, csv_rows = [], []
    for r in reports:
        trow = [r.condition_label]
        crow = [r.condition_label]
        for m in metrics:
            st = r.stats[m]
            trow.append(render_mean_sd(m, st))
            crow += [render_number(m, st.mean), render_number(m, st.sd)]
            if m in delta_metrics:
                if r is control:
                    trow.append("-")
                    crow.append("")
                else:
                    d = pct_delta(control.stats[m], st)
                    trow.append(f"{format_pct(d)}%")
                    crow.append(format_pct(d))
        text_rows.append(trow)
        csv_rows.append(crow)
    widths = [max(len(str(row[k])) for row in [header] + text_rows) for k in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() for row in [header] + text_rows]
    lines.append("")
    lines.append(f"Note: ± values are {SINGLE_TRAJECTORY_CAVEAT}.")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header)
    writer.writerows(csv_rows)
    return buf.getvalue().encode(), "\n".join(lines) + "\n"


def series_to_csv(series_list) -> bytes:
    """``time_ps,value,scope`` rows in reporting units, all scopes stacked."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time_ps", "value", "scope"])
    for s in series_list:
        vals = to_report_units(s.metric, s.values)
        for t, v in zip(s.times, vals):
            writer.writerow([f"{t:.6g}", repr(float(v)), s.scope])
    return buf.getvalue().encode()


def rmsf_to_csv(profile) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["residue", "value", "scope"])
    scale = REPORT_UNITS["rmsf"][1]
    for res, v in zip(profile.residue_seq, profile.rmsf):
        writer.writerow([int(res), repr(float(v * scale)), "mean"])
    for c, vals in profile.per_chain.items():
        for res, v in zip(profile.residue_seq, vals):
            writer.writerow([int(res), repr(float(v * scale)), f"chain {c}"])
    return buf.getvalue().encode()


def read_series_csv(text: str) -> dict:
    """Parse a series or RMSF CSV into ``{scope: (x, y)}``."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty series file") from None
    if header not in (["time_ps", "value", "scope"], ["residue", "value", "scope"]):
        raise FormatError(f"unexpected series header {header}")
    out = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            x, y, scope = float(row[0]), float(row[1]), row[2]
        except (ValueError, IndexError):
            raise FormatError(f"series line {lineno}: bad row {row}") from None
        xs, ys = out.setdefault(scope, ([], []))
        xs.append(x)
        ys.append(y)
    return {k: (np.array(v[0]), np.array(v[1])) for k, v in out.items()}
