import csv
import io
import json

import numpy as np
import pytest

from conformetrics.errors import FormatError, UsageError
from conformetrics.metrics import MetricSeries
from conformetrics.stats import WindowSpec, WindowStats
from conformetrics.trajio.report import (CSV_COLUMNS, MetricReport, comparison_table, emit_report,
                                         read_series_csv, render_mean_sd, render_number, report_from_json,
                                         series_to_csv)

W = WindowSpec(80.0, 100.0)


def _report(label, rg=2.0, sasa=150.0, hb=30.0, rmsd=0.2):
    stats = {m: WindowStats(v, 0.1 * v, 11, W) for m, v in
             (("rmsd", rmsd), ("rg", rg), ("sasa", sasa), ("hbonds", hb))}
    return MetricReport(label, stats)


def test_render_units_and_decimals():
    assert render_number("rg", 3.2061) == "32.06"
    assert render_number("sasa", 150.123) == "15012"
    assert render_number("sasa", 150.123, thousands=True) == "15,012"
    assert render_number("hbonds", 31.26) == "31.3"
    st = WindowStats(150.0, 2.0, 5, W)
    assert render_mean_sd("sasa", st) == "15,000 ± 200"


def test_csv_and_json_carry_same_rows():
    rep = _report("treated", rg=2.2)
    ctl = _report("control")
    rows = list(csv.DictReader(io.StringIO(emit_report(rep, "csv", ctl).decode())))
    doc = json.loads(emit_report(rep, "json", ctl))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows == doc["rows"]
    assert [r["metric"] for r in rows] == ["rmsd", "rg", "sasa", "hbonds"]
    rg = rows[1]
    assert rg["mean"] == "22.00" and rg["unit"] == "angstrom" and rg["delta_pct_vs_control"] == "+10"
    assert "single trajectory" in doc["caveat"]


def test_emit_report_errors():
    with pytest.raises(UsageError, match="control"):
        emit_report(_report("a"), "csv", require_delta=True)
    with pytest.raises(UsageError, match="format"):
        emit_report(_report("a"), "xml")


def test_json_round_trip():
    rep = _report("a")
    rep.per_chain = {"rg": {0: WindowStats(1.0, 0.1, 11, W)}}
    rep.convergence = {"rg": {"block_se": None, "tau_int": {"tau_int": 2.0}}}
    back = report_from_json(emit_report(rep, "json"))
    assert back.condition_label == "a"
    assert back.stats == rep.stats
    assert back.per_chain == rep.per_chain
    assert back.convergence == rep.convergence
    with pytest.raises(FormatError):
        report_from_json(b"{}")
    with pytest.raises(FormatError):
        report_from_json(b"not json")


def test_comparison_table_layout():
    reports = [_report("ctl"), _report("x", rg=1.78, sasa=174.0)]
    csv_bytes, text = comparison_table(reports, "ctl")
    rows = list(csv.DictReader(io.StringIO(csv_bytes.decode())))
    assert [r["rg_delta_pct"] for r in rows] == ["", "-11"]
    assert [r["sasa_delta_pct"] for r in rows] == ["", "+16"]
    assert "rmsd_delta_pct" not in rows[0]
    lines = text.splitlines()
    assert lines[0].split()[:3] == ["Condition", "RMSD", "(Å)"]
    assert "ΔRg (%)" in lines[0] and "ΔSASA (%)" in lines[0]
    assert lines[1].split()[-1] == "-" or " - " in lines[1]
    assert "-11%" in lines[2]
    assert "single trajectory" in lines[-1]


def test_comparison_table_errors():
    with pytest.raises(UsageError, match="duplicate"):
        comparison_table([_report("a"), _report("a")])
    with pytest.raises(UsageError, match="control"):
        comparison_table([_report("a")], "b")
    partial = _report("b")
    del partial.stats["hbonds"]
    with pytest.raises(UsageError, match="metric sets"):
        comparison_table([_report("a"), partial])


def test_series_csv_round_trip():
    s = MetricSeries("rg", np.array([0.0, 1.5]), np.array([1.0, 2.0]), "chain 0")
    parsed = read_series_csv(series_to_csv([s]).decode())
    x, y = parsed["chain 0"]
    assert np.array_equal(x, [0.0, 1.5])
    assert np.allclose(y, [10.0, 20.0])
    with pytest.raises(FormatError):
        read_series_csv("a,b\n")
    with pytest.raises(FormatError, match="line 2"):
        read_series_csv("time_ps,value,scope\nx,1,total\n")
