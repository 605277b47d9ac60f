import csv
import xml.etree.ElementTree as ET

import pytest

from virtualbid.reporting import ReportInputs, bar_chart, emit_reports, safe_name, scatter_plot, stacked_bars

SVG = "{http://www.w3.org/2000/svg}"


def _marks(path):
    root = ET.parse(path).getroot()
    return [e for e in root.iter() if e.get("class") == "mark"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _inputs():
    return ReportInputs(
        monthly=[("2019-01", 1200.0, 350.5), ("2019-02", 800.0, -120.25)],
        deltas={"P01": [(0, 1.5), (13, -2.0), (23, 40.0)], "P/02": [(5, 0.0)]},
        profits={"N1": [("2019-01-03", 14, 250.0), ("2019-01-04", 18, -50.0)]},
        shares={"P01": {"price_forecasting": 0.5, "self_scheduling": 0.25, "opportunistic": 0.25, "other": 0.0}},
    )


def test_single_cleared_trade_single_mark(tmp_path):
    emit_reports(ReportInputs(profits={"N1": [("2019-01-03", 14, 250.0)]}), tmp_path)
    rows = _rows(tmp_path / "figures" / "hourly_profit_N1.csv")
    assert len(rows) == 1
    (mark,) = _marks(tmp_path / "figures" / "hourly_profit_N1.svg")
    assert (float(mark.get("data-x")), float(mark.get("data-y"))) == (14.0, 250.0)


def test_empty_shares_csv_only(tmp_path):
    written = emit_reports(ReportInputs(shares={}), tmp_path)
    assert [p.name for p in written] == ["strategy_shares.csv"]
    assert (tmp_path / "figures" / "strategy_shares.csv").read_text() == \
        "participant_id,price_forecasting,self_scheduling,opportunistic,other\n"


def test_unrun_stages_emit_nothing(tmp_path):
    assert emit_reports(ReportInputs(), tmp_path) == []


def test_marks_match_csv(tmp_path):
    emit_reports(_inputs(), tmp_path)
    fig = tmp_path / "figures"
    for name, col in (("monthly_cleared_mwh", "cleared_mwh"), ("monthly_net_profit", "net_profit")):
        vals = [float(r[col]) for r in _rows(fig / f"{name}.csv")]
        assert [float(m.get("data-value")) for m in _marks(fig / f"{name}.svg")] == vals
    pts = [(float(r["hour"]), float(r["delta"])) for r in _rows(fig / "delta_by_hour_P01.csv")]
    assert [(float(m.get("data-x")), float(m.get("data-y"))) for m in _marks(fig / "delta_by_hour_P01.svg")] == pts
    (row,) = _rows(fig / "strategy_shares.csv")
    marks = _marks(fig / "strategy_shares.svg")
    assert {m.get("data-series"): float(m.get("data-value")) for m in marks} == \
        {k: float(v) for k, v in row.items() if k != "participant_id"}


def test_figures_are_valid_svg(tmp_path):
    for p in emit_reports(_inputs(), tmp_path):
        if p.suffix == ".svg":
            assert ET.parse(p).getroot().tag == SVG + "svg"


def test_unsafe_names_sanitized(tmp_path):
    emit_reports(_inputs(), tmp_path)
    assert (tmp_path / "figures" / "delta_by_hour_P_02.csv").exists()
    assert safe_name("a/b c") == "a_b_c"


def test_byte_identical_across_runs(tmp_path):
    a = emit_reports(_inputs(), tmp_path / "a")
    b = emit_reports(_inputs(), tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


def test_negative_bar_below_axis():
    root = ET.fromstring(bar_chart(["a", "b"], [5.0, -5.0]))
    pos, neg = [e for e in root.iter() if e.get("class") == "mark"]
    assert float(neg.get("y")) == pytest.approx(float(pos.get("y")) + float(pos.get("height")))


def test_empty_scatter_and_escaping():
    root = ET.fromstring(scatter_plot([], [], title="a < b & c"))
    assert not [e for e in root.iter() if e.get("class") == "mark"]
    root = ET.fromstring(stacked_bars(["<x>"], {"s": [1.0]}))
    assert [e.get("data-label") for e in root.iter() if e.get("class") == "mark"] == ["<x>"]
