import math

from opfrelax.report import (
    NOT_APPLICABLE,
    GapReport,
    RelaxationResult,
    parse_report_json,
    report_to_csv,
    report_to_json,
)


def _report():
    report = GapReport("case3", ac_value=5812.64, ac_status="optimal", ac_runtime=0.5)
    report.add(RelaxationResult("soc", "optimal", bound=5735.9, gap=1.32, runtime=0.1, iterations=12))
    report.add(RelaxationResult("qc", "optimal", bound=5740.6, gap=1.24, runtime=0.2, numeric_warning=True))
    return report


def test_gap_lookup_and_flags():
    report = _report()
    assert report.gap("soc") == 1.32
    assert report.gap("cp") is None
    assert report.result("qc").flags == "numeric_warning"
    assert RelaxationResult("soc", "optimal", ac_feasible=True, numeric_warning=True).flags == "ac_feasible;numeric_warning"


def test_copper_plate_stored_separately():
    report = _report()
    report.add(RelaxationResult("cp", "optimal", bound=5638.97, gap=2.99))
    assert "cp" not in report.relaxations
    assert report.gap("cp") == 2.99


def test_all_optimal_ignores_external_bounds():
    report = _report()
    assert report.all_optimal
    report.add(RelaxationResult("sdp", "external", bound=5800.0))
    assert report.all_optimal
    report.add(RelaxationResult("cp", "iteration-limit"))
    assert not report.all_optimal


def test_json_uses_null_for_missing_values():
    report = _report()
    report.add(RelaxationResult("sdp", "infeasible", bound=math.inf))
    text = report_to_json(report)
    cases = parse_report_json(text)
    assert len(cases) == 1
    case = cases[0]
    assert case["copper_plate"] == NOT_APPLICABLE
    assert case["relaxations"]["sdp"]["bound"] is None
    assert case["relaxations"]["soc"]["gap"] == 1.32
    assert case["ac"]["value"] == 5812.64
    # keys are sorted
    assert text.index('"ac"') < text.index('"case"') < text.index('"copper_plate"')


def test_csv_columns_and_blank_cells():
    first = _report()
    second = GapReport("other", ac_status="infeasible")
    second.add(RelaxationResult("cp", "optimal", bound=10.0))
    lines = report_to_csv([first, second]).splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["case", "ac_value", "ac_status", "ac_runtime"]
    assert [h for h in header if h.endswith("_bound")] == ["soc_bound", "qc_bound", "cp_bound"]
    row = dict(zip(header, lines[1].split(",")))
    assert row["cp_status"] == NOT_APPLICABLE
    assert row["cp_bound"] == ""
    assert row["soc_bound"] == "5735.9"
    other = dict(zip(header, lines[2].split(",")))
    assert other["ac_value"] == ""
    assert other["soc_status"] == ""
    assert other["cp_bound"] == "10.0"


def test_csv_with_explicit_columns():
    text = report_to_csv(_report(), ["qc"])
    assert text.splitlines()[0].split(",")[4:] == ["qc_bound", "qc_gap", "qc_runtime", "qc_status", "qc_flags"]
