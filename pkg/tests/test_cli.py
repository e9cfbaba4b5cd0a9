import orjson
import pytest

from opfrelax.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, expand_cases, main
from opfrelax.case_io import builtin_case_text


def test_check_without_samples(capsys):
    code = main(["check", "--samples", "0", "--networks", "0"])
    assert code == EXIT_OK
    assert "no samples" in capsys.readouterr().out


def test_check_identities(capsys):
    assert main(["check", "--samples", "200", "--networks", "0"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "identities max err" in out
    assert "identities-ext max err" in out
    assert "FAIL" not in out


def test_broken_identity_fails(capsys):
    assert main(["check", "--samples", "20", "--networks", "0", "--break-identity"]) == EXIT_FAILURE
    assert "FAIL" in capsys.readouterr().out


def test_equivalence_suite(capsys):
    assert main(["check", "--samples", "0", "--networks", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("equivalence ") == 2


def test_solve_missing_case(tmp_path, capsys):
    code = main(["solve", "--case", str(tmp_path / "missing.m"), "--relax", "cp"])
    assert code == EXIT_USAGE
    assert "case file not found" in capsys.readouterr().err


def test_solve_unknown_relaxation(capsys):
    assert main(["solve", "--case", "builtin:case3_base", "--relax", "sdp"]) == EXIT_USAGE


def test_solve_writes_json(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["solve", "--case", "builtin:case3_base", "--relax", "soc,cp", "--out", str(out)])
    assert code == EXIT_OK
    cases = orjson.loads(out.read_text())["cases"]
    assert len(cases) == 1
    case = cases[0]
    assert case["case"] == "case3_base"
    assert case["relaxations"]["soc"]["gap"] == pytest.approx(1.32, abs=0.15)
    assert case["copper_plate"]["gap"] == pytest.approx(2.99, abs=0.05)
    # a summary is printed when the report goes to a file
    assert "SOC" in capsys.readouterr().out


def test_solve_csv_to_stdout(capsys):
    code = main(["solve", "--case", "builtin:case3_base", "--relax", "cp", "--format", "csv"])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("case,ac_value,ac_status,ac_runtime,cp_bound")
    assert lines[1].startswith("case3_base,")


def test_solve_gap_filter_skips_case(capsys):
    code = main(["solve", "--case", "builtin:case3_base", "--relax", "soc", "--min-soc-gap", "50"])
    assert code == EXIT_OK
    assert orjson.loads(capsys.readouterr().out)["cases"] == []


def test_case_directory_expands_sorted(tmp_path):
    for name in ("b.m", "a.m", "notes.txt"):
        (tmp_path / name).write_text(builtin_case_text("case3_base"))
    assert expand_cases([str(tmp_path), "builtin:case3_base"]) == [
        str(tmp_path / "a.m"),
        str(tmp_path / "b.m"),
        "builtin:case3_base",
    ]


def test_export_sdp(tmp_path, capsys):
    out = tmp_path / "case3.dat-s"
    assert main(["export-sdp", "--case", "builtin:case3_base", "--out", str(out)]) == EXIT_OK
    assert out.read_text().splitlines()[2] == "17 = mDIM"
    assert "6x6 3x3 3x3 2x2 2x2" in capsys.readouterr().out


def test_envelopes(tmp_path):
    out = tmp_path / "cuts.csv"
    assert main(["envelopes", "--theta", "30", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("envelope,kind,cut")
    assert {line.split(",")[0] for line in lines[1:]} == {"square", "product", "cos", "sin", "wc", "ws"}


def test_envelopes_reject_wide_angle(capsys):
    assert main(["envelopes", "--theta", "100"]) == EXIT_USAGE
    assert "[ERROR]" in capsys.readouterr().err


def test_bench(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--case", "builtin:case3_base", "--repetitions", "1", "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 5
