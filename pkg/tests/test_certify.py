import numpy as np
import pytest

from opfrelax.certify import ResidualReport, certify_solution, certify_voltages
from opfrelax.formulations import build_ac, build_soc


def test_point_shape_checked(base_net):
    with pytest.raises(ValueError):
        certify_solution(build_soc(base_net), np.zeros(2))


def test_non_finite_point_fails(base_net):
    prog = build_soc(base_net)
    x = np.full(prog.n_vars, np.nan)
    report = certify_solution(prog, x)
    assert not report.passed
    assert report.residuals == {"bounds": float("inf")}


def test_report_worst_group():
    report = ResidualReport("demo", 1e-6, {"kcl_p": 1e-9, "thermal": 0.3, "pad": 0.0})
    assert report.failed == ["thermal"]
    assert report.worst == ("thermal", 0.3)
    assert ResidualReport("empty", 1e-6).worst == ("", 0.0)
    assert report.as_dict()["passed"] is False


def test_nan_residual_counts_as_failure():
    assert not ResidualReport("nan", 1e-6, {"kcl_p": float("nan")}).passed


def test_ac_optimum_voltages_certify(base_net, base_ac):
    lay = build_ac(base_net).meta["layout"]
    x = base_ac.x
    report = certify_voltages(
        base_net,
        x[lay.vm : lay.vm + lay.n_bus],
        x[lay.va : lay.va + lay.n_bus],
        x[lay.pg : lay.pg + lay.n_gen],
        x[lay.qg : lay.qg + lay.n_gen],
    )
    assert report.passed, report.residuals


def test_unbalanced_voltages_fail(base_net):
    report = certify_voltages(base_net, np.ones(3), np.zeros(3), np.zeros(3), np.zeros(3))
    assert "kcl_p" in report.failed


def test_perturbed_variable_is_flagged(base_soc):
    prog, sol = base_soc
    x = sol.x.copy()
    x[prog.var("pg[0]")] += 1e-3
    assert certify_solution(prog, sol).passed
    assert "kcl_p" in certify_solution(prog, x).failed
