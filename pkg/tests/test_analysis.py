import math

import numpy as np
import pytest

from opfrelax.analysis import (
    BENCH_COLUMNS,
    IdentitySample,
    bench_to_csv,
    bench_wc,
    check_equivalence,
    check_identities,
    dominance_suite,
    identity_suite,
    map_c_to_w,
    map_w_to_c,
    optimality_gap,
    parse_relaxations,
    perturbed_network,
    rank1_recover,
    recover_voltages,
    relaxation_point,
    solve_case,
)
from opfrelax.certify import certify_solution, certify_voltages
from opfrelax.conic_solver import solve_conic
from opfrelax.errors import InfeasiblePointError, NonHermitianError
from opfrelax.formulations import ac_point_to_w, build_ac, build_qc, build_soc
from opfrelax.network import validate

CASE3_AC = 5812.64


def test_optimality_gap():
    assert optimality_gap(5812.64, 5735.9) == pytest.approx(1.32, abs=0.01)
    assert optimality_gap(100.0, 100.0) == 0.0
    for bad in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            optimality_gap(bad, 1.0)


@pytest.mark.parametrize("extended", [False, True])
def test_identities_hold_on_random_branches(extended):
    assert identity_suite(1000, seed=7, extended=extended) <= 1e-9


def test_identity_suite_with_no_samples():
    assert identity_suite(0) == 0.0


def test_perturbed_identity_is_detected():
    assert identity_suite(20, perturb=1e-3) > 1e-9


def test_single_identity_sample():
    sample = IdentitySample(1.02 + 0.0j, 0.97 * np.exp(-0.2j), 1.0 / complex(0.02, 0.2), 1.05, 0.05, 0.3)
    assert check_identities(sample, extended=True) <= 1e-9
    # the plain identities ignore taps and charging
    assert check_identities(sample) <= 1e-9


@pytest.mark.parametrize("fields", [{"y": 0j}, {"y": 1 - 1j, "tap_mag": 0.0}])
def test_identity_sample_rejects_bad_branch(fields):
    with pytest.raises(ValueError):
        IdentitySample(1.0 + 0j, 1.0 + 0j, **fields)


def test_rank1_recover_exact_voltages():
    v = np.array([1.0, 0.9 * np.exp(-0.1j), 1.05 * np.exp(0.05j)])
    result = rank1_recover(np.outer(v, v.conj()))
    assert result.rank_one
    np.testing.assert_allclose(result.voltages, v, atol=1e-10)
    assert result.residual <= 1e-10


def test_rank1_recover_rejects_rank_two():
    v = np.array([1.0, 0.9 * np.exp(-0.1j), 1.05 * np.exp(0.05j)])
    u = np.array([0.0, 0.3, -0.2j])
    result = rank1_recover(np.outer(v, v.conj()) + np.outer(u, u.conj()))
    assert not result.rank_one
    assert result.voltages is None
    assert result.ratio > 1e-6


@pytest.mark.parametrize("matrix", [np.ones((2, 3)), np.array([[1.0, 2.0], [0.0, 1.0]])])
def test_rank1_recover_rejects_non_hermitian(matrix):
    with pytest.raises(NonHermitianError):
        rank1_recover(matrix)


def test_recover_voltages_from_exact_point(base_net):
    vm = np.array([1.02, 0.98, 1.01])
    va = np.array([0.0, -0.12, 0.04])
    recovery = recover_voltages(base_net, ac_point_to_w(base_net, vm, va))
    assert recovery.rank_one
    np.testing.assert_allclose(recovery.vm, vm, atol=1e-12)
    np.testing.assert_allclose(recovery.va, va, atol=1e-12)


def test_w_and_c_points_map_into_each_other(base_net, base_soc, base_soc_c):
    w_prog, w_sol = base_soc
    c_prog, c_sol = base_soc_c
    lifted = map_w_to_c(w_prog, w_sol, base_net)
    assert lifted.report.passed, lifted.report.residuals
    assert lifted.objective == pytest.approx(w_sol.objective, rel=1e-6)
    projected = map_c_to_w(c_prog, c_sol, base_net)
    assert projected.report.passed, projected.report.residuals


def test_mapping_rejects_infeasible_input(base_net):
    prog = build_soc(base_net, "C")
    with pytest.raises(InfeasiblePointError):
        map_c_to_w(prog, np.zeros(prog.n_vars), base_net)
    with pytest.raises(ValueError):
        map_w_to_c(prog, np.zeros(prog.n_vars), base_net)


def test_case3_gaps(base_net, cfg):
    report = solve_case(base_net, cfg=cfg)
    assert report.ac_value == pytest.approx(CASE3_AC, rel=1e-3)
    assert report.gap("soc") == pytest.approx(1.32, abs=0.15)
    assert report.gap("qc") == pytest.approx(1.24, abs=0.15)
    assert report.gap("cp") == pytest.approx(2.99, abs=0.05)
    assert report.all_optimal


def test_angle_limited_case_gaps(sad_net, cfg):
    report = solve_case(sad_net, ["soc", "qc"], cfg)
    assert report.gap("soc") == pytest.approx(4.28, abs=0.2)
    assert report.gap("qc") == pytest.approx(1.24, abs=0.2)
    # QC tightens SOC once the angle limits bind
    assert report.result("qc").bound > report.result("soc").bound


def test_dominance_holds(base_net, cfg):
    report = dominance_suite(base_net, cfg=cfg)
    assert report.holds, report.checks
    assert set(report.checks) == {"cp<=soc", "soc<=qc", "qc<=ac"}


def test_dominance_with_external_bound(base_net, cfg, base_qc):
    qc_bound = base_qc[1].objective
    report = dominance_suite(base_net, sdp_bound=qc_bound + 10.0, cfg=cfg)
    assert report.checks["soc<=sdp"] is True
    assert report.checks["sdp<=ac"] is True
    assert report.sdp_position == "above qc"


def test_w_c_equivalence(base_net, cfg):
    result = check_equivalence(base_net, cfg)
    assert result.ok, result


def test_bench_rows(base_net, cfg):
    assert bench_wc(base_net, repetitions=0) == []
    rows = bench_wc(base_net, repetitions=1, cfg=cfg)
    assert [row.formulation for row in rows] == ["W-SOC", "C-SOC", "W-QC", "C-QC"]
    assert all(row.status == "optimal" for row in rows)
    lines = bench_to_csv(rows).splitlines()
    assert lines[0].split(",") == list(BENCH_COLUMNS)
    assert len(lines) == 5


def test_parse_relaxations():
    assert parse_relaxations(" SOC, qc,soc") == ["soc", "qc"]
    assert parse_relaxations(["cp"]) == ["cp"]
    with pytest.raises(ValueError):
        parse_relaxations("soc,sdp")
    with pytest.raises(ValueError):
        parse_relaxations(" , ")


def test_perturbed_network_adds_taps_and_shunts(base_net, rng):
    net = perturbed_network(base_net, rng)
    assert net.name == f"{base_net.name}__ext"
    assert all(0.9 <= br.tap_mag <= 1.1 for br in net.branches)
    assert all(bus.shunt_g > 0.0 for bus in net.buses)
    assert validate(net) == []


def test_rank1_recover_random_profiles(rng):
    for _ in range(100):
        n = int(rng.integers(2, 7))
        v = rng.uniform(0.9, 1.1, n) * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
        result = rank1_recover(np.outer(v, v.conj()))
        assert result.rank_one
        # recovered up to the angle of the reference bus
        np.testing.assert_allclose(result.voltages, v * np.exp(-1j * np.angle(v[0])), atol=1e-9)


def test_rank1_recover_rejects_identity():
    result = rank1_recover(np.eye(3))
    assert result.rank_one is False
    assert result.voltages is None


@pytest.fixture(scope="module", params=[1, 2, 3])
def extended_net(request, base_net):
    return perturbed_network(base_net, np.random.default_rng(request.param))


@pytest.mark.parametrize("kind", ["soc", "qc"])
def test_w_c_equivalence_on_extended_networks(extended_net, cfg, kind):
    result = check_equivalence(extended_net, cfg, kind=kind)
    assert result.ok, result
    assert result.relative_difference <= 1e-6
    assert result.w_to_c is not None and result.w_to_c <= 1e-6
    assert result.c_to_w is not None and result.c_to_w <= 1e-6


def test_soc_below_qc_on_extended_networks(extended_net, cfg):
    soc = solve_conic(build_soc(extended_net, "W"), cfg)
    qc = solve_conic(build_qc(extended_net, "W"), cfg)
    assert soc.ok and qc.ok
    assert soc.objective <= qc.objective + 1e-6 * max(1.0, abs(qc.objective))


STRUCTURAL = ("w_cone", "c_cone", "loss_p", "loss_q", "flow_p", "flow_q")
RELAXATION_BUILDERS = [(build_soc, "W"), (build_soc, "C"), (build_qc, "W"), (build_qc, "C")]


def _polar(net, sol):
    lay = build_ac(net).meta["layout"]
    x = sol.x
    return (
        x[lay.vm : lay.vm + lay.n_bus],
        x[lay.va : lay.va + lay.n_bus],
        x[lay.pg : lay.pg + lay.n_gen],
        x[lay.qg : lay.qg + lay.n_gen],
    )


def _structural(group):
    return group in STRUCTURAL or group.startswith("qc_")


@pytest.mark.parametrize("builder,variant", RELAXATION_BUILDERS)
@pytest.mark.parametrize("case", ["base", "sad"])
def test_ac_optimum_lies_in_relaxation(request, builder, variant, case):
    net = request.getfixturevalue(f"{case}_net")
    vm, va, pg, qg = _polar(net, request.getfixturevalue(f"{case}_ac"))
    ac_residuals = certify_voltages(net, vm, va, pg, qg).residuals
    prog = builder(net, variant)
    residuals = certify_solution(prog, relaxation_point(prog, net, vm, va, pg, qg)).residuals
    for group, value in residuals.items():
        # nodal balance carries the heuristic's own feasibility error, nothing else may
        allowed = ac_residuals.get(group, 0.0) if group in ("kcl_p", "kcl_q") else 0.0
        assert value <= allowed + 1e-9, (group, value)


@pytest.mark.parametrize("builder,variant", RELAXATION_BUILDERS)
def test_random_profiles_satisfy_relaxation_structure(extended_net, rng, builder, variant):
    prog = builder(extended_net, variant)
    n = extended_net.n_bus
    lo = np.array([bus.v_min for bus in extended_net.buses])
    hi = np.array([bus.v_max for bus in extended_net.buses])
    ref = extended_net.bus_index[extended_net.reference_bus]
    pg = np.array([min(max(0.0, gen.p_min), gen.p_max) for gen in extended_net.generators])
    qg = np.array([min(max(0.0, gen.q_min), gen.q_max) for gen in extended_net.generators])
    for _ in range(20):
        vm = rng.uniform(lo, hi)
        va = rng.uniform(-0.1, 0.1, n)
        va[ref] = 0.0
        residuals = certify_solution(prog, relaxation_point(prog, extended_net, vm, va, pg, qg)).residuals
        for group, value in residuals.items():
            if _structural(group):
                assert value <= 1e-9, (group, value)
