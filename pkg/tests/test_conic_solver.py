import numpy as np
import pytest

from opfrelax.certify import certify_solution
from opfrelax.config import SolverConfig
from opfrelax.conic_solver import Cone, compile_program, solve_conic
from opfrelax.formulations import build_soc
from opfrelax.program import ConicProgram, LinExpr, SolveStatus


def test_lp_lower_bound():
    prog = ConicProgram(name="lp")
    x = prog.add_var("x")
    prog.add_linear(LinExpr.of(x), ">=", 3.0, "floor")
    prog.set_objective([], LinExpr.of(x))
    sol = solve_conic(prog)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-6)
    assert sol.value("x") == pytest.approx(3.0, abs=1e-6)


def test_rotated_cone_bounds_product():
    # max z s.t. z^2 <= u w, u = w = 1  ->  z = 1
    prog = ConicProgram(name="cone")
    z = prog.add_var("z")
    u = prog.add_var("u", 1.0, 1.0)
    w = prog.add_var("w", 1.0, 1.0)
    prog.add_rotated_cone([LinExpr.of(z)], LinExpr.of(u), LinExpr.of(w), "cone")
    prog.set_objective([], LinExpr.of(z, -1.0))
    sol = solve_conic(prog)
    assert sol.ok
    assert sol.value("z") == pytest.approx(1.0, abs=1e-6)
    assert certify_solution(prog, sol).passed


def test_convex_quadratic_objective_and_row():
    # min (x - 2)^2 s.t. x^2 <= 1  ->  x = 1, objective 1
    prog = ConicProgram(name="qp")
    x = prog.add_var("x")
    prog.add_square_le([LinExpr.of(x)], LinExpr(), 1.0, "disc")
    prog.set_objective([(x, x, 1.0)], LinExpr({x: -4.0}, 4.0))
    sol = solve_conic(prog)
    assert sol.ok
    assert sol.value("x") == pytest.approx(1.0, abs=1e-6)
    assert sol.objective == pytest.approx(1.0, abs=1e-6)


def test_weak_duality_on_lp():
    prog = ConicProgram(name="lp2")
    x = prog.add_var("x", 0.0)
    y = prog.add_var("y", 0.0)
    prog.add_linear(LinExpr({x: 1.0, y: 2.0}), ">=", 4.0, "cover")
    prog.add_linear(LinExpr({x: 3.0, y: 1.0}), ">=", 6.0, "cover")
    prog.set_objective([], LinExpr({x: 1.0, y: 1.0}))
    sol = solve_conic(prog)
    assert sol.ok
    # optimum at x = 1.6, y = 1.2
    assert sol.objective == pytest.approx(2.8, abs=1e-6)
    assert sol.dual_objective is not None
    assert sol.dual_objective <= sol.objective + 1e-6


def test_infeasible_lp_is_not_optimal():
    prog = ConicProgram(name="empty")
    x = prog.add_var("x")
    prog.add_linear(LinExpr.of(x), ">=", 3.0, "floor")
    prog.add_linear(LinExpr.of(x), "<=", 1.0, "cap")
    prog.set_objective([], LinExpr.of(x))
    sol = solve_conic(prog)
    assert sol.status is not SolveStatus.OPTIMAL


def test_iteration_limit_reported():
    prog = ConicProgram(name="lp")
    x = prog.add_var("x")
    y = prog.add_var("y", 0.0)
    prog.add_rotated_cone([LinExpr.of(x)], LinExpr.of(y), LinExpr(const=1.0), "cone")
    prog.add_linear(LinExpr.of(y), "<=", 4.0, "cap")
    prog.set_objective([], LinExpr.of(x, -1.0))
    sol = solve_conic(prog, SolverConfig(max_iter=1))
    assert sol.status in (SolveStatus.ITERATION_LIMIT, SolveStatus.NUMERIC_WARNING)


def test_compile_shapes():
    prog = ConicProgram()
    x = prog.add_var("x", 0.0, 1.0)
    y = prog.add_var("y", 2.0, 2.0)
    prog.add_rotated_cone([LinExpr.of(x)], LinExpr.of(y), LinExpr(const=1.0), "cone")
    form = compile_program(prog)
    # the fixed variable becomes an equality, the boxed one two inequalities
    assert form.A.shape == (1, 2)
    assert form.n_l == 2
    assert form.soc == [3]


def test_cone_step_and_margin():
    cone = Cone(1, [3])
    u = np.array([1.0, 2.0, 0.5, 0.5])
    assert cone.margin(u) == pytest.approx(1.0)
    assert cone.margin(np.array([1.0, 0.5, 0.5, 0.5])) == pytest.approx(0.5 - np.sqrt(0.5))
    du = np.array([-1.0, 0.0, 0.0, 0.0])
    assert cone.max_step(u, du) == pytest.approx(1.0)
    e = cone.identity()
    np.testing.assert_allclose(cone.circ(e, u), u)
    np.testing.assert_allclose(cone.circ(u, cone.inv_circ(u, e)), e, atol=1e-12)


def test_case3_soc_is_certified(base_soc):
    prog, sol = base_soc
    assert sol.ok
    report = certify_solution(prog, sol, tol=1e-6)
    assert report.passed, report.residuals


def test_repeated_solves_are_identical(base_net):
    first = solve_conic(build_soc(base_net))
    second = solve_conic(build_soc(base_net))
    assert first.iterations == second.iterations
    assert np.array_equal(first.x, second.x)
