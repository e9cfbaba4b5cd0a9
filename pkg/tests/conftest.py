from __future__ import annotations

import numpy as np
import pytest

from opfrelax.analysis import run_ac
from opfrelax.case_io import builtin_case
from opfrelax.config import SolverConfig
from opfrelax.conic_solver import solve_conic
from opfrelax.formulations import build_copper_plate, build_qc, build_soc


@pytest.fixture(scope="session")
def base_net():
    return builtin_case("case3_base")


@pytest.fixture(scope="session")
def sad_net():
    return builtin_case("case3_sad18")


@pytest.fixture(scope="session")
def cfg():
    return SolverConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def base_ac(base_net, cfg):
    return run_ac(base_net, "cost", cfg)


@pytest.fixture(scope="session")
def sad_ac(sad_net, cfg):
    return run_ac(sad_net, "cost", cfg)


@pytest.fixture(scope="session")
def base_soc(base_net, cfg):
    prog = build_soc(base_net, "W")
    return prog, solve_conic(prog, cfg)


@pytest.fixture(scope="session")
def base_soc_c(base_net, cfg):
    prog = build_soc(base_net, "C")
    return prog, solve_conic(prog, cfg)


@pytest.fixture(scope="session")
def base_qc(base_net, cfg):
    prog = build_qc(base_net, "W")
    return prog, solve_conic(prog, cfg)


@pytest.fixture(scope="session")
def base_cp(base_net, cfg):
    prog = build_copper_plate(base_net)
    return prog, solve_conic(prog, cfg)
