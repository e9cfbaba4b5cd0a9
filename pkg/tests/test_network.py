import math
from dataclasses import replace

import pytest

from opfrelax.errors import NetworkError
from opfrelax.network import (
    DEFAULT_ANGLE_MAX,
    Branch,
    Bus,
    Generator,
    Network,
    branch_admittance,
    require_valid,
    total_load,
    validate,
)


def _two_bus(**branch_fields) -> Network:
    return Network(
        base_mva=100.0,
        buses=(Bus(1, 0.9, 1.1), Bus(2, 0.9, 1.1, p_load=0.5, q_load=0.1)),
        generators=(Generator(1, 0.0, 2.0, -1.0, 1.0, c1=10.0),),
        branches=(Branch(1, 2, **{"r": 0.01, "x": 0.1, **branch_fields}),),
        reference_bus=1,
        name="two_bus",
    )


def test_case3_loads_in_per_unit(base_net):
    assert base_net.n_bus == 3
    assert base_net.n_gen == 3
    assert base_net.n_branch == 3
    assert total_load(base_net) == pytest.approx(complex(3.15, 1.30))
    assert base_net.bus(1).load == pytest.approx(complex(1.1, 0.4))


def test_case3_thermal_limit_only_on_3_2(base_net):
    limited = [(br.from_bus, br.to_bus, br.s_max) for br in base_net.branches if math.isfinite(br.s_max)]
    assert limited == [(3, 2, pytest.approx(0.5))]


def test_generator_cost_uses_mw():
    gen = Generator(1, 0.0, 5.0, 0.0, 0.0, c2=0.11, c1=5.0)
    assert gen.cost(1.0, 100.0) == pytest.approx(0.11 * 100.0**2 + 500.0)


def test_branch_admittance():
    br = Branch(1, 2, r=0.0, x=0.5)
    assert branch_admittance(br) == pytest.approx(complex(0.0, -2.0))
    assert br.tap == 1.0


def test_zero_impedance_rejected():
    with pytest.raises(NetworkError):
        branch_admittance(Branch(1, 2, r=0.0, x=0.0))
    assert any("zero impedance" in v for v in validate(_two_bus(x=0.0)))


def test_valid_network_has_no_violations():
    assert validate(_two_bus()) == []


@pytest.mark.parametrize(
    "fields, fragment",
    [
        ({"tap_mag": 0.0}, "tap ratio"),
        ({"angle_max": 2.0}, "PAD bound"),
        ({"s_max": -1.0}, "thermal limit"),
        ({"to_bus": 7}, "endpoint"),
    ],
)
def test_branch_violations(fields, fragment):
    messages = validate(_two_bus(**fields))
    assert any(fragment in m for m in messages)


def test_generator_and_bus_violations():
    net = _two_bus()
    bad = replace(
        net,
        buses=(Bus(1, 1.2, 1.1), net.buses[1], Bus(2, 0.9, 1.1)),
        generators=(Generator(1, 1.0, 0.0, 0.0, 0.0, c2=-1.0),),
        reference_bus=9,
    )
    messages = validate(bad)
    assert any("duplicate bus id 2" in m for m in messages)
    assert any("voltage bounds" in m for m in messages)
    assert any("reference bus 9" in m for m in messages)
    assert any("p_min > p_max" in m for m in messages)
    assert any("nonconvex" in m for m in messages)
    with pytest.raises(NetworkError):
        require_valid(bad)


def test_disconnected_network_is_still_valid():
    net = _two_bus()
    island = replace(net, buses=net.buses + (Bus(3, 0.9, 1.1),))
    assert not island.is_connected()
    assert validate(island) == []


def test_with_angle_limits_copies(base_net):
    loose = base_net.with_angle_limits(DEFAULT_ANGLE_MAX, name="loose")
    assert loose.name == "loose"
    assert all(br.angle_max == DEFAULT_ANGLE_MAX for br in loose.branches)
    assert base_net.branches[0].angle_max == pytest.approx(math.radians(30.0))
    assert loose.branches[1].s_max == base_net.branches[1].s_max
