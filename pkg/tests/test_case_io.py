import math

import pytest

from opfrelax.case_io import (
    builtin_case,
    builtin_case_text,
    load_case,
    parse_case,
    read_case_file,
    write_case,
)
from opfrelax.errors import CaseParseError, UnknownCaseError, UnsupportedCaseError
from opfrelax.network import DEFAULT_ANGLE_MAX

SMALL_CASE = """\
function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0 0 0 0 1 1 0 230 1 1.05 0.95;
    2 1 50 10 0 5 1 1 0 230 1 1.05 0.95;  % load bus
];
mpc.gen = [
    1 0 0 100 -100 1 100 1 200 0;
];
mpc.branch = [
    1 2 0.01 0.1 0.02 100 100 100 0 0 1 -20 20;
];
mpc.gencost = [
    2 0 0 2 12 0;
];
"""


def test_parse_small_case():
    net = parse_case(SMALL_CASE)
    assert net.name == "tiny"
    assert net.reference_bus == 1
    bus = net.bus(2)
    assert bus.p_load == pytest.approx(0.5)
    assert bus.shunt_b == pytest.approx(0.05)
    gen = net.generators[0]
    assert (gen.p_min, gen.p_max) == (0.0, 2.0)
    assert (gen.c2, gen.c1, gen.c0) == (0.0, 12.0, 0.0)
    br = net.branches[0]
    assert br.tap_mag == 1.0
    assert br.s_max == pytest.approx(1.0)
    assert br.angle_max == pytest.approx(math.radians(20.0))


def test_builtin_cases_differ_only_in_pad():
    base, sad = builtin_case("case3_base"), builtin_case("case3_sad18")
    assert [br.angle_max for br in base.branches] == [pytest.approx(math.radians(30.0))] * 3
    assert [br.angle_max for br in sad.branches] == [pytest.approx(math.radians(18.0))] * 3
    assert base.buses == sad.buses
    assert base.generators == sad.generators


def test_unknown_builtin():
    with pytest.raises(UnknownCaseError):
        builtin_case("case9")
    with pytest.raises(UnknownCaseError):
        load_case("builtin:nope")


def test_load_case_from_path(tmp_path):
    path = tmp_path / "mycase.m"
    path.write_text(builtin_case_text("case3_base"))
    name, net = load_case(str(path))
    assert name == "mycase"
    assert net.n_bus == 3


def test_load_case_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_case(str(tmp_path / "absent.m"))


def test_write_then_parse_reproduces_network(base_net):
    again = parse_case(write_case(base_net))
    assert again.name == base_net.name
    assert again.reference_bus == base_net.reference_bus
    for a, b in zip(again.buses, base_net.buses):
        assert a.id == b.id
        assert a.load == pytest.approx(b.load)
        assert (a.v_min, a.v_max) == (b.v_min, b.v_max)
    for a, b in zip(again.generators, base_net.generators):
        assert a.p_max == b.p_max
        assert (a.c2, a.c1) == (b.c2, b.c1)
    for a, b in zip(again.branches, base_net.branches):
        assert (a.from_bus, a.to_bus, a.r, a.x, a.b_charge) == (b.from_bus, b.to_bus, b.r, b.x, b.b_charge)
        assert a.angle_max == pytest.approx(b.angle_max)
        assert a.s_max == pytest.approx(b.s_max)


def test_unlimited_pad_maps_to_default():
    net = parse_case(SMALL_CASE.replace("-20 20", "0 0"))
    assert net.branches[0].angle_max == DEFAULT_ANGLE_MAX


def test_missing_section():
    text = SMALL_CASE.split("mpc.gencost")[0]
    with pytest.raises(CaseParseError, match="gencost"):
        read_case_file(text)


def test_bad_number_reports_line():
    with pytest.raises(CaseParseError) as info:
        read_case_file(SMALL_CASE.replace("0.01 0.1", "0.01 abc"))
    assert info.value.line == 12


@pytest.mark.parametrize(
    "old, new",
    [
        ("mpc.version = '2';", "mpc.version = '1';"),
        ("2 0 0 2 12 0;", "1 0 0 2 12 0;"),
        ("mpc.gencost = [", "mpc.areas = [1 1];\nmpc.gencost = ["),
    ],
)
def test_unsupported_features(old, new):
    with pytest.raises(UnsupportedCaseError):
        parse_case(SMALL_CASE.replace(old, new))


def test_short_rows_rejected():
    with pytest.raises(CaseParseError, match="columns"):
        read_case_file(SMALL_CASE.replace("1 0 0 100 -100 1 100 1 200 0;", "1 0 0 100;"))


def test_out_of_service_elements_dropped():
    text = SMALL_CASE.replace("1 2 0.01 0.1 0.02 100 100 100 0 0 1 -20 20;", "1 2 0.01 0.1 0.02 100 100 100 0 0 0 -20 20;")
    assert parse_case(text).n_branch == 0
