import math

import numpy as np
import pytest

from opfrelax.envelopes import (
    AUX,
    compose_product,
    cosine_envelope,
    dump_cuts_csv,
    evaluate,
    mccormick,
    sine_envelope,
    square_envelope,
)
from opfrelax.errors import EnvelopeDomainError


def test_square_secant_at_midpoint():
    env = square_envelope(0.9, 1.1, arg="v")
    secant = env.linear_cuts[0]
    # aux <= 2.0 v - 0.99 at v = 1.0
    assert secant.rhs - secant.linear["v"] * 1.0 == pytest.approx(1.01)
    assert evaluate(env, {"v": 1.0, AUX: 1.01}) == pytest.approx(0.0, abs=1e-12)
    assert evaluate(env, {"v": 1.0, AUX: 1.02}) == pytest.approx(0.01)
    assert evaluate(env, {"v": 1.0, AUX: 0.99}) == pytest.approx(0.01)
    assert (env.aux_lo, env.aux_hi) == pytest.approx((0.81, 1.21))


def test_square_bounds_straddling_zero():
    env = square_envelope(-1.0, 2.0)
    assert env.aux_lo == 0.0
    assert env.aux_hi == 4.0


def test_mccormick_holds_on_the_box(rng):
    env = mccormick(0.9, 1.1, -0.5, 0.5)
    for x, y in rng.uniform([0.9, -0.5], [1.1, 0.5], size=(200, 2)):
        assert evaluate(env, {"x": x, "y": y, AUX: x * y}) <= 1e-12
    assert len(env.cuts) == 4


def test_mccormick_exact_at_corners():
    env = mccormick(1.0, 2.0, 3.0, 4.0)
    # at a corner the under and over estimators meet the product
    assert evaluate(env, {"x": 2.0, "y": 4.0, AUX: 8.0}) == 0.0
    assert evaluate(env, {"x": 2.0, "y": 4.0, AUX: 8.1}) > 0.0
    assert evaluate(env, {"x": 2.0, "y": 4.0, AUX: 7.9}) > 0.0


def test_sine_envelope_contains_sine():
    theta = math.radians(30.0)
    env = sine_envelope(theta, arg="d")
    for d in np.linspace(-theta, theta, 101):
        assert evaluate(env, {"d": d, AUX: math.sin(d)}) <= 1e-12
    assert env.aux_hi == pytest.approx(0.5)


def test_sine_tangents_at_half_bound():
    theta = math.radians(30.0)
    env = sine_envelope(theta, arg="d")
    upper = next(c for c in env.cuts if c.sense == "<=")
    half = theta / 2.0
    # the upper cut touches sin at +theta/2
    assert upper.lhs({"d": half, AUX: math.sin(half)}) == pytest.approx(upper.rhs)


def test_cosine_envelope_contains_cosine():
    theta = math.radians(18.0)
    env = cosine_envelope(theta, arg="d")
    for d in np.linspace(-theta, theta, 101):
        assert evaluate(env, {"d": d, AUX: math.cos(d)}) <= 1e-12
    assert env.aux_lo == pytest.approx(math.cos(theta))
    assert len(env.quadratic_cuts) == 1
    # the quadratic cut is tight at both ends and at zero
    assert evaluate(env, {"d": theta, AUX: math.cos(theta)}) == pytest.approx(0.0, abs=1e-12)
    assert evaluate(env, {"d": 0.0, AUX: 1.0}) == 0.0


def test_compose_product_uses_aux_bounds():
    vv = mccormick(0.9, 1.1, 0.9, 1.1)
    cos_env = cosine_envelope(math.radians(30.0))
    wc = compose_product(vv, cos_env)
    assert wc.aux_lo == pytest.approx(0.81 * math.cos(math.radians(30.0)))
    assert wc.aux_hi == pytest.approx(1.21)
    assert wc.args == ("a", "b")


@pytest.mark.parametrize("theta", [0.0, -0.1, math.pi / 2.0 + 1e-3, math.pi])
def test_bad_angle_bound(theta):
    with pytest.raises(EnvelopeDomainError):
        sine_envelope(theta)
    with pytest.raises(EnvelopeDomainError):
        cosine_envelope(theta)


def test_right_angle_is_allowed():
    env = cosine_envelope(math.pi / 2.0)
    assert env.aux_lo == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "lo, hi",
    [(1.1, 0.9), (float("nan"), 1.0), (0.0, float("inf"))],
)
def test_bad_intervals(lo, hi):
    with pytest.raises(EnvelopeDomainError):
        square_envelope(lo, hi)
    with pytest.raises(EnvelopeDomainError):
        mccormick(lo, hi, 0.0, 1.0)


def test_dump_cuts_csv():
    text = dump_cuts_csv([("square", square_envelope(0.9, 1.1, arg="v"))])
    lines = text.splitlines()
    assert lines[0] == "envelope,kind,cut,sense,rhs,terms,aux_lo,aux_hi"
    assert len(lines) == 3
    assert lines[1].startswith("square,square,0,<=,0.0,")
    assert "v^2:1.0" in lines[1]


def _worst(env, point):
    # vectorised evaluate(): every entry of `point` is an array of samples
    aux = point[AUX]
    worst = np.maximum(env.aux_lo - aux, aux - env.aux_hi).max()
    for cut in env.cuts:
        gap = cut.lhs(point) - cut.rhs
        worst = max(worst, float((gap if cut.sense == "<=" else -gap if cut.sense == ">=" else np.abs(gap)).max()))
    return worst


def test_envelopes_contain_their_functions_on_random_domains(rng):
    samples = 10_000
    for _ in range(100):
        x_lo, y_lo = rng.uniform(0.8, 1.0, 2)
        x_hi, y_hi = rng.uniform(x_lo + 0.01, 1.2), rng.uniform(y_lo + 0.01, 1.2)
        theta = rng.uniform(0.01, math.pi / 2.0)
        x = rng.uniform(x_lo, x_hi, samples)
        y = rng.uniform(y_lo, y_hi, samples)
        d = rng.uniform(-theta, theta, samples)

        vv = mccormick(x_lo, x_hi, y_lo, y_hi)
        cos_env, sin_env = cosine_envelope(theta, arg="d"), sine_envelope(theta, arg="d")
        checks = [
            (square_envelope(x_lo, x_hi, arg="v"), {"v": x, AUX: x * x}),
            (vv, {"x": x, "y": y, AUX: x * y}),
            (sin_env, {"d": d, AUX: np.sin(d)}),
            (cos_env, {"d": d, AUX: np.cos(d)}),
            (compose_product(vv, cos_env), {"a": x * y, "b": np.cos(d), AUX: x * y * np.cos(d)}),
            (compose_product(vv, sin_env), {"a": x * y, "b": np.sin(d), AUX: x * y * np.sin(d)}),
        ]
        for env, point in checks:
            assert _worst(env, point) <= 1e-10, (env.kind, x_lo, x_hi, y_lo, y_hi, theta)
