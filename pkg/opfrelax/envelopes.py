"""
Convex envelopes of x², xy, sin x and cos x as small constraint sets.

An `EnvelopeSet` is expressed over local symbols: the argument names in
`args` and the auxiliary variable `aux`. Formulation builders substitute
program expressions for those symbols when they emit the cuts.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Tuple

from .errors import EnvelopeDomainError

AUX = "aux"


@dataclass(frozen=True)
class Cut:
    """sum(linear[s] * s) + sum(square[s] * s**2) <sense> rhs."""

    linear: Dict[str, float]
    rhs: float
    sense: str = "<="
    square: Dict[str, float] = field(default_factory=dict)

    @property
    def is_quadratic(self) -> bool:
        return any(coef != 0.0 for coef in self.square.values())

    def lhs(self, point: Mapping[str, float]) -> float:
        value = sum(coef * point[name] for name, coef in self.linear.items())
        value += sum(coef * point[name] ** 2 for name, coef in self.square.items())
        return value

    def violation(self, point: Mapping[str, float]) -> float:
        gap = self.lhs(point) - self.rhs
        if self.sense == "<=":
            return max(gap, 0.0)
        if self.sense == ">=":
            return max(-gap, 0.0)
        return abs(gap)


@dataclass(frozen=True)
class EnvelopeSet:
    kind: str
    args: Tuple[str, ...]
    aux_lo: float
    aux_hi: float
    cuts: Tuple[Cut, ...]
    aux: str = AUX

    @property
    def linear_cuts(self) -> List[Cut]:
        return [c for c in self.cuts if not c.is_quadratic]

    @property
    def quadratic_cuts(self) -> List[Cut]:
        return [c for c in self.cuts if c.is_quadratic]


def _check_interval(lo: float, hi: float, what: str) -> None:
    if math.isnan(lo) or math.isnan(hi):
        raise EnvelopeDomainError(f"{what}: NaN bound")
    if lo > hi:
        raise EnvelopeDomainError(f"{what}: inverted bounds [{lo}, {hi}]")


def _check_finite(lo: float, hi: float, what: str) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise EnvelopeDomainError(f"{what}: unbounded interval [{lo}, {hi}]")


def _check_angle(theta_bound: float) -> None:
    if not (0.0 < theta_bound <= math.pi / 2.0):
        raise EnvelopeDomainError(f"angle bound {theta_bound} outside (0, pi/2]")


def square_envelope(x_lo: float, x_hi: float, arg: str = "x") -> EnvelopeSet:
    """aux >= x**2 and the secant aux <= (x_hi + x_lo) x - x_hi x_lo."""
    _check_interval(x_lo, x_hi, "square envelope")
    _check_finite(x_lo, x_hi, "square envelope")
    squares = (x_lo * x_lo, x_hi * x_hi)
    aux_lo = 0.0 if x_lo <= 0.0 <= x_hi else min(squares)
    cuts = (
        Cut(linear={AUX: -1.0}, square={arg: 1.0}, rhs=0.0),
        Cut(linear={AUX: 1.0, arg: -(x_hi + x_lo)}, rhs=-x_hi * x_lo),
    )
    return EnvelopeSet("square", (arg,), aux_lo, max(squares), cuts)


def mccormick(
    x_lo: float, x_hi: float, y_lo: float, y_hi: float, args: Tuple[str, str] = ("x", "y")
) -> EnvelopeSet:
    """The four McCormick cuts of aux = x * y."""
    _check_interval(x_lo, x_hi, "mccormick x")
    _check_interval(y_lo, y_hi, "mccormick y")
    _check_finite(x_lo, x_hi, "mccormick x")
    _check_finite(y_lo, y_hi, "mccormick y")
    x, y = args
    corners = (x_lo * y_lo, x_lo * y_hi, x_hi * y_lo, x_hi * y_hi)
    # aux >= a y + b x - a b  <=>  a y + b x - aux <= a b
    cuts = (
        Cut(linear={y: x_lo, x: y_lo, AUX: -1.0}, rhs=x_lo * y_lo),
        Cut(linear={y: x_hi, x: y_hi, AUX: -1.0}, rhs=x_hi * y_hi),
        Cut(linear={AUX: 1.0, y: -x_lo, x: -y_hi}, rhs=-x_lo * y_hi),
        Cut(linear={AUX: 1.0, y: -x_hi, x: -y_lo}, rhs=-x_hi * y_lo),
    )
    return EnvelopeSet("product", (x, y), min(corners), max(corners), cuts)


def sine_envelope(theta_bound: float, arg: str = "x") -> EnvelopeSet:
    """Sine envelope on [-theta_bound, theta_bound]: tangents at +-theta_bound/2."""
    _check_angle(theta_bound)
    half = theta_bound / 2.0
    c, s = math.cos(half), math.sin(half)
    cuts = (
        # aux <= c (x - half) + s
        Cut(linear={AUX: 1.0, arg: -c}, rhs=s - c * half),
        # aux >= c (x + half) - s
        Cut(linear={AUX: 1.0, arg: -c}, rhs=c * half - s, sense=">="),
    )
    bound = math.sin(theta_bound)
    return EnvelopeSet("sine", (arg,), -bound, bound, cuts)


def cosine_envelope(theta_bound: float, arg: str = "x") -> EnvelopeSet:
    """Cosine envelope on [-theta_bound, theta_bound]."""
    _check_angle(theta_bound)
    curvature = (1.0 - math.cos(theta_bound)) / (theta_bound * theta_bound)
    floor = math.cos(theta_bound)
    cuts = (
        Cut(linear={AUX: 1.0}, square={arg: curvature}, rhs=1.0),
        Cut(linear={AUX: 1.0}, rhs=floor, sense=">="),
    )
    return EnvelopeSet("cosine", (arg,), floor, 1.0, cuts)


def compose_product(
    env_a: EnvelopeSet, env_b: EnvelopeSet, args: Tuple[str, str] = ("a", "b")
) -> EnvelopeSet:
    """McCormick over the auxiliaries of two envelopes, using their aux bounds."""
    for env in (env_a, env_b):
        if not (math.isfinite(env.aux_lo) and math.isfinite(env.aux_hi)):
            raise EnvelopeDomainError(f"{env.kind} envelope has an unbounded auxiliary")
    return mccormick(env_a.aux_lo, env_a.aux_hi, env_b.aux_lo, env_b.aux_hi, args=args)


def evaluate(env: EnvelopeSet, point: Mapping[str, float]) -> float:
    """Largest cut violation of `env` at `point` (0.0 when every cut holds)."""
    worst = 0.0
    aux = point[env.aux]
    if aux < env.aux_lo:
        worst = env.aux_lo - aux
    elif aux > env.aux_hi:
        worst = aux - env.aux_hi
    for cut in env.cuts:
        worst = max(worst, cut.violation(point))
    return worst


def dump_cuts_csv(envs: Iterable[Tuple[str, EnvelopeSet]]) -> str:
    """One CSV row per cut: label, kind, cut index, sense, rhs, terms."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["envelope", "kind", "cut", "sense", "rhs", "terms", "aux_lo", "aux_hi"])
    for label, env in envs:
        for k, cut in enumerate(env.cuts):
            terms = [f"{name}:{coef!r}" for name, coef in sorted(cut.linear.items())]
            terms += [f"{name}^2:{coef!r}" for name, coef in sorted(cut.square.items())]
            writer.writerow(
                [label, env.kind, k, cut.sense, repr(cut.rhs), ";".join(terms), repr(env.aux_lo), repr(env.aux_hi)]
            )
    return buf.getvalue()
