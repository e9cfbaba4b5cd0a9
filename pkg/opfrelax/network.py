"""
In-memory power network in per-unit.

Angles are radians, impedances and admittances are per-unit on the case MVA
base, and generator cost coefficients apply to MW (the Matpower/NESTA
convention), so costs are evaluated on `base_mva * p` rather than on `p`.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Tuple

from .errors import NetworkError

logger = logging.getLogger(__name__)

# Largest PAD bound for which the sine/cosine envelopes stay valid.
DEFAULT_ANGLE_MAX = (math.pi / 2.0) * (1.0 - 1e-6)


def to_pu(value_mw: float, base_mva: float) -> float:
    return value_mw / base_mva


def to_mw(value_pu: float, base_mva: float) -> float:
    return value_pu * base_mva


@dataclass(frozen=True)
class Bus:
    id: int
    v_min: float
    v_max: float
    p_load: float = 0.0
    q_load: float = 0.0
    shunt_g: float = 0.0
    shunt_b: float = 0.0

    @property
    def load(self) -> complex:
        return complex(self.p_load, self.q_load)


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    c2: float = 0.0
    c1: float = 0.0
    c0: float = 0.0

    def cost(self, p_pu: float, base_mva: float) -> float:
        """Fuel cost in $/h of a per-unit active injection."""
        p_mw = p_pu * base_mva
        return self.c2 * p_mw * p_mw + self.c1 * p_mw + self.c0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charge: float = 0.0
    tap_mag: float = 1.0
    tap_shift: float = 0.0
    s_max: float = math.inf
    angle_max: float = DEFAULT_ANGLE_MAX

    @property
    def impedance(self) -> complex:
        return complex(self.r, self.x)

    @property
    def admittance(self) -> complex:
        return branch_admittance(self)

    @property
    def tap(self) -> complex:
        return self.tap_mag * cmath.exp(1j * self.tap_shift)


@dataclass(frozen=True)
class Network:
    base_mva: float
    buses: Tuple[Bus, ...]
    generators: Tuple[Generator, ...]
    branches: Tuple[Branch, ...]
    reference_bus: int
    name: str = "network"
    meta: Dict[str, str] = field(default_factory=dict, compare=False, hash=False)

    @cached_property
    def bus_index(self) -> Dict[int, int]:
        return {bus.id: k for k, bus in enumerate(self.buses)}

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index[bus_id]]

    def generators_at(self, bus_id: int) -> List[int]:
        return [k for k, gen in enumerate(self.generators) if gen.bus == bus_id]

    def is_connected(self) -> bool:
        if not self.buses:
            return True
        parent = list(range(self.n_bus))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for br in self.branches:
            i = self.bus_index.get(br.from_bus)
            j = self.bus_index.get(br.to_bus)
            if i is None or j is None:
                continue
            parent[find(i)] = find(j)
        return len({find(k) for k in range(self.n_bus)}) == 1

    def with_angle_limits(self, angle_max: float, name: str | None = None) -> "Network":
        """Copy of the network with every PAD bound set to `angle_max` radians."""
        branches = tuple(
            Branch(
                from_bus=br.from_bus,
                to_bus=br.to_bus,
                r=br.r,
                x=br.x,
                b_charge=br.b_charge,
                tap_mag=br.tap_mag,
                tap_shift=br.tap_shift,
                s_max=br.s_max,
                angle_max=angle_max,
            )
            for br in self.branches
        )
        return Network(
            base_mva=self.base_mva,
            buses=self.buses,
            generators=self.generators,
            branches=branches,
            reference_bus=self.reference_bus,
            name=name or self.name,
            meta=dict(self.meta),
        )


def branch_admittance(branch: Branch) -> complex:
    """Series admittance Y = 1/Z of a branch."""
    denom = branch.r * branch.r + branch.x * branch.x
    if denom <= 0.0:
        raise NetworkError(f"zero impedance on branch {branch.from_bus}-{branch.to_bus}")
    return complex(branch.r / denom, -branch.x / denom)


def total_load(net: Network) -> complex:
    return complex(
        sum(bus.p_load for bus in net.buses),
        sum(bus.q_load for bus in net.buses),
    )


def validate(net: Network) -> List[str]:
    """Return a list of human-readable invariant violations (empty when valid)."""
    violations: List[str] = []

    seen: set[int] = set()
    for bus in net.buses:
        if bus.id in seen:
            violations.append(f"duplicate bus id {bus.id}")
        seen.add(bus.id)
        if not (0.0 < bus.v_min <= bus.v_max):
            violations.append(f"bus {bus.id}: voltage bounds must satisfy 0 < v_min <= v_max")
        if not (math.isfinite(bus.p_load) and math.isfinite(bus.q_load)):
            violations.append(f"bus {bus.id}: non-finite load")

    if net.base_mva <= 0.0:
        violations.append("base MVA must be positive")
    if net.reference_bus not in seen:
        violations.append(f"reference bus {net.reference_bus} does not exist")
    if not net.generators:
        violations.append("network has no generator")

    for k, gen in enumerate(net.generators):
        if gen.bus not in seen:
            violations.append(f"generator {k}: bus {gen.bus} does not exist")
        if gen.p_min > gen.p_max:
            violations.append(f"generator {k}: p_min > p_max")
        if gen.q_min > gen.q_max:
            violations.append(f"generator {k}: q_min > q_max")
        if gen.c2 < 0.0:
            violations.append(f"generator {k}: negative quadratic cost (nonconvex)")

    for k, br in enumerate(net.branches):
        tag = f"branch {k} ({br.from_bus}-{br.to_bus})"
        if br.from_bus not in seen or br.to_bus not in seen:
            violations.append(f"{tag}: endpoint does not exist")
        if br.r * br.r + br.x * br.x <= 0.0:
            violations.append(f"{tag}: zero impedance")
        if br.tap_mag <= 0.0:
            violations.append(f"{tag}: tap ratio must be positive")
        if not (0.0 < br.angle_max <= math.pi / 2.0):
            violations.append(f"{tag}: PAD bound outside (0, pi/2]")
        if br.s_max <= 0.0:
            violations.append(f"{tag}: thermal limit must be positive")

    if not violations and not net.is_connected():
        logger.warning("network %s is not connected", net.name)
    return violations


def require_valid(net: Network) -> Network:
    violations = validate(net)
    if violations:
        raise NetworkError("; ".join(violations))
    return net
