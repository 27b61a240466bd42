"""Domain types for the coupled gas/power system, with validation.

All quantities carry fixed units: MW, MWh, Mscm, Mscm/h, bar, hours, $.
Storage flow is signed with positive = injection into storage.  Pipelines
are directed; the declared from->to orientation is the positive flow
direction.  Types are immutable after validation and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np


class ValidationError(ValueError):
    """Input violates a model invariant; message names the first offender."""


@dataclass(frozen=True)
class Horizon:
    periods: int
    slot_hours: float = 1.0

    def validate(self):
        if self.periods < 1:
            raise ValidationError(f"horizon periods must be >= 1, got {self.periods}")
        if self.slot_hours <= 0:
            raise ValidationError(f"slot_hours must be positive, got {self.slot_hours}")


@dataclass(frozen=True)
class GasNode:
    id: str
    pressure_min: float
    pressure_max: float


@dataclass(frozen=True)
class GasSource:
    id: str
    node: str
    price: float            # $/Mscm
    flow_min: float         # Mscm/h
    flow_max: float
    daily_min: float        # Mscm over the horizon
    daily_max: float


@dataclass(frozen=True)
class GasStorage:
    id: str
    node: str
    price: float            # $/Mscm
    flow_min: float         # Mscm/h, negative = max withdrawal rate
    flow_max: float         # positive = max injection rate
    capacity_min: float     # Mscm
    capacity_max: float
    initial_volume: float


@dataclass(frozen=True)
class GasLoad:
    id: str
    node: str
    profile: str


@dataclass(frozen=True)
class Pipeline:
    id: str
    from_node: str
    to_node: str
    k_gf: float             # Mscm/(h*bar)
    k_lp: float             # Mscm/bar
    initial_linepack: float # Mscm


@dataclass(frozen=True)
class CompressorPipeline:
    id: str
    from_node: str
    to_node: str
    ratio_min: float
    ratio_max: float
    beta: float             # gas consumed per unit flow through
    initial_linepack: float


@dataclass(frozen=True)
class GasNetwork:
    nodes: tuple
    sources: tuple
    storages: tuple
    loads: tuple
    passive_pipelines: tuple
    active_pipelines: tuple
    storage_objective_sign: float = -1.0  # objective adds sign * price * flow

    def node_ids(self):
        return [n.id for n in self.nodes]

    def validate(self):
        ids = set()
        for n in self.nodes:
            if n.id in ids:
                raise ValidationError(f"duplicate gas node id {n.id!r}")
            ids.add(n.id)
            if not (0 <= n.pressure_min <= n.pressure_max):
                raise ValidationError(
                    f"gas node {n.id!r}: need 0 <= pressure_min <= pressure_max, "
                    f"got [{n.pressure_min}, {n.pressure_max}]")
        for s in self.sources:
            self._check_node(s.node, f"source {s.id!r}")
            if s.flow_min > s.flow_max:
                raise ValidationError(f"source {s.id!r}: flow_min > flow_max")
            if s.daily_min > s.daily_max:
                raise ValidationError(f"source {s.id!r}: daily_min > daily_max")
        for s in self.storages:
            self._check_node(s.node, f"storage {s.id!r}")
            if not (s.capacity_min <= s.initial_volume <= s.capacity_max):
                raise ValidationError(
                    f"storage {s.id!r}: initial volume {s.initial_volume} outside "
                    f"capacity [{s.capacity_min}, {s.capacity_max}]")
            if s.flow_min > s.flow_max:
                raise ValidationError(f"storage {s.id!r}: flow_min > flow_max")
        for d in self.loads:
            self._check_node(d.node, f"gas load {d.id!r}")
        pipe_ids = set()
        for p in list(self.passive_pipelines) + list(self.active_pipelines):
            if p.id in pipe_ids:
                raise ValidationError(f"duplicate pipeline id {p.id!r}")
            pipe_ids.add(p.id)
            self._check_node(p.from_node, f"pipeline {p.id!r}")
            self._check_node(p.to_node, f"pipeline {p.id!r}")
            if p.initial_linepack < 0:
                raise ValidationError(f"pipeline {p.id!r}: initial linepack < 0")
        for p in self.passive_pipelines:
            if p.k_gf <= 0 or p.k_lp <= 0:
                raise ValidationError(f"pipeline {p.id!r}: k_gf and k_lp must be > 0")
        for p in self.active_pipelines:
            if not (0 < p.ratio_min <= p.ratio_max):
                raise ValidationError(
                    f"compressor pipeline {p.id!r}: need 0 < ratio_min <= ratio_max")
            if p.beta < 0:
                raise ValidationError(f"compressor pipeline {p.id!r}: beta < 0")
        self._check_connectivity()

    def _check_node(self, node, who):
        if node not in {n.id for n in self.nodes}:
            raise ValidationError(f"{who} references unknown gas node {node!r}")

    def _check_connectivity(self):
        """Every load node must reach a supply-capable node through pipes."""
        adj = {n.id: set() for n in self.nodes}
        for p in list(self.passive_pipelines) + list(self.active_pipelines):
            adj[p.from_node].add(p.to_node)
            adj[p.to_node].add(p.from_node)
        supply = {s.node for s in self.sources} | {s.node for s in self.storages}
        for d in self.loads:
            if d.node in supply:
                continue
            seen = {d.node}
            stack = [d.node]
            found = False
            while stack:
                cur = stack.pop()
                if cur in supply:
                    found = True
                    break
                for nxt in adj[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            if not found:
                raise ValidationError(
                    f"gas load {d.id!r} at node {d.node!r} is disconnected from "
                    f"every source and storage")


@dataclass(frozen=True)
class Bus:
    id: str
    reference: bool = False


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    reactance: float
    rating: float


@dataclass(frozen=True)
class CoalUnit:
    id: str
    bus: str
    no_load_cost: float     # $ per on-period
    startup_cost: float
    shutdown_cost: float
    variable_cost: float    # $/MWh
    min_up: int
    min_down: int
    ramp_up: float          # MW/h
    ramp_down: float        # MW/h, stored as nonnegative magnitude
    p_min: float
    p_max: float
    initial_on: bool = False


@dataclass(frozen=True)
class GasFiredUnit:
    id: str
    bus: str
    gas_node: str
    capacity: float
    ramp_up: float
    ramp_down: float
    efficiency: float | None = None  # falls back to coupling default


@dataclass(frozen=True)
class PowerToGas:
    id: str
    bus: str
    gas_node: str
    capacity: float
    efficiency: float | None = None


@dataclass(frozen=True)
class ResSite:
    id: str
    bus: str
    profile: str


@dataclass(frozen=True)
class ElectricLoad:
    id: str
    bus: str
    profile: str


@dataclass(frozen=True)
class PowerNetwork:
    buses: tuple
    lines: tuple
    cfus: tuple
    gfus: tuple
    ptgs: tuple
    res_sites: tuple
    loads: tuple

    def bus_ids(self):
        return [b.id for b in self.buses]

    def reference_bus(self):
        return next(b.id for b in self.buses if b.reference)

    def validate(self, gas: GasNetwork | None = None):
        ids = set()
        for b in self.buses:
            if b.id in ids:
                raise ValidationError(f"duplicate bus id {b.id!r}")
            ids.add(b.id)
        refs = [b.id for b in self.buses if b.reference]
        if len(refs) != 1:
            raise ValidationError(f"exactly one reference bus required, got {refs}")
        for ln in self.lines:
            self._check_bus(ln.from_bus, f"line {ln.id!r}")
            self._check_bus(ln.to_bus, f"line {ln.id!r}")
            if ln.reactance <= 0:
                raise ValidationError(f"line {ln.id!r}: reactance must be > 0")
            if ln.rating <= 0:
                raise ValidationError(f"line {ln.id!r}: rating must be > 0")
        for g in self.cfus:
            self._check_bus(g.bus, f"coal unit {g.id!r}")
            if not (0 <= g.p_min <= g.p_max):
                raise ValidationError(f"coal unit {g.id!r}: need 0 <= p_min <= p_max")
            if g.min_up < 1 or g.min_down < 1:
                raise ValidationError(f"coal unit {g.id!r}: min_up/min_down must be >= 1")
            if g.ramp_up < 0 or g.ramp_down < 0:
                raise ValidationError(f"coal unit {g.id!r}: ramp limits must be >= 0")
        gas_nodes = {n.id for n in gas.nodes} if gas is not None else None
        for g in list(self.gfus) + list(self.ptgs):
            self._check_bus(g.bus, f"coupling unit {g.id!r}")
            if gas_nodes is not None and g.gas_node not in gas_nodes:
                raise ValidationError(
                    f"coupling unit {g.id!r} references unknown gas node {g.gas_node!r}")
            if g.capacity < 0:
                raise ValidationError(f"coupling unit {g.id!r}: capacity < 0")
            if g.efficiency is not None and not (0 < g.efficiency <= 1):
                raise ValidationError(f"coupling unit {g.id!r}: efficiency must be in (0, 1]")
        for r in self.res_sites:
            self._check_bus(r.bus, f"res site {r.id!r}")
        for d in self.loads:
            self._check_bus(d.bus, f"electric load {d.id!r}")

    def _check_bus(self, bus, who):
        if bus not in {b.id for b in self.buses}:
            raise ValidationError(f"{who} references unknown bus {bus!r}")

    def susceptance_matrix(self) -> np.ndarray:
        """Nodal susceptance from line reactances; B @ theta = net injection."""
        order = {b.id: i for i, b in enumerate(self.buses)}
        n = len(self.buses)
        B = np.zeros((n, n))
        for ln in self.lines:
            i, j = order[ln.from_bus], order[ln.to_bus]
            y = 1.0 / ln.reactance
            B[i, i] += y
            B[j, j] += y
            B[i, j] -= y
            B[j, i] -= y
        return B


@dataclass(frozen=True)
class CouplingSpec:
    heating_rate: float = 1.08e4          # MW per (Mscm/h)
    gfu_efficiency_default: float = 0.43
    ptg_efficiency_default: float = 0.58
    gfu_commitment_cost_offset: float = 0.0  # constant daily start/stop charge

    def validate(self):
        if self.heating_rate <= 0:
            raise ValidationError("coupling heating_rate must be > 0")
        for name, eta in (("gfu_efficiency_default", self.gfu_efficiency_default),
                          ("ptg_efficiency_default", self.ptg_efficiency_default)):
            if not (0 < eta <= 1):
                raise ValidationError(f"coupling {name} must be in (0, 1], got {eta}")

    def gfu_efficiency(self, unit: GasFiredUnit) -> float:
        return unit.efficiency if unit.efficiency is not None else self.gfu_efficiency_default

    def ptg_efficiency(self, unit: PowerToGas) -> float:
        return unit.efficiency if unit.efficiency is not None else self.ptg_efficiency_default


@dataclass(frozen=True)
class PenaltyPrices:
    wind_curtailment: float   # $/MWh
    electric_shed: float      # $/MWh
    gas_shed: float           # $/Mscm

    def validate(self, gas: GasNetwork, power: PowerNetwork):
        if min(self.wind_curtailment, self.electric_shed, self.gas_shed) <= 0:
            raise ValidationError("penalty prices must be strictly positive")
        max_power_cost = max((g.variable_cost for g in power.cfus), default=0.0)
        if self.wind_curtailment < max_power_cost or self.electric_shed < max_power_cost:
            raise ValidationError(
                f"power-side penalties must be at least the maximum marginal "
                f"production cost {max_power_cost} $/MWh")
        max_gas_cost = max([s.price for s in gas.sources]
                           + [s.price for s in gas.storages], default=0.0)
        if self.gas_shed < max_gas_cost:
            raise ValidationError(
                f"gas shed penalty must be at least the maximum gas price "
                f"{max_gas_cost} $/Mscm")


@dataclass(frozen=True)
class Scenario:
    wind: dict          # profile id -> tuple of T values [MW]
    electric_load: dict # profile id -> tuple of T values [MW]
    gas_load: dict      # profile id -> tuple of T values [Mscm/h]

    def profile(self, kind, pid):
        return getattr(self, kind)[pid]


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple
    probabilities: tuple

    def validate(self, horizon: Horizon, power: PowerNetwork | None = None,
                 gas: GasNetwork | None = None):
        if len(self.scenarios) != len(self.probabilities):
            raise ValidationError("scenario and probability counts differ")
        probs = np.asarray(self.probabilities, dtype=float)
        if np.any(probs < 0):
            raise ValidationError("scenario probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError(
                f"scenario probabilities sum to {probs.sum()!r}, expected 1")
        wanted_wind = {r.profile for r in power.res_sites} if power else None
        wanted_eload = {d.profile for d in power.loads} if power else None
        wanted_gload = {d.profile for d in gas.loads} if gas else None
        for k, sc in enumerate(self.scenarios):
            for kind, wanted in (("wind", wanted_wind),
                                 ("electric_load", wanted_eload),
                                 ("gas_load", wanted_gload)):
                profiles = getattr(sc, kind)
                if wanted is not None:
                    missing = wanted - set(profiles)
                    if missing:
                        raise ValidationError(
                            f"scenario {k}: missing {kind} profile {sorted(missing)[0]!r}")
                for pid, vals in profiles.items():
                    if len(vals) != horizon.periods:
                        raise ValidationError(
                            f"scenario {k}: profile {pid!r} has {len(vals)} periods, "
                            f"horizon has {horizon.periods}")
                    arr = np.asarray(vals, dtype=float)
                    if not np.all(np.isfinite(arr)):
                        raise ValidationError(f"scenario {k}: profile {pid!r} has non-finite values")
                    if np.any(arr < 0):
                        raise ValidationError(f"scenario {k}: profile {pid!r} has negative values")


@dataclass(frozen=True)
class EnergySystem:
    """Validated bundle of everything a solve needs except scenarios."""

    horizon: Horizon
    gas: GasNetwork
    power: PowerNetwork
    coupling: CouplingSpec
    penalties: PenaltyPrices

    def validate(self):
        self.horizon.validate()
        self.gas.validate()
        self.power.validate(self.gas)
        self.coupling.validate()
        self.penalties.validate(self.gas, self.power)

    def commitment_cost(self, x, u, v) -> float:
        """First-stage cost of a (units x T) commitment in the cfus order."""
        total = self.coupling.gfu_commitment_cost_offset
        for gi, g in enumerate(self.power.cfus):
            total += float(np.sum(x[gi]) * g.no_load_cost
                           + np.sum(u[gi]) * g.startup_cost
                           + np.sum(v[gi]) * g.shutdown_cost)
        return total


def validate_schedule_inputs(sets: ScenarioSet, horizon: Horizon,
                             power: PowerNetwork | None = None,
                             gas: GasNetwork | None = None) -> None:
    """Confirm scenario/horizon consistency before any solve."""
    sets.validate(horizon, power=power, gas=gas)


def system_to_dict(system: EnergySystem) -> dict:
    """Inverse of fileio.parse_system; field names match the schema."""
    gas = system.gas
    power = system.power

    def clean(d, renames):
        out = {}
        for k, v in d.items():
            out[renames.get(k, k)] = v
        return out

    pipe_renames = {"from_node": "from", "to_node": "to"}
    line_renames = {"from_bus": "from", "to_bus": "to"}
    doc = {
        "horizon": asdict(system.horizon),
        "gas": {
            "nodes": [asdict(n) for n in gas.nodes],
            "sources": [asdict(s) for s in gas.sources],
            "storages": [asdict(s) for s in gas.storages],
            "loads": [asdict(d) for d in gas.loads],
            "passive_pipelines": [clean(asdict(p), pipe_renames) for p in gas.passive_pipelines],
            "active_pipelines": [clean(asdict(p), pipe_renames) for p in gas.active_pipelines],
            "storage_objective_sign": gas.storage_objective_sign,
        },
        "power": {
            "buses": [asdict(b) for b in power.buses],
            "lines": [clean(asdict(l), line_renames) for l in power.lines],
            "cfus": [asdict(g) for g in power.cfus],
            "gfus": [asdict(g) for g in power.gfus],
            "ptgs": [asdict(g) for g in power.ptgs],
            "res_sites": [asdict(r) for r in power.res_sites],
            "loads": [asdict(d) for d in power.loads],
        },
        "coupling": asdict(system.coupling),
        "penalties": asdict(system.penalties),
    }
    for g in doc["power"]["gfus"] + doc["power"]["ptgs"]:
        if g.get("efficiency") is None:
            g.pop("efficiency", None)
    return doc
