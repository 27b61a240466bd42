"""Translation of the domain model into conic program blocks.

Every decision symbol lives in a VariableMap keyed (scenario tag, symbol,
entity, period); every row is labeled (scenario tag, kind, entity, period)
so duals can be pulled by the producing model equation.  Periods are
1-based to match the scheduling convention; period 0 refers to initial
conditions and never owns a variable.

Sign conventions:

* pipeline end flows: ``("pipe_flow", id, "in", t)`` is gas entering the
  pipe at its from-node (positive = out of that node); ``"out"`` likewise
  at the to-node.  Average flow is (in - out)/2 and is nonnegative for the
  declared direction.
* the gas balance row is written  supplies - withdrawals - pipe sendouts
  = total load at the node, so its dual is directly $ per (Mscm/h) of
  extra load;
* the power balance row is written  B theta - generation + PtG demand
  + curtailment - shedding = wind - load, so the locational price of load
  is minus the row dual.
"""

from __future__ import annotations

import numpy as np

from .conic.program import ConicProgram, ProgramBuilder
from .system import EnergySystem, Scenario, ScenarioSet

UC_TAG = "uc"


class VariableMap:
    """Named handles for the decision symbols of one scenario block."""

    def __init__(self, builder: ProgramBuilder, tag):
        self.builder = builder
        self.tag = tag

    def add(self, sym, ent, t, **kw):
        return self.builder.add_variable((self.tag, sym, ent, t), **kw)

    def idx(self, sym, ent, t):
        return self.builder.index_of((self.tag, sym, ent, t))

    def has(self, sym, ent, t):
        return (self.tag, sym, ent, t) in self.builder._name_to_idx

    def label(self, kind, ent, t):
        return (self.tag, kind, ent, t)


GAS_SYMBOLS = {"src", "str", "pi", "cmp_flow", "cmp_cons", "pipe_flow",
               "pipe_avg", "linepack", "gfu_gas", "ptg_gas", "gas_shed",
               "q1_head", "q1_tail", "q2_slack", "q2_hp", "q2_hm", "q2_g"}
POWER_SYMBOLS = {"x", "u", "v", "z", "p", "theta", "curt", "eshed"}
CONSENSUS_SYMBOLS = {"gfu_p", "ptg_p"}

GAS_ROWS = {"daily_quantity_lo", "daily_quantity_hi", "storage_capacity_lo",
            "storage_capacity_hi", "compression_ratio_lo", "compression_ratio_hi",
            "compressor_consumption", "linepack_balance", "linepack_pressure",
            "pipe_avg_flow", "terminal_linepack", "gas_balance", "gas_reserve",
            "gfu_coupling", "ptg_coupling", "q2_hp_def", "q2_hm_def", "q2_g_def",
            "q1_head_def", "q1_tail_def"}
POWER_ROWS = {"commit_transition", "min_up", "min_down", "dispatch_lo",
              "dispatch_hi", "ramp_up", "ramp_down", "flow_hi", "flow_lo",
              "ref_angle", "power_balance", "commit_copy", "power_reserve"}


def total_profile(entries, scenario_map, t):
    return sum(scenario_map[e.profile][t - 1] for e in entries)


def build_gas_blocks(b: ProgramBuilder, vm: VariableMap, system: EnergySystem,
                     scenario: Scenario, sigma=1.0):
    """Gas-side variables, constraints and objective terms for one scenario."""
    gas = system.gas
    h = system.horizon
    T, dt = h.periods, h.slot_hours
    pen = system.penalties
    periods = range(1, T + 1)

    for w in gas.sources:
        for t in periods:
            vm.add("src", w.id, t, lb=w.flow_min, ub=w.flow_max,
                   cost=sigma * w.price * dt)
    for s in gas.storages:
        for t in periods:
            vm.add("str", s.id, t, lb=s.flow_min, ub=s.flow_max,
                   cost=sigma * gas.storage_objective_sign * s.price * dt)
    for n in gas.nodes:
        for t in periods:
            vm.add("pi", n.id, t, lb=n.pressure_min, ub=n.pressure_max)
    for p in gas.passive_pipelines:
        for t in periods:
            vm.add("pipe_flow", p.id, ("in", t), lb=-np.inf)
            vm.add("pipe_flow", p.id, ("out", t), lb=-np.inf)
            vm.add("pipe_avg", p.id, t, lb=0.0)
            vm.add("linepack", p.id, t, lb=0.0)
    for p in gas.active_pipelines:
        for t in periods:
            vm.add("cmp_flow", p.id, ("in", t), lb=0.0)  # declared direction
            vm.add("cmp_flow", p.id, ("out", t), lb=-np.inf)
            vm.add("cmp_cons", p.id, t, lb=0.0)
            vm.add("linepack", p.id, t, lb=0.0)
    for g in system.power.gfus:
        for t in periods:
            vm.add("gfu_gas", g.id, t, lb=0.0)
    for v in system.power.ptgs:
        for t in periods:
            vm.add("ptg_gas", v.id, t, lb=0.0)
    for d in gas.loads:
        for t in periods:
            demand = scenario.gas_load[d.profile][t - 1]
            vm.add("gas_shed", d.id, t, lb=0.0, ub=demand,
                   cost=sigma * pen.gas_shed * dt)

    for w in gas.sources:
        terms = [(vm.idx("src", w.id, t), dt) for t in periods]
        b.add_le(terms, w.daily_max, vm.label("daily_quantity_hi", w.id, None))
        b.add_le([(i, -a) for i, a in terms], -w.daily_min,
                 vm.label("daily_quantity_lo", w.id, None))
    for s in gas.storages:
        for t in periods:
            terms = [(vm.idx("str", s.id, tau), dt) for tau in range(1, t + 1)]
            b.add_le(terms, s.capacity_max - s.initial_volume,
                     vm.label("storage_capacity_hi", s.id, t))
            b.add_le([(i, -a) for i, a in terms], s.initial_volume - s.capacity_min,
                     vm.label("storage_capacity_lo", s.id, t))
    for p in gas.active_pipelines:
        for t in periods:
            pm = vm.idx("pi", p.from_node, t)
            pn = vm.idx("pi", p.to_node, t)
            b.add_le([(pm, p.ratio_min), (pn, -1.0)], 0.0,
                     vm.label("compression_ratio_lo", p.id, t))
            b.add_le([(pn, 1.0), (pm, -p.ratio_max)], 0.0,
                     vm.label("compression_ratio_hi", p.id, t))
            b.add_eq([(vm.idx("cmp_cons", p.id, t), 1.0),
                      (vm.idx("cmp_flow", p.id, ("in", t)), -p.beta)], 0.0,
                     vm.label("compressor_consumption", p.id, t))
            terms = [(vm.idx("linepack", p.id, t), 1.0),
                     (vm.idx("cmp_flow", p.id, ("in", t)), -dt),
                     (vm.idx("cmp_flow", p.id, ("out", t)), -dt),
                     (vm.idx("cmp_cons", p.id, t), dt)]
            rhs = 0.0
            if t == 1:
                rhs = p.initial_linepack
            else:
                terms.append((vm.idx("linepack", p.id, t - 1), -1.0))
            b.add_eq(terms, rhs, vm.label("linepack_balance", p.id, t))
        b.add_eq([(vm.idx("linepack", p.id, T), 1.0)], p.initial_linepack,
                 vm.label("terminal_linepack", p.id, None))
    for p in gas.passive_pipelines:
        for t in periods:
            b.add_eq([(vm.idx("pipe_avg", p.id, t), 1.0),
                      (vm.idx("pipe_flow", p.id, ("in", t)), -0.5),
                      (vm.idx("pipe_flow", p.id, ("out", t)), 0.5)], 0.0,
                     vm.label("pipe_avg_flow", p.id, t))
            b.add_eq([(vm.idx("linepack", p.id, t), 1.0),
                      (vm.idx("pi", p.from_node, t), -p.k_lp / 2.0),
                      (vm.idx("pi", p.to_node, t), -p.k_lp / 2.0)], 0.0,
                     vm.label("linepack_pressure", p.id, t))
            terms = [(vm.idx("linepack", p.id, t), 1.0),
                     (vm.idx("pipe_flow", p.id, ("in", t)), -dt),
                     (vm.idx("pipe_flow", p.id, ("out", t)), -dt)]
            rhs = 0.0
            if t == 1:
                rhs = p.initial_linepack
            else:
                terms.append((vm.idx("linepack", p.id, t - 1), -1.0))
            b.add_eq(terms, rhs, vm.label("linepack_balance", p.id, t))
        b.add_eq([(vm.idx("linepack", p.id, T), 1.0)], p.initial_linepack,
                 vm.label("terminal_linepack", p.id, None))

    for n in gas.nodes:
        for t in periods:
            terms = []
            rhs = 0.0
            for w in gas.sources:
                if w.node == n.id:
                    terms.append((vm.idx("src", w.id, t), 1.0))
            for v in system.power.ptgs:
                if v.gas_node == n.id:
                    terms.append((vm.idx("ptg_gas", v.id, t), 1.0))
            for s in gas.storages:
                if s.node == n.id:
                    terms.append((vm.idx("str", s.id, t), -1.0))
            for g in system.power.gfus:
                if g.gas_node == n.id:
                    terms.append((vm.idx("gfu_gas", g.id, t), -1.0))
            for d in gas.loads:
                if d.node == n.id:
                    terms.append((vm.idx("gas_shed", d.id, t), 1.0))
                    rhs += scenario.gas_load[d.profile][t - 1]
            for p in gas.passive_pipelines:
                if p.from_node == n.id:
                    terms.append((vm.idx("pipe_flow", p.id, ("in", t)), -1.0))
                if p.to_node == n.id:
                    terms.append((vm.idx("pipe_flow", p.id, ("out", t)), -1.0))
            for p in gas.active_pipelines:
                if p.from_node == n.id:
                    terms.append((vm.idx("cmp_flow", p.id, ("in", t)), -1.0))
                if p.to_node == n.id:
                    terms.append((vm.idx("cmp_flow", p.id, ("out", t)), -1.0))
            b.add_eq(terms, rhs, vm.label("gas_balance", n.id, t))


def build_power_blocks(b: ProgramBuilder, vm: VariableMap, system: EnergySystem,
                       scenario: Scenario, sigma=1.0, commitment="binary",
                       x_fixed=None, uc_vm: VariableMap | None = None):
    """Power-side block for one scenario.

    commitment:
      * "binary": create binary x/u/v with first-stage costs (monolithic use);
      * "fixed":  create free copy variables z pinned to x_fixed by labeled
        equality rows (the decomposition subproblem device);
      * "shared": reuse x/u/v from uc_vm (extra scenarios of a monolithic
        multi-scenario program).
    """
    power = system.power
    h = system.horizon
    T, dt = h.periods, h.slot_hours
    pen = system.penalties
    periods = range(1, T + 1)

    own_commitment = commitment == "binary"
    if own_commitment:
        for g in power.cfus:
            for t in periods:
                vm.add("x", g.id, t, lb=0.0, ub=1.0, binary=True, cost=g.no_load_cost)
                vm.add("u", g.id, t, lb=0.0, ub=1.0, binary=True, cost=g.startup_cost)
                vm.add("v", g.id, t, lb=0.0, ub=1.0, binary=True, cost=g.shutdown_cost)
        b.add_offset(system.coupling.gfu_commitment_cost_offset)

    def xvar(g, t):
        if commitment == "binary":
            return vm.idx("x", g.id, t)
        if commitment == "shared":
            return uc_vm.idx("x", g.id, t)
        return vm.idx("z", g.id, t)

    if commitment == "fixed":
        for gi, g in enumerate(power.cfus):
            for t in periods:
                vm.add("z", g.id, t, lb=-np.inf)
                b.add_eq([(vm.idx("z", g.id, t), 1.0)], float(x_fixed[gi, t - 1]),
                         vm.label("commit_copy", g.id, t))

    for g in power.cfus:
        for t in periods:
            vm.add("p", g.id, t, lb=0.0, cost=sigma * g.variable_cost * dt)
    for bus in power.buses:
        for t in periods:
            vm.add("theta", bus.id, t, lb=-np.inf)
    for g in power.gfus:
        for t in periods:
            vm.add("gfu_p", g.id, t, lb=0.0, ub=g.capacity)
    for v in power.ptgs:
        for t in periods:
            vm.add("ptg_p", v.id, t, lb=0.0, ub=v.capacity)
    for r in power.res_sites:
        for t in periods:
            vm.add("curt", r.id, t, lb=0.0, ub=scenario.wind[r.profile][t - 1],
                   cost=sigma * pen.wind_curtailment * dt)
    for d in power.loads:
        for t in periods:
            vm.add("eshed", d.id, t, lb=0.0,
                   ub=scenario.electric_load[d.profile][t - 1],
                   cost=sigma * pen.electric_shed * dt)

    if own_commitment:
        cv = vm
        for g in power.cfus:
            for t in periods:
                terms = [(cv.idx("x", g.id, t), 1.0), (cv.idx("u", g.id, t), -1.0),
                         (cv.idx("v", g.id, t), 1.0)]
                rhs = 0.0
                if t == 1:
                    rhs = 1.0 if g.initial_on else 0.0
                else:
                    terms.append((cv.idx("x", g.id, t - 1), -1.0))
                b.add_eq(terms, rhs, cv.label("commit_transition", g.id, t))
                up = [(cv.idx("u", g.id, tau), 1.0)
                      for tau in range(max(1, t - g.min_up + 1), t + 1)]
                b.add_le(up + [(cv.idx("x", g.id, t), -1.0)], 0.0,
                         cv.label("min_up", g.id, t))
                dn = [(cv.idx("v", g.id, tau), 1.0)
                      for tau in range(max(1, t - g.min_down + 1), t + 1)]
                b.add_le(dn + [(cv.idx("x", g.id, t), 1.0)], 1.0,
                         cv.label("min_down", g.id, t))

    for g in power.cfus:
        for t in periods:
            b.add_le([(xvar(g, t), g.p_min), (vm.idx("p", g.id, t), -1.0)], 0.0,
                     vm.label("dispatch_lo", g.id, t))
            b.add_le([(vm.idx("p", g.id, t), 1.0), (xvar(g, t), -g.p_max)], 0.0,
                     vm.label("dispatch_hi", g.id, t))
            if t > 1:
                b.add_le([(vm.idx("p", g.id, t), 1.0),
                          (vm.idx("p", g.id, t - 1), -1.0)], g.ramp_up * dt,
                         vm.label("ramp_up", g.id, t))
                b.add_le([(vm.idx("p", g.id, t - 1), 1.0),
                          (vm.idx("p", g.id, t), -1.0)], g.ramp_down * dt,
                         vm.label("ramp_down", g.id, t))
    for g in power.gfus:
        for t in range(2, T + 1):
            b.add_le([(vm.idx("gfu_p", g.id, t), 1.0),
                      (vm.idx("gfu_p", g.id, t - 1), -1.0)], g.ramp_up * dt,
                     vm.label("ramp_up", g.id, t))
            b.add_le([(vm.idx("gfu_p", g.id, t - 1), 1.0),
                      (vm.idx("gfu_p", g.id, t), -1.0)], g.ramp_down * dt,
                     vm.label("ramp_down", g.id, t))

    for ln in power.lines:
        y = 1.0 / ln.reactance
        for t in periods:
            tm = vm.idx("theta", ln.from_bus, t)
            tn = vm.idx("theta", ln.to_bus, t)
            b.add_le([(tm, y), (tn, -y)], ln.rating, vm.label("flow_hi", ln.id, t))
            b.add_le([(tm, -y), (tn, y)], ln.rating, vm.label("flow_lo", ln.id, t))
    ref = power.reference_bus()
    for t in periods:
        b.add_eq([(vm.idx("theta", ref, t), 1.0)], 0.0, vm.label("ref_angle", ref, t))

    B = power.susceptance_matrix()
    bus_ids = power.bus_ids()
    for i, bus in enumerate(power.buses):
        for t in periods:
            terms = [(vm.idx("theta", bus_ids[j], t), B[i, j])
                     for j in range(len(bus_ids)) if B[i, j] != 0.0]
            rhs = 0.0
            for g in power.cfus:
                if g.bus == bus.id:
                    terms.append((vm.idx("p", g.id, t), -1.0))
            for g in power.gfus:
                if g.bus == bus.id:
                    terms.append((vm.idx("gfu_p", g.id, t), -1.0))
            for v in power.ptgs:
                if v.bus == bus.id:
                    terms.append((vm.idx("ptg_p", v.id, t), 1.0))
            for r in power.res_sites:
                if r.bus == bus.id:
                    terms.append((vm.idx("curt", r.id, t), 1.0))
                    rhs += scenario.wind[r.profile][t - 1]
            for d in power.loads:
                if d.bus == bus.id:
                    terms.append((vm.idx("eshed", d.id, t), -1.0))
                    rhs -= scenario.electric_load[d.profile][t - 1]
            b.add_eq(terms, rhs, vm.label("power_balance", bus.id, t))


def build_coupling_blocks(b: ProgramBuilder, vm: VariableMap, system: EnergySystem):
    """Unit conversion ties between electric output/consumption and gas flow."""
    h = system.horizon
    c = system.coupling
    for g in system.power.gfus:
        eta = c.gfu_efficiency(g)
        for t in range(1, h.periods + 1):
            b.add_eq([(vm.idx("gfu_p", g.id, t), 1.0),
                      (vm.idx("gfu_gas", g.id, t), -eta * c.heating_rate)], 0.0,
                     vm.label("gfu_coupling", g.id, t))
    for v in system.power.ptgs:
        eta = c.ptg_efficiency(v)
        for t in range(1, h.periods + 1):
            b.add_eq([(vm.idx("ptg_gas", v.id, t), 1.0),
                      (vm.idx("ptg_p", v.id, t), -eta / c.heating_rate)], 0.0,
                     vm.label("ptg_coupling", v.id, t))


def build_reserve_blocks(b: ProgramBuilder, vm: VariableMap, system: EnergySystem,
                         scenario: Scenario, power_rate: float, gas_rate: float,
                         commitment="binary", uc_vm=None):
    """Spinning-capacity rows for the deterministic single-scenario model."""
    power = system.power
    gas = system.gas
    for t in range(1, system.horizon.periods + 1):
        if power.cfus and power_rate > 0:
            demand = total_profile(power.loads, scenario.electric_load, t)
            terms = []
            for g in power.cfus:
                xi = (vm.idx("x", g.id, t) if commitment == "binary" else
                      uc_vm.idx("x", g.id, t) if commitment == "shared" else
                      vm.idx("z", g.id, t))
                terms.append((vm.idx("p", g.id, t), 1.0))
                terms.append((xi, -g.p_max))
            b.add_le(terms, -power_rate * demand, vm.label("power_reserve", None, t))
        if gas.sources and gas_rate > 0:
            demand = total_profile(gas.loads, scenario.gas_load, t)
            terms = [(vm.idx("src", w.id, t), 1.0) for w in gas.sources]
            terms += [(vm.idx("str", s.id, t), -1.0) for s in gas.storages]
            headroom = sum(w.flow_max for w in gas.sources) \
                - sum(s.flow_min for s in gas.storages)
            b.add_le(terms, headroom - gas_rate * demand,
                     vm.label("gas_reserve", None, t))


def assemble(system: EnergySystem, scenario: Scenario, sigma=1.0,
             x_fixed=None, with_q1=True, reserves=None, tag=0):
    """One scenario program: gas + power + coupling (+ cone relaxation rows).

    With ``x_fixed`` (units x T array) the commitment binaries are replaced
    by pinned copy variables, so the program is continuous and the copy-row
    duals give the sensitivity of the optimal value to the commitment.
    Returns (ConicProgram, VariableMap).
    """
    from . import pcc  # cone emission lives with the relaxation machinery

    b = ProgramBuilder()
    vm = VariableMap(b, tag)
    commitment = "binary" if x_fixed is None else "fixed"
    build_gas_blocks(b, vm, system, scenario, sigma=sigma)
    build_power_blocks(b, vm, system, scenario, sigma=sigma,
                       commitment=commitment, x_fixed=x_fixed)
    build_coupling_blocks(b, vm, system)
    if reserves is not None:
        build_reserve_blocks(b, vm, system, scenario, reserves[0], reserves[1],
                             commitment=commitment)
    if with_q1:
        for p in system.gas.passive_pipelines:
            for t in range(1, system.horizon.periods + 1):
                pcc.emit_q1(b, vm, p, t)
        pcc.add_slack_variables(b, vm, system, sigma=sigma)
    return b.build(), vm


def assemble_monolithic(system: EnergySystem, sets: ScenarioSet,
                        with_q1=True, reserves=None):
    """All scenarios in one mixed-binary program sharing the commitment.

    Used as the decomposition oracle; scenario blocks are weighted by their
    probabilities while commitment costs enter once.
    """
    from . import pcc

    b = ProgramBuilder()
    uc_vm = VariableMap(b, UC_TAG)
    vms = []
    for k, (scenario, sigma) in enumerate(zip(sets.scenarios, sets.probabilities)):
        vm = VariableMap(b, k)
        commitment = "binary" if k == 0 else "shared"
        build_gas_blocks(b, vm, system, scenario, sigma=sigma)
        if k == 0:
            # first block also owns the commitment variables, under the uc tag
            build_power_blocks(b, uc_vm, system, scenario, sigma=sigma,
                               commitment="binary")
            _alias_block(vm, uc_vm)
        else:
            build_power_blocks(b, vm, system, scenario, sigma=sigma,
                               commitment="shared", uc_vm=uc_vm)
        build_coupling_blocks(b, vm, system)
        if reserves is not None:
            build_reserve_blocks(b, vm, system, scenario, reserves[0], reserves[1],
                                 commitment="shared", uc_vm=uc_vm)
        if with_q1:
            for p in system.gas.passive_pipelines:
                for t in range(1, system.horizon.periods + 1):
                    pcc.emit_q1(b, vm, p, t)
            pcc.add_slack_variables(b, vm, system, sigma=sigma)
        vms.append(vm)
    return b.build(), vms, uc_vm


def _alias_block(vm: VariableMap, uc_vm: VariableMap):
    """Make scenario-0 power symbols visible under both tags."""
    mapping = dict(uc_vm.builder._name_to_idx)
    for (tag, sym, ent, t), idx in mapping.items():
        if tag == UC_TAG and sym not in ("x", "u", "v"):
            vm.builder._name_to_idx[(vm.tag, sym, ent, t)] = idx


def dispatch_cost_parts(x_values, vm: VariableMap, system: EnergySystem,
                        scenario: Scenario) -> dict:
    """Decompose one scenario's dispatch cost from primal values (sigma=1)."""
    h = system.horizon
    T, dt = h.periods, h.slot_hours
    gas = system.gas
    power = system.power
    pen = system.penalties

    def val(sym, ent, t):
        return float(x_values[vm.idx(sym, ent, t)])

    parts = {
        "gas_purchase": sum(w.price * val("src", w.id, t) * dt
                            for w in gas.sources for t in range(1, T + 1)),
        "storage_term": sum(gas.storage_objective_sign * s.price
                            * val("str", s.id, t) * dt
                            for s in gas.storages for t in range(1, T + 1)),
        "cfu_variable": sum(g.variable_cost * val("p", g.id, t) * dt
                            for g in power.cfus for t in range(1, T + 1)),
        "wind_curtail_penalty": sum(pen.wind_curtailment * val("curt", r.id, t) * dt
                                    for r in power.res_sites for t in range(1, T + 1)),
        "electric_shed_penalty": sum(pen.electric_shed * val("eshed", d.id, t) * dt
                                     for d in power.loads for t in range(1, T + 1)),
        "gas_shed_penalty": sum(pen.gas_shed * val("gas_shed", d.id, t) * dt
                                for d in gas.loads for t in range(1, T + 1)),
        "curtailment_mwh": sum(val("curt", r.id, t) * dt
                               for r in power.res_sites for t in range(1, T + 1)),
    }
    parts["dispatch_cost"] = (parts["gas_purchase"] + parts["storage_term"]
                              + parts["cfu_variable"] + parts["wind_curtail_penalty"]
                              + parts["electric_shed_penalty"] + parts["gas_shed_penalty"])
    return parts
