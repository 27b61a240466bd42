"""Cone relaxation of the pipeline flow equation and the sequential
penalty convex-concave loop.

For a directed pipeline (m, n) with flow constant K, the physical relation
fbar^2 = K^2 (pi_m^2 - pi_n^2) is split into

* the relaxation cone  K pi_m >= || (fbar, K pi_n) ||  (emitted once), and
* the reverse inequality, whose concave terms (-pi_n^2, -fbar^2) are
  linearized at the current point while the convex K^2 pi_m^2 term is kept
  exactly through a conic epigraph; a nonnegative slack keeps every
  iteration feasible and is driven out by a growing penalty.

The loop refreshes linearization points at each solution, grows the
penalty geometrically up to a cap, and stops when the objective stalls
and the normalized slack is below tolerance in every scenario.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conic import solve_continuous
from .conic.program import ConicProgram, ProgramBuilder
from .system import EnergySystem, Scenario

PRESSURE_FLOOR = 1e-3  # bar, guards the normalized-slack denominator


def emit_q1(b: ProgramBuilder, vm, pipe, t):
    """Relaxation cone K*pi_m >= ||(fbar, K*pi_n)|| for one pipeline/period."""
    head = vm.add("q1_head", pipe.id, t, lb=-np.inf)
    tail = vm.add("q1_tail", pipe.id, t, lb=-np.inf)
    b.add_eq([(head, 1.0), (vm.idx("pi", pipe.from_node, t), -pipe.k_gf)], 0.0,
             vm.label("q1_head_def", pipe.id, t))
    b.add_eq([(tail, 1.0), (vm.idx("pi", pipe.to_node, t), -pipe.k_gf)], 0.0,
             vm.label("q1_tail_def", pipe.id, t))
    b.add_cone(head, (vm.idx("pipe_avg", pipe.id, t), tail))


def add_slack_variables(b: ProgramBuilder, vm, system: EnergySystem, sigma=1.0):
    """Reverse-side slacks; their objective weight is set by the loop."""
    for p in system.gas.passive_pipelines:
        for t in range(1, system.horizon.periods + 1):
            vm.add("q2_slack", p.id, t, lb=0.0, cost=0.0)


def q2_extension(base: ConicProgram, name_to_idx, tag, pipes, horizon_periods,
                 points):
    """Rows, variables and cones of the linearized reverse inequality.

    ``points[(pipe_id, t)] = (pi_n_star, fbar_star)``.  Returns the
    (extra_vars, extra_eq, extra_cones) triple for ConicProgram.with_updates.
    The emitted rows encode K^2 pi_m^2 <= L with
    L = slack + K^2 (2 pi_n* pi_n - pi_n*^2) + (2 fbar* fbar - fbar*^2)
    via the cone (L+1) >= ||(2 K pi_m, L-1)||.
    """
    extra_vars = []
    extra_eq = []
    extra_cones = []
    nxt = base.num_vars
    for pipe in pipes:
        K = pipe.k_gf
        for t in range(1, horizon_periods + 1):
            pin_star, fbar_star = points[(pipe.id, t)]
            pin_star = max(0.0, pin_star)   # degenerate points clamped
            fbar_star = max(0.0, fbar_star)
            hp = nxt
            hm = nxt + 1
            g = nxt + 2
            nxt += 3
            extra_vars.append(((tag, "q2_hp", pipe.id, t), -np.inf, np.inf, 0.0))
            extra_vars.append(((tag, "q2_hm", pipe.id, t), -np.inf, np.inf, 0.0))
            extra_vars.append(((tag, "q2_g", pipe.id, t), -np.inf, np.inf, 0.0))
            slack = name_to_idx[(tag, "q2_slack", pipe.id, t)]
            pin = name_to_idx[(tag, "pi", pipe.to_node, t)]
            pim = name_to_idx[(tag, "pi", pipe.from_node, t)]
            fbar = name_to_idx[(tag, "pipe_avg", pipe.id, t)]
            const = K * K * pin_star ** 2 + fbar_star ** 2
            lin = [(slack, -1.0), (pin, -2.0 * K * K * pin_star),
                   (fbar, -2.0 * fbar_star)]
            extra_eq.append(([(hp, 1.0)] + lin, 1.0 - const,
                             (tag, "q2_hp_def", pipe.id, t)))
            extra_eq.append(([(hm, 1.0)] + lin, -1.0 - const,
                             (tag, "q2_hm_def", pipe.id, t)))
            extra_eq.append(([(g, 1.0), (pim, -2.0 * K)], 0.0,
                             (tag, "q2_g_def", pipe.id, t)))
            extra_cones.append((hp, (g, hm)))
    return extra_vars, extra_eq, extra_cones


@dataclass
class PccConfig:
    rho_init: float = 1e3
    growth: float = 2.0          # penalty multiplier per iteration (> 1)
    rho_cap: float = 1e7
    slack_tol: float = 1e-4      # on the normalized slack, per scenario
    stall_tol: float = 1e-4      # relative objective change
    max_iterations: int = 50

    def __post_init__(self):
        if self.rho_init <= 0 or self.rho_cap < self.rho_init:
            raise ValueError("need 0 < rho_init <= rho_cap")
        if self.growth <= 1.0:
            raise ValueError("penalty growth factor must exceed 1")
        if self.slack_tol <= 0 or self.stall_tol <= 0:
            raise ValueError("tolerances must be positive")

    @classmethod
    def high_accuracy(cls):
        """Slow-growth preset for tight convexification studies."""
        return cls(growth=1.02, max_iterations=400)


@dataclass
class PccState:
    """Warm-startable loop state: linearization points and penalty level."""

    points: dict = field(default_factory=dict)  # scenario k -> {(pid,t): (pi_n*, fbar*)}
    rho: float | None = None


@dataclass
class ScenarioProgram:
    """One scenario's base program (relaxation cone emitted, slacks present)."""

    program: ConicProgram
    names: dict
    tag: object
    sigma: float
    system: EnergySystem
    scenario: Scenario

    @classmethod
    def assemble(cls, system: EnergySystem, scenario: Scenario, sigma=1.0,
                 x_fixed=None, reserves=None, tag=0):
        from .formulation import assemble
        program, vm = assemble(system, scenario, sigma=sigma, x_fixed=x_fixed,
                               reserves=reserves, tag=tag)
        return cls(program=program, names=dict(vm.builder._name_to_idx),
                   tag=tag, sigma=sigma, system=system, scenario=scenario)

    def idx(self, sym, ent, t):
        return self.names[(self.tag, sym, ent, t)]

    @property
    def pipes(self):
        return self.system.gas.passive_pipelines

    def pressure_floor(self, node_id):
        node = next(n for n in self.system.gas.nodes if n.id == node_id)
        return max(node.pressure_min, PRESSURE_FLOOR)

    def extract_points(self, x):
        pts = {}
        for p in self.pipes:
            for t in range(1, self.system.horizon.periods + 1):
                pts[(p.id, t)] = (float(x[self.idx("pi", p.to_node, t)]),
                                  float(x[self.idx("pipe_avg", p.id, t)]))
        return pts

    def normalized_slacks(self, x):
        """Slack divided by K^2 pi_m^2 at the current iterate (guarded)."""
        out = {}
        for p in self.pipes:
            for t in range(1, self.system.horizon.periods + 1):
                s = float(x[self.idx("q2_slack", p.id, t)])
                pim = max(float(x[self.idx("pi", p.from_node, t)]),
                          self.pressure_floor(p.from_node))
                out[(p.id, t)] = s / (p.k_gf ** 2 * pim ** 2)
        return out

    def flow_residuals(self, x):
        """|fbar^2 - K^2(pi_m^2 - pi_n^2)| / (K^2 pi_m^2) per pipeline/period."""
        out = {}
        for p in self.pipes:
            for t in range(1, self.system.horizon.periods + 1):
                fbar = float(x[self.idx("pipe_avg", p.id, t)])
                pim = float(x[self.idx("pi", p.from_node, t)])
                pin = float(x[self.idx("pi", p.to_node, t)])
                denom = p.k_gf ** 2 * max(pim, self.pressure_floor(p.from_node)) ** 2
                out[(p.id, t)] = abs(fbar ** 2 - p.k_gf ** 2 * (pim ** 2 - pin ** 2)) / denom
        return out

    def slack_cost_updates(self, rho):
        return {self.idx("q2_slack", p.id, t): self.sigma * rho
                for p in self.pipes
                for t in range(1, self.system.horizon.periods + 1)}

    def extended(self, points, rho):
        ev, ee, ec = q2_extension(self.program, self.names, self.tag,
                                  self.pipes, self.system.horizon.periods, points)
        return self.program.with_updates(new_costs=self.slack_cost_updates(rho),
                                         extra_vars=ev, extra_eq=ee,
                                         extra_cones=ec)

    def commitment_duals(self, result):
        """Copy-row duals as a (units x T) array (zero rows when absent)."""
        cfus = self.system.power.cfus
        T = self.system.horizon.periods
        nu = np.zeros((len(cfus), T))
        for gi, g in enumerate(cfus):
            for t in range(1, T + 1):
                lab = (self.tag, "commit_copy", g.id, t)
                if lab in result._eq_index:
                    nu[gi, t - 1] = result.eq_duals[result._eq_index[lab]]
        return nu


@dataclass
class PccResult:
    value: float
    nu: np.ndarray
    converged: bool
    slack_flagged: bool
    iterations: int
    max_norm_slack: float
    rho_final: float
    state: PccState
    trace: list
    scenario_results: list
    scenario_slacks: list
    scenario_residuals: list


def _solve_one(sp: ScenarioProgram, points, rho):
    prog = sp.extended(points, rho)
    res = solve_continuous(prog)
    if res.status not in ("optimal",):
        raise RuntimeError(
            f"scenario subproblem came back {res.status} "
            f"(residuals {res.residuals})")
    return res


def pcc_solve(scenario_programs, cfg: PccConfig, state: PccState | None = None,
              parallel=1) -> PccResult:
    """Run the sequential convexification loop over all scenario programs.

    Programs must already carry the relaxation cone and slack variables
    (formulation.assemble does this).  A warm ``state`` continues from the
    previous terminal points and penalty level.
    """
    sps = list(scenario_programs)
    rho = cfg.rho_init if state is None or state.rho is None else state.rho

    def run_parallel(fn, args):
        if parallel <= 1 or len(args) <= 1:
            return [fn(*a) for a in args]
        with ThreadPoolExecutor(max_workers=parallel) as ex:
            futs = [ex.submit(fn, *a) for a in args]
            return [f.result() for f in futs]  # ordered gather

    if state is None or not state.points:
        init = run_parallel(lambda sp: solve_continuous(sp.program), [(sp,) for sp in sps])
        for k, res in enumerate(init):
            if res.status != "optimal":
                raise RuntimeError(f"relaxation-only solve failed: {res.status}")
        points = {k: sps[k].extract_points(res.x) for k, res in enumerate(init)}
    else:
        points = {k: dict(state.points[k]) for k in range(len(sps))}

    no_reverse_rows = all(len(sp.pipes) == 0 for sp in sps)
    prev_value = None
    trace = []
    value = np.nan
    results = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        results = run_parallel(_solve_one, [(sp, points[k], rho)
                                            for k, sp in enumerate(sps)])
        value = float(sum(r.objective for r in results))
        slacks = [sps[k].normalized_slacks(r.x) for k, r in enumerate(results)]
        max_slack = max((max(s.values()) if s else 0.0) for s in slacks)
        trace.append({"iteration": it, "rho": rho, "objective": value,
                      "max_norm_slack": max_slack})
        rho = min(cfg.growth * rho, cfg.rho_cap)
        new_points = {k: sps[k].extract_points(r.x) for k, r in enumerate(results)}
        stalled = (prev_value is not None and
                   abs(value - prev_value) / max(abs(value), 1e-9) <= cfg.stall_tol)
        if no_reverse_rows or (stalled and max_slack <= cfg.slack_tol):
            points = new_points
            converged = True
            break
        prev_value = value
        points = new_points

    slacks = [sps[k].normalized_slacks(r.x) for k, r in enumerate(results)]
    residuals = [sps[k].flow_residuals(r.x) for k, r in enumerate(results)]
    max_slack = max((max(s.values()) if s else 0.0) for s in slacks)
    nu = np.zeros((len(sps[0].system.power.cfus), sps[0].system.horizon.periods))
    for k, r in enumerate(results):
        nu += sps[k].commitment_duals(r)
    return PccResult(
        value=value, nu=nu, converged=converged,
        slack_flagged=max_slack > cfg.slack_tol,
        iterations=it, max_norm_slack=max_slack, rho_final=rho,
        state=PccState(points={k: points[k] for k in range(len(sps))}, rho=rho),
        trace=trace, scenario_results=results, scenario_slacks=slacks,
        scenario_residuals=residuals)
