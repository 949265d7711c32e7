"""Named scenarios and the monitored-invariant checklist of a run."""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional

import numpy as np

from ..diagnostics import DiagnosticsRecorder, positivity_barrier
from ..discretization import Grid
from ..exceptions import ConfigError
from ..model import BornVdW, EntropyConfig, ForceFree, NavierSlip, NoSlip, PhysicalParams, WeakSlip
from ..model import default_cap
from ..stepper import RunSummary, SolverConfig, run
from .initial_conditions import Constant, CosinePerturbed, TouchingZero

logger = logging.getLogger(__name__)

MASS_TOL = 1e-12
ENERGY_TOL = 1e-10
INEQUALITY_TOL = 1e-6
NONNEG_TOL = 1e-8
GRONWALL_DELTA = 0.5
POSITIVITY_FRACTION = 0.1


@dataclass(frozen=True)
class Scenario:
    name: str
    initial_condition: object
    model: object = field(default_factory=NoSlip)
    params: PhysicalParams = field(default_factory=PhysicalParams)
    pot: object = field(default_factory=ForceFree)
    t_end: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)
    grid: Grid = field(default_factory=lambda: Grid(128))

    def __post_init__(self):
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError(f"scenario.t_end: must be positive; got {self.t_end!r}")

    def initial_state(self):
        return self.initial_condition.evaluate(self.grid)

    def with_grid(self, n_cells):
        return replace(self, grid=Grid(n_cells))

    def with_solver(self, **changes):
        return replace(self, solver=replace(self.solver, **changes))


def _smooth(name, model, **kw):
    return Scenario(name, CosinePerturbed(1.0, 1.0, 0.1, 0.1, 1), model=model, t_end=0.5, **kw)


def _touching(name, model):
    return Scenario(name, TouchingZero(), model=model, t_end=0.1, grid=Grid(256),
                    solver=SolverConfig(epsilon=1e-6, dt_init=1e-5, dt_max=1e-3))


SCENARIOS: Dict[str, Callable[[], Scenario]] = {
    "steady": lambda: Scenario("steady", Constant(1.0, 0.5), t_end=0.05, grid=Grid(64)),
    "smooth_noslip": lambda: _smooth("smooth_noslip", NoSlip()),
    "smooth_navier": lambda: _smooth("smooth_navier", NavierSlip(alpha=0.5)),
    "smooth_weak_slip": lambda: _smooth("smooth_weak_slip", WeakSlip(b1=0.1, b=0.1)),
    "touching_zero_noslip": lambda: _touching("touching_zero_noslip", NoSlip()),
    "touching_zero_navier": lambda: _touching("touching_zero_navier", NavierSlip(alpha=0.5)),
    "positivity_born": lambda: Scenario(
        "positivity_born", CosinePerturbed(0.5, 0.5, 0.25, 0.25, 1),
        pot=BornVdW(3.0, 12.0, 0.1, 0.1), t_end=1.0),
    # gamma = 1e-9 puts the force zero at 0.1; films of 0.3 sit in the
    # spinodal region and rupture down to that precursor
    "dewetting": lambda: Scenario(
        "dewetting", CosinePerturbed(0.3, 0.3, 0.01, -0.01, 2),
        pot=BornVdW(3.0, 12.0, 1e-9, 1e-9), t_end=0.5,
        solver=SolverConfig(epsilon=1e-6, dt_init=1e-5, dt_max=1e-3)),
}


def get_scenario(name):
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ConfigError(f"scenario.name: unknown scenario {name!r}; "
                          f"choose from {sorted(SCENARIOS)}") from None


@dataclass
class RunReport:
    scenario: Scenario
    summary: RunSummary
    initial_record: object
    records: List[object]
    checks: Dict[str, bool]
    details: Dict[str, str]
    snapshots: List[tuple] = field(default_factory=list)

    @property
    def final(self):
        return self.summary.final

    @property
    def complete(self):
        return self.summary.complete

    @property
    def passed(self):
        return all(self.checks.values())

    def failures(self):
        return [k for k, ok in self.checks.items() if not ok]


def entropy_ceiling(t, s0, e0, delta=GRONWALL_DELTA):
    """Heuristic Gronwall ceiling ``exp(t / delta) * S(0) + E(0) / 2``."""
    return math.exp(t / delta) * s0 + 0.5 * e0


def evaluate_checks(scenario, initial, records, summary):
    """Invariant checklist for a finished run; returns ``(checks, details)``."""
    checks, details = {}, {}
    series = [initial] + list(records)
    m_u = np.array([r.mass_u for r in series])
    m_v = np.array([r.mass_v for r in series])
    e = np.array([r.energy for r in series])

    drift = max(np.max(np.abs(np.diff(m_u)), initial=0.0) / (1.0 + abs(m_u[0])),
                np.max(np.abs(np.diff(m_v)), initial=0.0) / (1.0 + abs(m_v[0])))
    checks["mass_conservation"] = bool(drift <= MASS_TOL)
    details["mass_conservation"] = f"max per-step relative mass change {drift:.2e}"

    rise = np.max(np.diff(e), initial=-np.inf)
    checks["energy_dissipation"] = bool(rise <= ENERGY_TOL * (1.0 + abs(e[0])))
    details["energy_dissipation"] = f"largest per-step energy change {rise:.3e}"

    spent = 2.0 * sum(r.dt * (r.dissipation + r.eps_dissipation) for r in records)
    lhs = e[-1] + spent
    rhs = e[0] + INEQUALITY_TOL * abs(e[0])
    checks["energy_inequality"] = bool(lhs <= rhs)
    details["energy_inequality"] = f"E(T) + 2 sum dt D = {lhs:.10g} vs bound {rhs:.10g}"

    min_u = np.array([r.min_u for r in series])
    min_v = np.array([r.min_v for r in series])
    if isinstance(scenario.pot, ForceFree):
        low = float(min(min_u.min(), min_v.min()))
        checks["nonnegativity"] = bool(low >= -NONNEG_TOL)
        details["nonnegativity"] = f"min height over run {low:.3e}"
        s0, e0 = initial.entropy, initial.energy
        over = [r.t for r in series
                if not (np.isfinite(r.entropy) and r.entropy <= entropy_ceiling(r.t, s0, e0))]
        checks["entropy_ceiling"] = not over
        details["entropy_ceiling"] = ("entropy below heuristic Gronwall ceiling" if not over
                                      else f"ceiling exceeded first at t={over[0]:.4g} (heuristic)")
    else:
        pot = scenario.pot
        delta = POSITIVITY_FRACTION * min(pot.zero(1), pot.zero(2))
        low = float(min(min_u.min(), min_v.min()))
        barrier = max(positivity_barrier(min_u.min(), pot, 1), positivity_barrier(min_v.min(), pot, 2))
        checks["positivity"] = bool(low >= delta and np.isfinite(barrier))
        details["positivity"] = (f"min height {low:.4g} vs delta {delta:.4g}; "
                                 f"max barrier {barrier:.4g}")
    checks["complete"] = bool(summary.complete)
    details["complete"] = "reached t_end" if summary.complete else f"aborted: {summary.error}"
    return checks, details


def run_scenario(scenario, out=None, snapshot_every=None, entropy_cfg=None):
    """Run ``scenario`` with diagnostics and evaluate its invariant checklist.

    ``out(t, state, record)`` is called on every accepted step.  With
    ``snapshot_every = k`` every k-th accepted state (and the initial one)
    is kept in ``report.snapshots`` as ``(t, state)`` pairs.
    """
    s = scenario
    initial = s.initial_state()
    if entropy_cfg is None:
        entropy_cfg = EntropyConfig.for_model(s.model, default_cap(initial), s.solver.epsilon)
    rec = DiagnosticsRecorder(s.model, s.params, s.pot, s.grid, s.solver.epsilon, entropy_cfg,
                              average=s.solver.face_average)
    first = rec.start(initial)
    snapshots = [(0.0, initial)] if snapshot_every else []

    def sink(t, state, result):
        r = rec(t, state, result)
        if snapshot_every and len(rec.records) % snapshot_every == 0:
            snapshots.append((t, state))
        if out is not None:
            out(t, state, r)

    summary = run(initial, s.t_end, s.solver, s.model, s.params, s.pot, s.grid, sink)
    checks, details = evaluate_checks(s, first, rec.records, summary)
    logger.info("scenario %s: %d steps, checks %s", s.name, summary.n_steps,
                "pass" if all(checks.values()) else "FAIL")
    return RunReport(s, summary, first, rec.records, checks, details, snapshots)
