"""The acceptance suite: one function per criterion, each returning ``(passed, detail)``.

Shared by ``bilayer check`` and the test-suite.  Scenario runs are cached
per suite so that criteria observing the same run do not repeat it.
"""

import time
from dataclasses import dataclass, replace
from typing import Callable, List, Optional

import numpy as np

from ..diagnostics import HOLDER_EXPONENT, HOLDER_SLACK, holder_fit
from ..discretization import Grid
from ..model import (
    BornVdW,
    FilmPair,
    ForceFree,
    NavierSlip,
    NoSlip,
    PhysicalParams,
    WeakSlip,
    energy,
    mobility_eval,
    pressures,
)
from .initial_conditions import CosinePerturbed
from .scenarios import SCENARIOS, get_scenario, run_scenario
from .studies import balance_order_study, eps_sweep, refinement_study, run_fixed_steps, single_layer_check

MASS_REL_TOL = 1e-12
ORDER_MIN = 1.8
PSD_TOL = -1e-12
VARIATION_TOL = 1e-6
EPS_LIST = (1e-2, 1e-3, 1e-4, 1e-5)
SINGLE_LAYER_TOL = 1e-6


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name:<28s} ({self.seconds:6.1f} s) {self.detail}"


class AcceptanceSuite:
    def __init__(self, seed=0):
        self.seed = seed
        self._reports = {}
        self.wall_time = {}

    def report(self, name, snapshots=False):
        """Cached scenario run; its wall time is kept in ``wall_time[name]``."""
        key = (name, snapshots)
        if key not in self._reports:
            t0 = time.perf_counter()
            self._reports[key] = run_scenario(get_scenario(name), snapshot_every=1 if snapshots else None)
            self.wall_time[name] = time.perf_counter() - t0
        return self._reports[key]

    def _all_reports(self):
        return [self.report(name, snapshots=(name == "dewetting")) for name in SCENARIOS]

    # 1
    def mass_conservation(self):
        budget, worst, slow = 30.0, 0.0, []
        for name in SCENARIOS:
            s = get_scenario(name).with_grid(256)
            t0 = time.perf_counter()
            states = run_fixed_steps(s, 1000, s.t_end / 1000)
            elapsed = time.perf_counter() - t0
            if elapsed > budget:
                slow.append(f"{name} {elapsed:.1f}s")
            for layer in ("u", "v"):
                m = np.array([s.grid.integrate(getattr(st, layer)) for st in states])
                worst = max(worst, float(np.max(np.abs(np.diff(m)) / np.abs(m[:-1]))))
        ok = worst <= MASS_REL_TOL and not slow
        detail = f"max per-step relative mass change {worst:.2e} over {len(SCENARIOS)} scenarios"
        if slow:
            detail += f"; over {budget:g}s budget: {', '.join(slow)}"
        return ok, detail

    # 2
    def energy_dissipation(self):
        bad = [r.scenario.name for r in self._all_reports() if not r.checks["energy_dissipation"]]
        return not bad, "energy non-increasing on all scenarios" if not bad else f"violated: {bad}"

    # 3
    def balance_order(self):
        s = replace(get_scenario("smooth_noslip"), grid=Grid(128))
        res = balance_order_study(s, levels=5, dt0=1e-4, t_end=5e-3)
        ratios = res.residuals[:-1] / res.residuals[1:]
        return res.order >= ORDER_MIN, (f"fitted order {res.order:.3f}; halving ratios "
                                        + ", ".join(f"{q:.2f}" for q in ratios))

    # 4
    def mobility_psd(self, n_samples=100_000):
        rng = np.random.default_rng(self.seed)
        params = PhysicalParams(sigma=1.0, mu=1.0)
        models = [NoSlip()] + [NavierSlip(a) for a in (0.0, 0.5, 2.0)]
        models += [WeakSlip(b1=b1, b=b) for b in (0.1, 1.0) for b1 in (0.1, 1.0)]
        worst = np.inf
        for model in models:
            for mu in (0.5, 1.0, 2.0):
                p = replace(params, mu=mu)
                u = rng.uniform(-3.0, 3.0, n_samples)
                v = rng.uniform(-3.0, 3.0, n_samples)
                u[: n_samples // 20] = 0.0
                v[n_samples // 20: n_samples // 10] = 0.0
                M = mobility_eval(model, p, u, v)
                mats = np.stack([np.stack([M.m11, M.m12], -1), np.stack([M.m12, M.m22], -1)], -2)
                worst = min(worst, float(np.linalg.eigvalsh(mats)[:, 0].min()))
        return worst >= PSD_TOL, f"smallest eigenvalue {worst:.3e} over {len(models) * 3} model settings"

    # 5
    def variational_consistency(self, n_states=5):
        rng = np.random.default_rng(self.seed + 1)
        grid = Grid(32)
        params = PhysicalParams(sigma=0.7, mu=1.3)
        worst = 0.0
        for pot in (ForceFree(), BornVdW()):
            for _ in range(n_states):
                st = FilmPair(0.5 + 0.4 * rng.random(grid.n_nodes), 0.5 + 0.4 * rng.random(grid.n_nodes))
                p = pressures(st, params, pot, grid)
                for layer, target in (("u", p.p1), ("v", p.p2)):
                    fd = np.empty(grid.n_nodes)
                    for i in range(grid.n_nodes):
                        h = 1e-5
                        up, dn = st.copy(), st.copy()
                        getattr(up, layer)[i] += h
                        getattr(dn, layer)[i] -= h
                        dE = (energy(up, params, pot, grid) - energy(dn, params, pot, grid)) / (2 * h)
                        fd[i] = -0.5 * dE / grid.weights[i]
                    worst = max(worst, float(np.max(np.abs(fd - target)) / np.max(np.abs(target))))
        return worst < VARIATION_TOL, f"max relative error {worst:.2e}"

    # 6
    def nonnegativity(self):
        budget, parts, ok = 300.0, [], True
        for name in ("touching_zero_noslip", "touching_zero_navier"):
            r = self.report(name)
            good = (r.checks["nonnegativity"] and r.checks["entropy_ceiling"]
                    and self.wall_time[name] <= budget)
            ok &= good
            parts.append(f"{r.scenario.model.tag}: {r.details['nonnegativity']}, "
                         f"{r.details['entropy_ceiling']}, run {self.wall_time[name]:.1f}s")
        return ok, "; ".join(parts)

    # 7
    def positivity(self):
        r = self.report("positivity_born")
        ok = r.checks["positivity"] and self.wall_time["positivity_born"] <= 300.0
        return ok, f"{r.details['positivity']}; run {self.wall_time['positivity_born']:.1f}s"

    # 8
    def eps_convergence(self):
        s = get_scenario("smooth_noslip")
        t0 = time.perf_counter()
        res = eps_sweep(s, EPS_LIST, dt=1e-3)
        elapsed = time.perf_counter() - t0
        ok = res.decreasing(0.1) and elapsed <= 600.0
        return ok, "distances " + ", ".join(f"{d:.3e}" for d in res.distances)

    # 9
    def single_layer(self):
        base = get_scenario("smooth_noslip")
        worst, parts = 0.0, []
        for model in (NoSlip(), NavierSlip(alpha=0.5)):
            s = replace(base, initial_condition=CosinePerturbed(1.0, 0.0, 0.1, 0.0, 1), model=model,
                        t_end=0.2, grid=Grid(128), solver=replace(base.solver, epsilon=1e-8))
            dev = single_layer_check(s)
            worst = max(worst, dev)
            parts.append(f"{model.tag} {dev:.2e}")
        return worst <= SINGLE_LAYER_TOL, "max deviation " + ", ".join(parts)

    # 10
    def holder(self):
        r = self.report("dewetting", snapshots=True)
        times = [t for t, _ in r.snapshots]
        states = [s for _, s in r.snapshots]
        rep = holder_fit(times, states)
        bound = HOLDER_EXPONENT - HOLDER_SLACK
        return rep.satisfies_bound and rep.applicable, (f"fitted exponent {rep.fitted_exponent:.3f} "
                                                        f"(bound {bound:.3f}); run {self.wall_time['dewetting']:.1f}s")

    # 11
    def energy_inequality(self):
        bad = [r.scenario.name for r in self._all_reports() if not r.checks["energy_inequality"]]
        return not bad, "holds on all scenarios" if not bad else f"violated: {bad}"

    # 12
    def spatial_order(self):
        s = get_scenario("smooth_noslip").with_grid(64)
        res = refinement_study(s, levels=4, dt_space=1e-4, t_end=0.05)
        return res.spatial_order >= ORDER_MIN, (
            f"spatial order {res.spatial_order:.3f} (errors "
            + ", ".join(f"{e:.2e}" for e in res.spatial_errors)
            + f"), temporal order {res.temporal_order:.3f}")


CRITERIA: List[tuple] = [
    (1, "mass conservation", "mass_conservation"),
    (2, "energy dissipation", "energy_dissipation"),
    (3, "energy-balance order", "balance_order"),
    (4, "mobility PSD", "mobility_psd"),
    (5, "variational consistency", "variational_consistency"),
    (6, "nonnegativity (no forces)", "nonnegativity"),
    (7, "positivity (with forces)", "positivity"),
    (8, "eps-convergence", "eps_convergence"),
    (9, "single-layer reduction", "single_layer"),
    (10, "Holder-in-time bound", "holder"),
    (11, "cumulative energy inequality", "energy_inequality"),
    (12, "spatial order", "spatial_order"),
]


def run_criterion(number, suite=None):
    suite = AcceptanceSuite() if suite is None else suite
    num, name, method = next(c for c in CRITERIA if c[0] == number)
    t0 = time.perf_counter()
    try:
        passed, detail = getattr(suite, method)()
    except Exception as exc:  # reported as a failing row, not a crash of the table
        passed, detail = False, f"error: {type(exc).__name__}: {exc}"
    return CriterionResult(num, name, bool(passed), detail, time.perf_counter() - t0)


def run_acceptance(numbers=None, suite=None, echo: Optional[Callable[[str], None]] = None):
    """Run the selected criteria (all by default); ``echo`` receives each table line."""
    suite = AcceptanceSuite() if suite is None else suite
    results = []
    for num, _, _ in CRITERIA:
        if numbers is not None and num not in numbers:
            continue
        res = run_criterion(num, suite)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
