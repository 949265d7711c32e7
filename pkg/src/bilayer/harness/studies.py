"""Parameter sweeps, convergence studies and the single-layer cross-check."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List

import numpy as np
from scipy.optimize import fsolve

from ..diagnostics import DiagnosticsRecorder
from ..exceptions import ConfigError, PreconditionError
from ..model import FilmPair, ForceFree, NavierSlip, NoSlip
from ..stepper import Stepper, run

logger = logging.getLogger(__name__)


def _final_state(scenario, initial=None):
    s = scenario
    initial = s.initial_state() if initial is None else initial
    summary = run(initial, s.t_end, s.solver, s.model, s.params, s.pot, s.grid)
    if not summary.complete:
        raise ConfigError(f"scenario {s.name!r} aborted at t={summary.t:.4g}: {summary.error}")
    return summary


def fit_order(h, err):
    """Least-squares slope of ``log(err)`` against ``log(h)``; NaN if any error is zero."""
    h, err = np.asarray(h, dtype=float), np.asarray(err, dtype=float)
    if err.size < 2 or np.any(err <= 0) or not np.all(np.isfinite(err)):
        return np.nan
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class EpsSweepResult:
    eps: np.ndarray
    finals: List[FilmPair]
    distances: np.ndarray

    def decreasing(self, slack=0.1):
        """Every distance at most ``(1 - slack)`` times its predecessor (zeros count as equal)."""
        d = self.distances
        if np.all(d == 0):
            return True
        return bool(np.all(d[1:] <= (1.0 - slack) * d[:-1]))


def eps_sweep(scenario, eps_list, warm_start=False, dt=None, n_jobs=1):
    """Final states for each ``eps`` and max-norm distances between neighbours.

    Every member runs with the same fixed step ``dt`` (default
    ``scenario.solver.dt_init``) so that time-discretisation errors are
    shared and cancel in the distances.  ``warm_start`` starts each member
    from the previous member's final state.
    """
    eps = np.asarray(eps_list, dtype=float)
    if eps.ndim != 1 or eps.size < 3:
        raise ConfigError("sweep.eps: need at least 3 values")
    if np.any(eps <= 0) or np.any(np.diff(eps) > 0):
        raise ConfigError("sweep.eps: values must be positive and non-increasing")
    dt = scenario.solver.dt_init if dt is None else dt
    members = [replace(scenario, solver=replace(scenario.solver, epsilon=float(e)).with_fixed_dt(dt))
               for e in eps]
    if warm_start:
        finals, state = [], None
        for m in members:
            state = _final_state(m, state).final
            finals.append(state)
    elif n_jobs is not None and n_jobs != 1:
        with ProcessPoolExecutor(max_workers=None if n_jobs < 0 else n_jobs) as pool:
            finals = [s.final for s in pool.map(_final_state, members)]
    else:
        finals = [_final_state(m).final for m in members]
    distances = np.array([a.max_abs_diff(b) for a, b in zip(finals[:-1], finals[1:])])
    return EpsSweepResult(eps, finals, distances)


@dataclass
class RefinementResult:
    n_cells: np.ndarray
    spatial_errors: np.ndarray
    spatial_order: float
    dts: np.ndarray
    temporal_errors: np.ndarray
    temporal_order: float

    @property
    def applicable(self):
        return bool(np.isfinite(self.spatial_order) and np.isfinite(self.temporal_order))


def refinement_study(scenario, levels=4, dt_space=None, dt_time=None, t_end=None):
    """Observed spatial and temporal orders against the finest level.

    Spatial: ``levels`` grids ``n_cells * 2**k`` at one fixed step, errors
    taken at the coarse nodes.  Temporal: ``levels`` fixed steps
    ``dt_time / 2**k`` on the scenario grid.  Defaults: ``t_end`` from the
    scenario, ``dt_space = t_end / 50`` and ``dt_time = t_end / 10``.
    """
    if int(levels) != levels or levels < 3:
        raise ConfigError(f"refine.levels: must be an integer >= 3; got {levels!r}")
    t_end = scenario.t_end if t_end is None else t_end
    base = replace(scenario, t_end=t_end)
    dt_space = t_end / 50 if dt_space is None else dt_space
    dt_time = t_end / 10 if dt_time is None else dt_time

    n0 = base.grid.n_cells
    n_cells = n0 * 2 ** np.arange(levels)
    finals = [_final_state(replace(base.with_grid(int(n)),
                                   solver=base.solver.with_fixed_dt(dt_space))).final
              for n in n_cells]
    ref = finals[-1]
    s_err = []
    for n, f in zip(n_cells[:-1], finals[:-1]):
        stride = n_cells[-1] // n
        s_err.append(max(np.max(np.abs(f.u - ref.u[::stride])), np.max(np.abs(f.v - ref.v[::stride]))))
    s_err = np.array(s_err)

    dts = dt_time / 2.0 ** np.arange(levels)
    finals = [_final_state(replace(base, solver=base.solver.with_fixed_dt(dt))).final for dt in dts]
    t_err = np.array([f.max_abs_diff(finals[-1]) for f in finals[:-1]])
    return RefinementResult(n_cells, s_err, fit_order(1.0 / n_cells[:-1], s_err),
                            dts, t_err, fit_order(dts[:-1], t_err))


@dataclass
class BalanceOrderResult:
    dts: np.ndarray
    residuals: np.ndarray
    order: float


def balance_order_study(scenario, levels=5, dt0=None, t_end=None):
    """Largest per-step ``|E(new) - E(old) + 2 dt D|`` for fixed steps ``dt0 / 2**k``.

    The residual of one backward-Euler step is the capillary quadratic
    form of the increment, so the fitted order should be about 2.
    """
    t_end = scenario.t_end if t_end is None else t_end
    dt0 = t_end / 8 if dt0 is None else dt0
    dts = dt0 / 2.0 ** np.arange(levels)
    worst = []
    for dt in dts:
        s = replace(scenario, t_end=t_end, solver=scenario.solver.with_fixed_dt(dt))
        rec = DiagnosticsRecorder(s.model, s.params, s.pot, s.grid, s.solver.epsilon,
                                  average=s.solver.face_average)
        initial = s.initial_state()
        rec.start(initial)
        summary = run(initial, s.t_end, s.solver, s.model, s.params, s.pot, s.grid, rec)
        if not summary.complete:
            raise ConfigError(f"balance study aborted at dt={dt:.3g}: {summary.error}")
        worst.append(max(abs(r.energy_balance_residual) for r in rec.records))
    worst = np.array(worst)
    return BalanceOrderResult(dts, worst, fit_order(dts, worst))


def run_fixed_steps(scenario, n_steps, dt):
    """Take exactly ``n_steps`` accepted steps of nominal size ``dt``; returns the states."""
    s = scenario
    stepper = Stepper(s.solver.with_fixed_dt(dt), s.model, s.params, s.pot, s.grid)
    state = s.initial_state()
    states = [state]
    for _ in range(n_steps):
        state = stepper.step(state).state
        states.append(state)
    return states


class SingleLayerReference:
    """Independent backward-Euler solver for ``h_t + ((m(h) + eps) (sigma+1) h_xxx)_x = 0``.

    Written with its own stencils (same node-centred layout and
    arithmetic face average as the bilayer code) and solved with MINPACK's
    hybrid method and a finite-difference Jacobian, so it shares no
    assembly or Newton code with :mod:`bilayer.stepper`.
    """

    def __init__(self, model, params, n_cells, eps):
        if isinstance(model, NoSlip):
            self.mobility = lambda h: np.abs(h) ** 3 / (3.0 * params.mu)
        elif isinstance(model, NavierSlip):
            self.mobility = lambda h: h**2 / params.mu
        else:
            raise PreconditionError(f"single-layer reduction needs no-slip or Navier-slip; "
                                    f"got {model.tag}")
        self.kappa = params.sigma + 1.0
        self.n = int(n_cells)
        self.dx = 1.0 / self.n
        self.eps = float(eps)

    def _second_difference(self, h):
        g = np.empty_like(h)
        dx2 = self.dx**2
        g[1:-1] = (h[2:] - 2.0 * h[1:-1] + h[:-2]) / dx2
        g[0] = 2.0 * (h[1] - h[0]) / dx2
        g[-1] = 2.0 * (h[-2] - h[-1]) / dx2
        return g

    def residual(self, h, h_old, dt):
        p = self.kappa * self._second_difference(h)
        face_h = 0.5 * (h[1:] + h[:-1])
        flux = (self.mobility(face_h) + self.eps) * (p[1:] - p[:-1]) / self.dx
        div = np.empty_like(h)
        div[1:-1] = (flux[1:] - flux[:-1]) / self.dx
        div[0] = flux[0] / (0.5 * self.dx)
        div[-1] = -flux[-1] / (0.5 * self.dx)
        return (h - h_old) / dt + div

    def step(self, h_old, dt):
        scale = dt
        h, info, ok, msg = fsolve(lambda h: scale * self.residual(h, h_old, dt), h_old,
                                  xtol=1e-14, full_output=True)
        if ok != 1:
            logger.debug("single-layer reference step: %s", msg)
        return h

    def run(self, h0, dts):
        h = np.array(h0, dtype=float)
        for dt in dts:
            h = self.step(h, dt)
        return h


def single_layer_check(scenario):
    """Max-norm deviation of ``u`` between the bilayer run and the single-layer reference.

    The reference replays the bilayer run's accepted step sequence.
    """
    s = scenario
    initial = s.initial_state()
    if np.any(initial.v != 0):
        raise PreconditionError(f"single-layer check needs v = 0 initially; "
                                f"max |v| = {np.max(np.abs(initial.v)):.3g}")
    if not isinstance(s.pot, ForceFree):
        raise PreconditionError("single-layer check needs a force-free scenario")
    if s.solver.face_average != "arithmetic":
        raise PreconditionError("single-layer reference uses the arithmetic face average")
    reference = SingleLayerReference(s.model, s.params, s.grid.n_cells, s.solver.epsilon)
    summary = _final_state(s)
    h = reference.run(initial.u, summary.dts)
    return float(np.max(np.abs(summary.final.u - h)))
