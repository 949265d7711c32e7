"""Backward-Euler time stepping of the eps-regularised two-layer system.

The solved system is

    u_t + ((M11 + eps) p1_x + M12 p2_x)_x = 0,
    v_t + (M21 p1_x + (M22 + eps) p2_x)_x = 0,

discretised with the flux form of :mod:`bilayer.discretization`.  The fully
implicit scheme evaluates mobilities and the capillary pressure at the new
state and is solved by Newton's method with an analytic banded Jacobian.
The intermolecular force enters through the secant slope
``(U(new) - U(old)) / (new - old)`` (a discrete gradient), which reduces
to ``Pi(new)`` up to ``O(dt)`` and makes every step satisfy

    E(new) - E(old) + 2 dt D_step = -Q(new - old) <= 0

for any ``dt``, with ``D_step`` the dissipation of the pressures used by
the step and ``Q`` the capillary quadratic form.  Without forces this is
plain backward Euler.  The semi-implicit scheme freezes the mobilities
(and linearises the potentials) at the old state, so each step is a
single linear solve.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.linalg as la

from .discretization import FACE_AVERAGES
from .exceptions import ConfigError, DtUnderflowError, NewtonDivergedError
from .model import (
    FilmPair,
    PressurePair,
    energy,
    mobility_eval,
    mobility_partials,
    potential_difference_quotient,
    potential_force,
    potential_force_derivative,
)

logger = logging.getLogger(__name__)

FULLY_IMPLICIT = "fully_implicit"
SEMI_IMPLICIT = "semi_implicit"
SCHEMES = (FULLY_IMPLICIT, SEMI_IMPLICIT)

NEWTON_DIVERGED = "NewtonDiverged"
ENERGY_INCREASED = "EnergyIncreased"
DT_UNDERFLOW = "DtUnderflow"

DT_GROWTH = 1.2
GROW_AFTER = 3
MAX_HALVINGS = 5
STEP_TOL = 1e-11
ROUNDOFF_FACTOR = 4.0
CLIP_SLACK = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping and Newton settings.

    ``newton_tol`` bounds ``dt * max|R|``, i.e. the residual of the update
    ``new - old + dt * div(J)`` measured in height units.
    """

    epsilon: float = 1e-6
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 1e-1
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    scheme: str = FULLY_IMPLICIT
    energy_guard: bool = True
    face_average: str = "arithmetic"

    def __post_init__(self):
        errors = []
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            errors.append(f"solver.epsilon: must be nonnegative; got {self.epsilon!r}")
        for name in ("dt_init", "dt_min", "dt_max", "newton_tol"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                errors.append(f"solver.{name}: must be positive; got {value!r}")
        if not errors and not self.dt_min <= self.dt_init <= self.dt_max:
            errors.append("solver.dt_init: must satisfy dt_min <= dt_init <= dt_max")
        if int(self.newton_max_iter) != self.newton_max_iter or self.newton_max_iter < 1:
            errors.append(f"solver.newton_max_iter: must be a positive integer; "
                          f"got {self.newton_max_iter!r}")
        if self.scheme not in SCHEMES:
            errors.append(f"solver.scheme: must be one of {SCHEMES}; got {self.scheme!r}")
        if self.face_average not in FACE_AVERAGES:
            errors.append(f"solver.face_average: must be one of {FACE_AVERAGES}; "
                          f"got {self.face_average!r}")
        if errors:
            raise ConfigError(errors)

    def with_fixed_dt(self, dt):
        return replace(self, dt_init=dt, dt_min=min(dt, self.dt_min), dt_max=dt)


@dataclass
class StepResult:
    state: FilmPair
    dt_used: float
    newton_iters: int
    accepted: bool
    reject_reason: Optional[str] = None
    residual_norm: float = np.nan


class DiscreteSystem:
    """Spatially discrete right-hand side, residual and Jacobian."""

    def __init__(self, model, params, pot, grid, epsilon, face_average="arithmetic"):
        self.model = model
        self.params = params
        self.pot = pot
        self.grid = grid
        self.epsilon = float(epsilon)
        self.face_average = face_average
        self._GL = (grid.grad_matrix @ grid.lap_matrix).tocsr()

    def pressures(self, state):
        L = self.grid.laplacian
        lu, lv = L(state.u), L(state.v)
        p1 = (self.params.sigma + 1.0) * lu + lv - potential_force(self.pot, 1, state.u)
        p2 = lu + lv - potential_force(self.pot, 2, state.v)
        return PressurePair(p1, p2)

    def face_mobility(self, state, eps=0.0):
        hu = self.grid.face_heights(state.u, self.face_average)[0]
        hv = self.grid.face_heights(state.v, self.face_average)[0]
        return mobility_eval(self.model, self.params, hu, hv, eps)

    def step_pressures(self, new, old=None, linearize_at=None):
        """Pressures used by a step: secant forces between ``old`` and ``new``.

        Without ``old`` these are the plain pressures of ``new``;
        ``linearize_at`` replaces the potentials by their tangent there.
        """
        if linearize_at is not None:
            return self._linearized_pressures(new, linearize_at)
        if old is None:
            return self.pressures(new)
        L = self.grid.laplacian
        lu, lv = L(new.u), L(new.v)
        dq1 = potential_difference_quotient(self.pot, 1, old.u, new.u)[0]
        dq2 = potential_difference_quotient(self.pot, 2, old.v, new.v)[0]
        return PressurePair((self.params.sigma + 1.0) * lu + lv - dq1, lu + lv - dq2)

    def fluxes(self, state, frozen=None, linearize_at=None, old=None):
        """Face fluxes ``(J1, J2)`` including the eps terms.

        ``frozen`` replaces the mobility (without eps) by a precomputed one;
        ``linearize_at`` and ``old`` select the step pressures (see
        :meth:`step_pressures`).
        """
        p = self.step_pressures(state, old, linearize_at)
        g1 = self.grid.gradient(p.p1)
        g2 = self.grid.gradient(p.p2)
        M = self.face_mobility(state) if frozen is None else frozen
        eps = self.epsilon
        J1 = (M.m11 + eps) * g1 + M.m12 * g2
        J2 = M.m12 * g1 + (M.m22 + eps) * g2
        return J1, J2

    def _linearized_pressures(self, state, base):
        L = self.grid.laplacian
        lu, lv = L(state.u), L(state.v)
        pi1 = (potential_force(self.pot, 1, base.u)
               + potential_force_derivative(self.pot, 1, base.u) * (state.u - base.u))
        pi2 = (potential_force(self.pot, 2, base.v)
               + potential_force_derivative(self.pot, 2, base.v) * (state.v - base.v))
        return PressurePair((self.params.sigma + 1.0) * lu + lv - pi1, lu + lv - pi2)

    def operator(self, state, frozen=None, linearize_at=None, old=None):
        """Nodal ``div J`` for both layers (so that ``u_t = -operator``)."""
        J1, J2 = self.fluxes(state, frozen, linearize_at, old)
        return self.grid.divergence(J1), self.grid.divergence(J2)

    def residual(self, new, old, dt, frozen=None, linearize_at=None):
        du, dv = self.operator(new, frozen, linearize_at, old)
        return (new.u - old.u) / dt + du, (new.v - old.v) / dt + dv

    def jacobian_bands(self, new, old, dt, frozen=None, linearize_at=None):
        """Jacobian blocks as bands: ``B[a, b, i, k] = dR_a[i] / dx_b[i - 2 + k]``.

        ``a, b`` index the layers (0 = u, 1 = v); entries whose column falls
        outside the grid are zero.
        """
        grid, eps = self.grid, self.epsilon
        sig1 = self.params.sigma + 1.0
        nf = grid.n_cells
        GL = self._GL_band
        gd = []
        for kind in (1, 2):
            if linearize_at is None:
                a, b = (old.u, new.u) if kind == 1 else (old.v, new.v)
                dpi = potential_difference_quotient(self.pot, kind, a, b)[1]
            else:
                f = linearize_at.u if kind == 1 else linearize_at.v
                dpi = potential_force_derivative(self.pot, kind, f)
            band = np.zeros((nf, 4))
            band[:, 1] = -dpi[:-1] / grid.dx
            band[:, 2] = dpi[1:] / grid.dx
            gd.append(band)
        # face gradients of the pressure derivatives
        Gp = [[sig1 * GL - gd[0], GL], [GL, GL - gd[1]]]

        if frozen is None:
            M = self.face_mobility(new)
        else:
            M = frozen
        m = [[M.m11 + eps, M.m12], [M.m12, M.m22 + eps]]
        F = np.empty((2, 2, nf, 4))
        for a in range(2):
            for b in range(2):
                F[a, b] = m[a][0][:, None] * Gp[0][b] + m[a][1][:, None] * Gp[1][b]

        if frozen is None:
            p = self.step_pressures(new, old, linearize_at)
            g = (grid.gradient(p.p1), grid.gradient(p.p2))
            hu, dlu, dru = grid.face_heights(new.u, self.face_average)
            hv, dlv, drv = grid.face_heights(new.v, self.face_average)
            dMu, dMv = mobility_partials(self.model, self.params, hu, hv)
            for b, (dM, dl, dr) in enumerate(((dMu, dlu, dru), (dMv, dlv, drv))):
                dm = [[dM.m11, dM.m12], [dM.m12, dM.m22]]
                for a in range(2):
                    c = dm[a][0] * g[0] + dm[a][1] * g[1]
                    F[a, b, :, 1] += c * dl
                    F[a, b, :, 2] += c * dr

        w = grid.weights
        B = np.zeros((2, 2, grid.n_nodes, 5))
        B[:, :, :-1, 1:] += F / w[:-1, None]
        B[:, :, 1:, :4] -= F / w[1:, None]
        B[0, 0, :, 2] += 1.0 / dt
        B[1, 1, :, 2] += 1.0 / dt
        return B

    @cached_property
    def _GL_band(self):
        nf = self.grid.n_cells
        GL = self._GL.tocoo()
        band = np.zeros((nf, 4))
        band[GL.row, GL.col - GL.row + 1] = GL.data
        return band

    def _band_index(self):
        n = self.grid.n_nodes
        i = np.arange(n)
        out = []
        for k in range(5):
            c = i - 2 + k
            ok = (c >= 0) & (c < n)
            out.append((i[ok], c[ok], ok))
        return out

    def jacobian(self, new, old, dt, frozen=None, linearize_at=None):
        """Sparse Jacobian of :meth:`residual` w.r.t. ``new``, unknowns ordered ``[u; v]``."""
        n = self.grid.n_nodes
        B = self.jacobian_bands(new, old, dt, frozen, linearize_at)
        rows, cols, vals = [], [], []
        for k, (i, c, ok) in enumerate(self._band_index()):
            for a in range(2):
                for b in range(2):
                    rows.append(a * n + i)
                    cols.append(b * n + c)
                    vals.append(B[a, b, ok, k])
        return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(2 * n, 2 * n)).tocsc()

    def solve_linear(self, new, old, dt, rhs, frozen=None, linearize_at=None):
        """Solve ``J delta = rhs`` (``rhs`` ordered ``[u; v]``) as a banded system."""
        return self.solve_bands(self.jacobian_bands(new, old, dt, frozen, linearize_at), rhs)

    def solve_bands(self, B, rhs):
        """Solve with Jacobian bands ``B``.

        Interleaving the unknowns as ``(u_0, v_0, u_1, ...)`` gives five
        sub- and super-diagonals.
        """
        n = self.grid.n_nodes
        ab = np.zeros((11, 2 * n))
        for k, (i, c, ok) in enumerate(self._band_index()):
            for a in range(2):
                for b in range(2):
                    I, Jc = 2 * i + a, 2 * c + b
                    ab[5 + I - Jc, Jc] = B[a, b, ok, k]
        r = np.empty(2 * n)
        r[0::2], r[1::2] = rhs[:n], rhs[n:]
        try:
            y = la.solve_banded((5, 5), ab, r, check_finite=False)
        except (la.LinAlgError, ValueError) as exc:
            raise NewtonDivergedError(f"singular Jacobian: {exc}") from exc
        if not np.all(np.isfinite(y)):
            raise NewtonDivergedError("linear solve produced non-finite values")
        return np.concatenate((y[0::2], y[1::2]))


def roundoff_floor(B, dt, x):
    """Size of ``dt * max|R|`` produced by one-ulp perturbations of ``x``.

    Estimated as ``eps_mach * dt * ||J - I/dt||_inf * max|x|``; on fine
    grids this exceeds any fixed tolerance because the spatial operator
    scales like ``dx**-4``.
    """
    rows = np.abs(B).sum(axis=(1, 3))
    rows[0] -= 1.0 / dt
    rows[1] -= 1.0 / dt
    return float(np.finfo(float).eps * dt * np.max(rows) * np.max(np.abs(x)))


def _pack(state):
    return np.concatenate((state.u, state.v))


def _unpack(x, n):
    return FilmPair(x[:n], x[n:])


def newton_solve(system, old, dt, tol, max_iter, step_tol=STEP_TOL):
    """Solve the backward-Euler equations from the initial guess ``old``.

    Returns ``(state, iterations, scaled_residual)``.  Each iteration takes
    one Newton update damped by step halving (at most ``MAX_HALVINGS``).
    Converged when the scaled residual is below ``tol`` or below
    ``ROUNDOFF_FACTOR`` times the roundoff floor, or when a full update is
    below ``step_tol * (1 + max|x|)``.
    """
    n = system.grid.n_nodes
    x = _pack(old)
    state = old
    R = np.concatenate(system.residual(state, old, dt))
    rnorm = dt * np.max(np.abs(R))
    for it in range(1, max_iter + 1):
        B = system.jacobian_bands(state, old, dt)
        target = max(tol, ROUNDOFF_FACTOR * roundoff_floor(B, dt, x))
        delta = system.solve_bands(B, -R)
        if np.max(np.abs(delta)) <= step_tol * (1.0 + np.max(np.abs(x))):
            state = _unpack(x + delta, n)
            R = np.concatenate(system.residual(state, old, dt))
            return state, it, dt * np.max(np.abs(R))
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = _unpack(x + lam * delta, n)
            R_trial = np.concatenate(system.residual(trial, old, dt))
            r_trial = dt * np.max(np.abs(R_trial))
            if np.isfinite(r_trial) and (r_trial < rnorm or r_trial <= target):
                break
            lam *= 0.5
        else:
            if rnorm <= target:
                return state, it, rnorm
            raise NewtonDivergedError(
                f"no residual reduction after {MAX_HALVINGS} halvings (residual {rnorm:.3e})")
        x = x + lam * delta
        state, R, rnorm = trial, R_trial, r_trial
        if rnorm <= target:
            return state, it, rnorm
    raise NewtonDivergedError(f"not converged in {max_iter} iterations (residual {rnorm:.3e})")


def semi_implicit_solve(system, old, dt):
    """One linear solve with mobilities frozen and potentials linearised at ``old``."""
    n = system.grid.n_nodes
    frozen = system.face_mobility(old)
    R0 = np.concatenate(system.residual(old, old, dt, frozen, old))
    new = _unpack(_pack(old) + system.solve_linear(old, old, dt, -R0, frozen, old), n)
    R = np.concatenate(system.residual(new, old, dt, frozen, old))
    return new, 1, dt * np.max(np.abs(R))


def residual(state_new, state_old, dt, cfg, model, params, pot, grid):
    """Backward-Euler residual ``(R_u, R_v)`` of the fully implicit scheme."""
    state_new.check_grid(grid)
    state_old.check_grid(grid)
    system = DiscreteSystem(model, params, pot, grid, cfg.epsilon, cfg.face_average)
    return system.residual(state_new, state_old, dt)


def jacobian(state_new, state_old, dt, cfg, model, params, pot, grid):
    """Sparse Jacobian of :func:`residual` w.r.t. ``state_new`` (unknowns ``[u; v]``)."""
    system = DiscreteSystem(model, params, pot, grid, cfg.epsilon, cfg.face_average)
    return system.jacobian(state_new, state_old, dt)


class Stepper:
    """Adaptive backward-Euler stepper; owns the step-size controller state."""

    def __init__(self, cfg, model, params, pot, grid):
        self.cfg = cfg
        self.system = DiscreteSystem(model, params, pot, grid, cfg.epsilon, cfg.face_average)
        self.dt = cfg.dt_init
        self._streak = 0
        self.n_rejected = 0

    def energy(self, state):
        s = self.system
        return energy(state, s.params, s.pot, s.grid)

    def attempt(self, state, dt, e_old=None):
        """Try one step of size ``dt``; never changes the controller state."""
        cfg = self.cfg
        try:
            if cfg.scheme == SEMI_IMPLICIT:
                new, iters, rnorm = semi_implicit_solve(self.system, state, dt)
            else:
                new, iters, rnorm = newton_solve(self.system, state, dt, cfg.newton_tol,
                                                 cfg.newton_max_iter)
        except NewtonDivergedError as exc:
            logger.debug("dt=%.3e rejected: %s", dt, exc)
            return StepResult(state, dt, cfg.newton_max_iter, False, NEWTON_DIVERGED)
        if cfg.energy_guard:
            e_old = self.energy(state) if e_old is None else e_old
            e_new = self.energy(new)
            if not e_new <= e_old + 1e-10 * (1.0 + abs(e_old)):
                return StepResult(state, dt, iters, False, ENERGY_INCREASED, rnorm)
        return StepResult(new, dt, iters, True, None, rnorm)

    def step(self, state, dt_cap=None, e_old=None):
        """Advance one accepted step, halving ``dt`` on rejection.

        ``dt_cap`` clips the step (to land exactly on an end time) without
        touching the controller; a clipped step may be shorter than
        ``dt_min``, and a cap within ``CLIP_SLACK`` above ``dt`` is taken as
        is so that roundoff in the accumulated time never leaves a sliver.
        """
        cfg = self.cfg
        if cfg.energy_guard and e_old is None:
            e_old = self.energy(state)
        while True:
            clipped = dt_cap is not None and dt_cap < self.dt * (1.0 + CLIP_SLACK)
            dt = dt_cap if clipped else self.dt
            result = self.attempt(state, dt, e_old)
            if result.accepted:
                self._streak += 1
                if self._streak >= GROW_AFTER:
                    self.dt = min(self.dt * DT_GROWTH, cfg.dt_max)
                    self._streak = 0
                return result
            self.n_rejected += 1
            self._streak = 0
            self.dt = 0.5 * dt
            if self.dt < cfg.dt_min:
                raise DtUnderflowError(
                    f"dt {self.dt:.3e} below dt_min {cfg.dt_min:.3e} ({result.reject_reason})",
                    dt=self.dt)


def step(state, cfg, model, params, pot, grid):
    """One adaptive step starting from ``cfg.dt_init``."""
    state.check_grid(grid)
    return Stepper(cfg, model, params, pot, grid).step(state)


@dataclass
class RunSummary:
    final: FilmPair
    t: float
    n_steps: int
    n_rejected: int
    complete: bool
    error: Optional[str] = None
    dts: List[float] = field(default_factory=list)


def run(initial, t_end, cfg, model, params, pot, grid, sink: Optional[Callable] = None):
    """Advance ``initial`` to exactly ``t_end``.

    ``sink(t, state, result)`` is called after every accepted step.  On
    :class:`DtUnderflowError` the run stops and the summary is marked
    incomplete.
    """
    if not t_end > 0:
        raise ConfigError(f"scenario.t_end: must be positive; got {t_end!r}")
    initial.check_grid(grid)
    stepper = Stepper(cfg, model, params, pot, grid)
    state, t, dts = initial, 0.0, []
    e_old = stepper.energy(state) if cfg.energy_guard else None
    while t < t_end:
        remaining = t_end - t
        last = remaining <= stepper.dt * (1.0 + CLIP_SLACK)
        try:
            result = stepper.step(state, dt_cap=remaining if last else None, e_old=e_old)
        except DtUnderflowError as exc:
            logger.warning("run aborted at t=%.6g: %s", t, exc)
            return RunSummary(state, t, len(dts), stepper.n_rejected, False, str(exc), dts)
        state = result.state
        t = t_end if last and result.dt_used == remaining else t + result.dt_used
        dts.append(result.dt_used)
        if cfg.energy_guard:
            e_old = stepper.energy(state)
        if sink is not None:
            sink(t, state, result)
    return RunSummary(state, t, len(dts), stepper.n_rejected, True, None, dts)
