"""Monitored quantities: energy, dissipation, entropy, masses, minima, barrier, Hölder modulus."""

from dataclasses import astuple, dataclass, fields
from typing import List, Optional

import numpy as np

from .exceptions import InvalidInputError, NotApplicableError
from .model import (
    BornVdW,
    EntropyConfig,
    FilmPair,
    ForceFree,
    PressurePair,
    default_cap,
    energy,
    entropy_total,
    mobility_eval,
    potential_difference_quotient,
    pressures,
)

HOLDER_EXPONENT = 1.0 / 8.0
HOLDER_SLACK = 0.02


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    energy: float
    mass_u: float
    mass_v: float
    min_u: float
    min_v: float
    entropy: float
    dissipation: float
    eps_dissipation: float
    energy_balance_residual: float
    dt: float
    newton_iters: int

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def as_tuple(self):
        return astuple(self)


def _step_pressures(state, prev, params, pot, grid):
    """Capillary pressure at ``state``, secant forces between ``prev`` and ``state``."""
    lu, lv = grid.laplacian(state.u), grid.laplacian(state.v)
    dq1 = potential_difference_quotient(pot, 1, prev.u, state.u)[0]
    dq2 = potential_difference_quotient(pot, 2, prev.v, state.v)[0]
    return PressurePair((params.sigma + 1.0) * lu + lv - dq1, lu + lv - dq2)


def dissipation(state, model, params, pot, eps, grid, average="arithmetic", pressure=None):
    """Return ``(int p_x^T M p_x, eps * int |p_x|^2)`` with face quantities.

    The first value is nonnegative up to roundoff because the face
    mobilities are positive semidefinite.  ``pressure`` overrides the
    pressures of ``state`` (the mobility is always taken at ``state``).
    """
    state.check_grid(grid)
    p = pressures(state, params, pot, grid) if pressure is None else pressure
    g1, g2 = grid.gradient(p.p1), grid.gradient(p.p2)
    hu = grid.face_heights(state.u, average)[0]
    hv = grid.face_heights(state.v, average)[0]
    M = mobility_eval(model, params, hu, hv)
    quad = grid.integrate_faces(M.m11 * g1**2 + 2.0 * M.m12 * g1 * g2 + M.m22 * g2**2)
    eps_part = eps * grid.integrate_faces(g1**2 + g2**2)
    return quad, eps_part


class DiagnosticsRecorder:
    """Builds one :class:`DiagnosticsRecord` per accepted step.

    Usable directly as the ``sink`` of :func:`bilayer.stepper.run`.  The
    balance residual is ``E(t) - E(t - dt) + 2 dt (D + D_eps)`` with the
    dissipation taken at the new state (``balance="new"``) or at the
    average of old and new states (``balance="midpoint"``).

    With ``step_forces=True`` (the default) the dissipation of every record
    after the first uses the forces of the fully implicit step, the secant
    slope of ``U`` between the previous and current state; these are the
    pressures whose dissipation enters the discrete energy law exactly.
    Without intermolecular forces the choice makes no difference.
    """

    def __init__(self, model, params, pot, grid, epsilon, entropy_cfg=None,
                 average="arithmetic", balance="new", step_forces=True):
        if balance not in ("new", "midpoint"):
            raise InvalidInputError(f"balance must be 'new' or 'midpoint'; got {balance!r}")
        self.model, self.params, self.pot, self.grid = model, params, pot, grid
        self.epsilon = float(epsilon)
        self.entropy_cfg = entropy_cfg
        self.average = average
        self.balance = balance
        self.step_forces = bool(step_forces)
        self.initial: Optional[DiagnosticsRecord] = None
        self.records: List[DiagnosticsRecord] = []
        self._prev_state = None
        self._prev_energy = None

    def start(self, state, t=0.0):
        if self.entropy_cfg is None:
            self.entropy_cfg = EntropyConfig.for_model(self.model, default_cap(state), self.epsilon)
        self.initial = self._make(state, t, 0.0, 0, predecessor=None)
        return self.initial

    def __call__(self, t, state, result):
        if self.initial is None:
            raise InvalidInputError("recorder.start() must be called with the initial state")
        rec = self._make(state, t, result.dt_used, result.newton_iters, predecessor=True)
        self.records.append(rec)
        return rec

    def _make(self, state, t, dt, iters, predecessor):
        g = self.grid
        e = energy(state, self.params, self.pot, g)
        p = None
        if predecessor is not None and self.step_forces:
            p = _step_pressures(state, self._prev_state, self.params, self.pot, g)
        quad, eps_part = dissipation(state, self.model, self.params, self.pot, self.epsilon, g,
                                     self.average, p)
        if predecessor is None:
            balance = 0.0
        else:
            if self.balance == "midpoint":
                mid = FilmPair(0.5 * (state.u + self._prev_state.u), 0.5 * (state.v + self._prev_state.v))
                quad_b, eps_b = dissipation(mid, self.model, self.params, self.pot, self.epsilon, g,
                                            self.average)
            else:
                quad_b, eps_b = quad, eps_part
            balance = e - self._prev_energy + 2.0 * dt * (quad_b + eps_b)
        self._prev_state, self._prev_energy = state, e
        return DiagnosticsRecord(
            t=float(t),
            energy=e,
            mass_u=g.integrate(state.u),
            mass_v=g.integrate(state.v),
            min_u=float(np.min(state.u)),
            min_v=float(np.min(state.v)),
            entropy=entropy_total(state, self.entropy_cfg, g),
            dissipation=quad,
            eps_dissipation=eps_part,
            energy_balance_residual=balance,
            dt=float(dt),
            newton_iters=int(iters),
        )


def record(state, t, step_meta, model, params, pot, grid, epsilon, entropy_cfg,
           prev_energy=None, average="arithmetic", prev_state=None):
    """Stand-alone record; ``step_meta`` is ``(dt, newton_iters)``.

    Without ``prev_energy`` the balance residual is 0 (no predecessor).
    ``prev_state`` selects the secant forces of the step that produced
    ``state``; by default the plain pressures of ``state`` are used.
    """
    dt, iters = step_meta
    rec = DiagnosticsRecorder(model, params, pot, grid, epsilon, entropy_cfg, average)
    if prev_energy is None:
        return rec._make(state, t, dt, iters, predecessor=None)
    rec._prev_energy = prev_energy
    rec._prev_state = state if prev_state is None else prev_state
    return rec._make(state, t, dt, iters, predecessor=True)


def positivity_barrier(min_height, pot, kind=1):
    """``-log s`` for ``m = 3``, ``s**(3 - m)`` for ``m > 3``; ``+inf`` for ``s <= 0``."""
    if isinstance(pot, ForceFree) or not isinstance(pot, BornVdW):
        raise NotApplicableError("positivity barrier needs intermolecular forces")
    pot.gamma(kind)
    if pot.m < 3:
        raise NotApplicableError(f"positivity barrier needs m >= 3; got m={pot.m}")
    s = float(min_height)
    if s <= 0:
        return np.inf
    if pot.m == 3:
        return -np.log(s)
    return s ** (3.0 - pot.m)


@dataclass
class HolderReport:
    lags: np.ndarray
    moduli: np.ndarray
    fitted_exponent: float

    @property
    def applicable(self):
        return bool(np.isfinite(self.fitted_exponent))

    @property
    def satisfies_bound(self):
        """Exponent at least ``1/8 - 0.02`` (vacuously true for frozen runs)."""
        return not self.applicable or self.fitted_exponent >= HOLDER_EXPONENT - HOLDER_SLACK


def _interp_states(times, U, t):
    """Linear interpolation in time of stacked states ``U`` (n_t, n_dof) at times ``t``."""
    idx = np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2)
    t0, t1 = times[idx], times[idx + 1]
    w = np.where(t1 > t0, (t - t0) / np.where(t1 > t0, t1 - t0, 1.0), 0.0)
    return (1.0 - w)[:, None] * U[idx] + w[:, None] * U[idx + 1]


def holder_fit(times, snapshots, lags=None, n_lags=12, max_base=200):
    """Fit the time-Hölder exponent of ``sup_x |w(x, t + lag) - w(x, t)|``.

    ``snapshots`` is a sequence of :class:`FilmPair` (or stacked arrays) at
    ``times``; ``w`` ranges over both layers.  For each lag the modulus is
    the maximum over up to ``max_base`` base times sampled uniformly from
    the admissible window, made nondecreasing in the lag, and the exponent
    is the least-squares slope of ``log(modulus)`` against ``log(lag)``.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 8 or len(snapshots) != times.size:
        raise InvalidInputError(f"holder_fit needs >= 8 snapshots with matching times; "
                                f"got {len(snapshots)} snapshots, {times.size} times")
    if np.any(np.diff(times) <= 0):
        raise InvalidInputError("snapshot times must be strictly increasing")
    U = np.array([np.concatenate((s.u, s.v)) if isinstance(s, FilmPair) else np.ravel(s)
                  for s in snapshots])
    span = times[-1] - times[0]
    if lags is None:
        lo = np.min(np.diff(times))
        hi = 0.5 * span
        lags = np.geomspace(lo, hi, n_lags)
    lags = np.asarray(lags, dtype=float)
    if lags.min() <= 0 or lags.max() / lags.min() < 100.0 or lags.max() > span:
        raise InvalidInputError("lags must be positive, within the time span, and cover >= 2 decades")
    moduli = np.empty(lags.size)
    for k, lag in enumerate(lags):
        base = times[times + lag <= times[-1]]
        if base.size > max_base:
            base = base[np.linspace(0, base.size - 1, max_base).round().astype(int)]
        a = _interp_states(times, U, base)
        b = _interp_states(times, U, base + lag)
        moduli[k] = np.max(np.abs(b - a))
    moduli = np.maximum.accumulate(moduli)
    positive = moduli > 0
    if positive.sum() < 2:
        exponent = np.nan
    else:
        exponent = float(np.polyfit(np.log(lags[positive]), np.log(moduli[positive]), 1)[0])
    return HolderReport(lags, moduli, exponent)
