from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bilayer.discretization import Grid
from bilayer.exceptions import ConfigError, ShapeError
from bilayer.model import BornVdW, FilmPair, ForceFree, NavierSlip, NoSlip, PhysicalParams, WeakSlip, energy
from bilayer.stepper import (
    DiscreteSystem,
    SolverConfig,
    Stepper,
    jacobian,
    newton_solve,
    residual,
    run,
    semi_implicit_solve,
    step,
)
from bilayer.diagnostics import DiagnosticsRecorder


def dense_residual(new, old, dt, model, params, pot, n, eps):
    """Loop-by-loop reference for the fully implicit residual."""
    dx = 1.0 / n

    def lap(f):
        out = np.empty(n + 1)
        for i in range(n + 1):
            if i == 0:
                out[i] = 2 * (f[1] - f[0]) / dx**2
            elif i == n:
                out[i] = 2 * (f[n - 1] - f[n]) / dx**2
            else:
                out[i] = (f[i + 1] - 2 * f[i] + f[i - 1]) / dx**2
        return out

    def secant(kind, a, b):
        if isinstance(pot, ForceFree):
            return np.zeros(n + 1)
        g = pot.gamma(kind)
        U = lambda s: g * s ** (1 - pot.m) / (pot.m - 1) - s ** (1 - pot.n) / (pot.n - 1)
        Pi = lambda s: s ** -pot.n - g * s ** -pot.m
        return np.array([Pi(y) if x == y else (U(y) - U(x)) / (y - x) for x, y in zip(a, b)])

    lu, lv = lap(new.u), lap(new.v)
    p1 = (params.sigma + 1) * lu + lv - secant(1, old.u, new.u)
    p2 = lu + lv - secant(2, old.v, new.v)
    J1, J2 = np.empty(n), np.empty(n)
    for j in range(n):
        a = abs(0.5 * (new.u[j] + new.u[j + 1]))
        b = abs(0.5 * (new.v[j] + new.v[j + 1]))
        m11, m12, m22 = model.entries(a, b, params.mu)
        g1 = (p1[j + 1] - p1[j]) / dx
        g2 = (p2[j + 1] - p2[j]) / dx
        J1[j] = (m11 + eps) * g1 + m12 * g2
        J2[j] = m12 * g1 + (m22 + eps) * g2

    def div(J):
        out = np.empty(n + 1)
        out[0] = J[0] / (dx / 2)
        out[n] = -J[n - 1] / (dx / 2)
        for i in range(1, n):
            out[i] = (J[i] - J[i - 1]) / dx
        return out

    return (new.u - old.u) / dt + div(J1), (new.v - old.v) / dt + div(J2)


def random_state(rng, n, lo=0.4, hi=1.2):
    return FilmPair(rng.uniform(lo, hi, n + 1), rng.uniform(lo, hi, n + 1))


MODELS = [NoSlip(), NavierSlip(0.7), WeakSlip(b1=0.3, b=0.2)]
POTS = [ForceFree(), BornVdW(gamma1=0.1, gamma2=0.05)]


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.tag)
@pytest.mark.parametrize("pot", POTS, ids=lambda p: p.tag)
@pytest.mark.parametrize("n", [4, 17, 32])
def test_residual_matches_dense_reference(model, pot, n, rng):
    params = PhysicalParams(sigma=0.8, mu=1.3)
    cfg = SolverConfig(epsilon=1e-3)
    old, new = random_state(rng, n), random_state(rng, n)
    Ru, Rv = residual(new, old, 0.01, cfg, model, params, pot, Grid(n))
    ru, rv = dense_residual(new, old, 0.01, model, params, pot, n, 1e-3)
    scale = max(np.abs(ru).max(), np.abs(rv).max())
    np.testing.assert_allclose(Ru, ru, atol=1e-11 * scale)
    np.testing.assert_allclose(Rv, rv, atol=1e-11 * scale)


def test_residual_checks_shapes():
    st = FilmPair(np.ones(9), np.ones(9))
    with pytest.raises(ShapeError):
        residual(st, st, 0.1, SolverConfig(), NoSlip(), PhysicalParams(), ForceFree(), Grid(10))


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.tag)
@pytest.mark.parametrize("pot", POTS, ids=lambda p: p.tag)
def test_jacobian_matches_finite_differences(model, pot, rng):
    n, dt = 16, 1e-3
    params = PhysicalParams(sigma=1.2, mu=0.9)
    cfg = SolverConfig(epsilon=1e-4)
    grid = Grid(n)
    old, new = random_state(rng, n), random_state(rng, n)
    J = jacobian(new, old, dt, cfg, model, params, pot, grid).toarray()
    x = np.concatenate((new.u, new.v))
    fd = np.empty_like(J)
    h = 1e-6
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        rp = np.concatenate(residual(FilmPair(xp[:n + 1], xp[n + 1:]), old, dt, cfg, model, params, pot, grid))
        rm = np.concatenate(residual(FilmPair(xm[:n + 1], xm[n + 1:]), old, dt, cfg, model, params, pot, grid))
        fd[:, k] = (rp - rm) / (2 * h)
    assert np.max(np.abs(J - fd)) <= 1e-6 * np.max(np.abs(fd))


def test_jacobian_spectrum_at_constant_state():
    # at a constant state without forces J = I/dt + (M K) kron L^2 with K = [[sigma+1, 1], [1, 1]]
    n, dt, eps = 12, 1e-2, 1e-3
    params = PhysicalParams(sigma=0.5, mu=1.5)
    model = NavierSlip(0.4)
    st = FilmPair(np.full(n + 1, 0.8), np.full(n + 1, 0.6))
    J = jacobian(st, st, dt, SolverConfig(epsilon=eps), model, params, ForceFree(), Grid(n)).toarray()
    m11, m12, m22 = model.entries(0.8, 0.6, params.mu)
    MK = np.array([[m11 + eps, m12], [m12, m22 + eps]]) @ np.array([[params.sigma + 1, 1.0], [1.0, 1.0]])
    mu = np.linalg.eigvals(MK).real
    lam = (2 * n * np.sin(np.arange(n + 1) * np.pi / (2 * n))) ** 2
    expected = np.sort(np.concatenate([1 / dt + m * lam**2 for m in mu]))
    got = np.sort(np.linalg.eigvals(J).real)
    np.testing.assert_allclose(got, expected, rtol=1e-8)


def test_jacobian_is_identity_over_dt_without_mobility():
    n, dt = 10, 0.05
    zero = FilmPair(np.zeros(n + 1), np.zeros(n + 1))
    J = jacobian(zero, zero, dt, SolverConfig(epsilon=0.0), NoSlip(), PhysicalParams(), ForceFree(), Grid(n))
    np.testing.assert_array_equal(J.toarray(), np.eye(2 * (n + 1)) / dt)


def test_banded_solve_matches_dense(rng):
    n, dt = 20, 1e-3
    system = DiscreteSystem(WeakSlip(b1=0.5, b=0.1), PhysicalParams(sigma=2.0), BornVdW(), Grid(n), 1e-5)
    old, new = random_state(rng, n), random_state(rng, n)
    rhs = rng.normal(size=2 * (n + 1))
    B = system.jacobian_bands(new, old, dt)
    dense = system.jacobian(new, old, dt).toarray()
    np.testing.assert_allclose(system.solve_bands(B, rhs), np.linalg.solve(dense, rhs), rtol=1e-8, atol=1e-12)


def smooth_state(n, amp=0.1, base=1.0):
    x = Grid(n).nodes
    c = np.cos(np.pi * x)
    return FilmPair(base + amp * c, base - amp * c)


def test_constant_state_step_needs_one_newton_iteration():
    cfg = SolverConfig(dt_init=1e-2)
    st = FilmPair(np.full(33, 1.0), np.full(33, 0.5))
    res = step(st, cfg, NoSlip(), PhysicalParams(), ForceFree(), Grid(32))
    assert res.accepted and res.newton_iters == 1
    np.testing.assert_array_equal(res.state.u, st.u)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.tag)
@pytest.mark.parametrize("pot", POTS, ids=lambda p: p.tag)
def test_step_conserves_mass_and_decreases_energy(model, pot):
    grid = Grid(48)
    params = PhysicalParams(sigma=1.0, mu=1.0)
    st = smooth_state(48)
    res = step(st, SolverConfig(dt_init=1e-3), model, params, pot, grid)
    assert res.accepted
    for a, b in ((st.u, res.state.u), (st.v, res.state.v)):
        assert abs(grid.integrate(a) - grid.integrate(b)) <= 1e-13 * grid.integrate(a)
    assert energy(res.state, params, pot, grid) < energy(st, params, pot, grid)
    # the update-size test may stop Newton slightly above newton_tol
    assert res.residual_norm <= 1e-8


def one_step_gaps(model, pot, dts):
    system = DiscreteSystem(model, PhysicalParams(), pot, Grid(16), 1e-6)
    st = smooth_state(16, amp=0.2, base=0.8)
    gaps = [newton_solve(system, st, dt, 1e-15, 30)[0].max_abs_diff(semi_implicit_solve(system, st, dt)[0])
            for dt in dts]
    return np.array(gaps[:-1]) / np.array(gaps[1:])


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.tag)
def test_semi_and_fully_implicit_differ_at_second_order(model):
    ratios = one_step_gaps(model, ForceFree(), (1e-6, 5e-7, 2.5e-7))
    np.testing.assert_allclose(ratios, 4.0, rtol=0.05)


def test_semi_and_fully_implicit_differ_at_second_order_with_forces():
    # the force term is stiff, so the asymptotic ratio is approached slowly
    ratios = one_step_gaps(NavierSlip(0.5), BornVdW(), (2.5e-7, 1.25e-7, 6.25e-8))
    np.testing.assert_allclose(ratios, 4.0, rtol=0.2)


def test_semi_implicit_scheme_runs():
    grid = Grid(32)
    cfg = SolverConfig(dt_init=1e-3, scheme="semi_implicit")
    summary = run(smooth_state(32), 0.01, cfg, NoSlip(), PhysicalParams(), ForceFree(), grid)
    assert summary.complete and summary.t == 0.01


def test_run_of_one_step():
    cfg = SolverConfig(dt_init=1e-3)
    summary = run(smooth_state(16), 1e-3, cfg, NoSlip(), PhysicalParams(), ForceFree(), Grid(16))
    assert summary.n_steps == 1 and summary.t == 1e-3 and summary.complete


def test_fixed_step_run_lands_on_end_time_without_sliver():
    cfg = SolverConfig().with_fixed_dt(0.1)
    summary = run(smooth_state(16), 0.3, cfg, NoSlip(), PhysicalParams(), ForceFree(), Grid(16))
    assert summary.n_steps == 3 and summary.t == 0.3


def test_steady_state_is_preserved():
    st = FilmPair(np.full(17, 1.0), np.full(17, 0.5))
    summary = run(st, 0.05, SolverConfig(), NoSlip(), PhysicalParams(), ForceFree(), Grid(16))
    assert summary.complete
    np.testing.assert_array_equal(summary.final.u, st.u)
    np.testing.assert_array_equal(summary.final.v, st.v)


def test_step_size_underflow_gives_partial_summary():
    cfg = SolverConfig(dt_init=0.05, dt_min=0.02, dt_max=0.05, newton_max_iter=1, newton_tol=1e-14)
    summary = run(smooth_state(32, amp=0.5), 0.5, cfg, NoSlip(), PhysicalParams(), ForceFree(), Grid(32))
    assert not summary.complete
    assert summary.t < 0.5 and summary.n_rejected >= 1
    assert "dt_min" in summary.error


def test_run_rejects_nonpositive_end_time():
    with pytest.raises(ConfigError):
        run(smooth_state(8), 0.0, SolverConfig(), NoSlip(), PhysicalParams(), ForceFree(), Grid(8))


def test_solver_config_validation_collects_errors():
    with pytest.raises(ConfigError) as info:
        SolverConfig(epsilon=-1.0, newton_max_iter=0, scheme="rk4")
    assert len(info.value.errors) == 3


@settings(max_examples=15)
@given(amp=st.floats(0.05, 0.25), dt=st.floats(1e-4, 5e-2), gamma=st.sampled_from([1e-3, 0.1, 0.3]),
       which=st.integers(0, len(MODELS) - 1))
def test_discrete_energy_law_holds_for_any_step(amp, dt, gamma, which):
    grid = Grid(24)
    params = PhysicalParams(sigma=1.0, mu=1.0)
    pot = BornVdW(gamma1=gamma, gamma2=gamma)
    model = MODELS[which]
    system = DiscreteSystem(model, params, pot, grid, 1e-6)
    st = smooth_state(24, amp=amp, base=0.5)
    try:
        new = newton_solve(system, st, dt, 1e-11, 40)[0]
    except Exception:
        return
    rec = DiagnosticsRecorder(model, params, pot, grid, 1e-6)
    rec.start(st)

    class Result:
        dt_used, newton_iters = dt, 1

    r = rec(dt, new, Result)
    assert r.energy_balance_residual <= 1e-8 * (1.0 + abs(rec.initial.energy))
