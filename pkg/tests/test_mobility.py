import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilayer.exceptions import InvalidInputError
from bilayer.model import NavierSlip, NoSlip, PhysicalParams, WeakSlip, mobility_eval, mobility_partials

MODELS = [NoSlip(), NavierSlip(0.0), NavierSlip(0.5), NavierSlip(3.0),
          WeakSlip(b1=0.1, b=0.0), WeakSlip(b1=1.0, b=0.5), WeakSlip(b1=0.05, b=2.0)]


def test_no_slip_example():
    M = mobility_eval(NoSlip(), PhysicalParams(mu=1.0), 1.0, 1.0)
    assert M.m11 == pytest.approx(1 / 3, rel=1e-15)
    assert M.m12 == pytest.approx(1 / 2, rel=1e-15)
    assert M.m22 == pytest.approx(4 / 3, rel=1e-15)


def test_navier_slip_example():
    M = mobility_eval(NavierSlip(alpha=0.5), PhysicalParams(mu=2.0), 2.0, 1.0)
    assert (float(M.m11), float(M.m12), float(M.m22)) == pytest.approx((2.0, 1.0, 0.75), rel=1e-15)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: repr(m))
def test_fully_degenerate_state_leaves_only_regularisation(model):
    M = mobility_eval(model, PhysicalParams(mu=1.7), 0.0, 0.0, eps=1e-6)
    assert float(M.m11) == 1e-6 and float(M.m22) == 1e-6 and float(M.m12) == 0.0


def test_weak_slip_navier_limit_parameter():
    model = WeakSlip(b1=0.2, b=0.3)
    assert model.navier_alpha(1.5) == pytest.approx(0.3 / 0.2 * 2.5)


def test_weak_slip_reduces_to_navier_for_large_slip():
    # dividing by b1 and letting b1 grow at fixed b/b1 recovers the Navier matrix
    mu, u, v, ratio = 1.3, 0.7, 0.4, 0.8
    target = mobility_eval(NavierSlip(ratio * (mu + 1.0)), PhysicalParams(mu=mu), u, v)
    b1 = 1e8
    M = mobility_eval(WeakSlip(b1=b1, b=ratio * b1), PhysicalParams(mu=mu), u, v)
    for a, b in ((M.m11, target.m11), (M.m12, target.m12), (M.m22, target.m22)):
        assert float(a) / b1 == pytest.approx(float(b), rel=1e-6)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_input_rejected(bad):
    with pytest.raises(InvalidInputError):
        mobility_eval(NoSlip(), PhysicalParams(), bad, 1.0)


def test_negative_eps_rejected():
    with pytest.raises(InvalidInputError):
        mobility_eval(NoSlip(), PhysicalParams(), 1.0, 1.0, eps=-1e-3)


def test_invalid_parameters_rejected():
    with pytest.raises(InvalidInputError):
        PhysicalParams(sigma=0.0)
    with pytest.raises(InvalidInputError):
        NavierSlip(alpha=-1.0)
    with pytest.raises(InvalidInputError):
        WeakSlip(b1=0.0)


def test_array_inputs_broadcast():
    u = np.linspace(-1, 1, 7)
    M = mobility_eval(NoSlip(), PhysicalParams(), u, 0.5)
    assert M.m11.shape == (7,) and M.m22.shape == (7,)
    np.testing.assert_allclose(M.m11, np.abs(u) ** 3 / 3)


heights = st.floats(-50.0, 50.0, allow_nan=False)


@given(u=heights, v=heights, mu=st.floats(1e-3, 1e3), which=st.integers(0, len(MODELS) - 1),
       eps=st.sampled_from([0.0, 1e-8, 1e-2]))
def test_mobility_is_symmetric_positive_semidefinite(u, v, mu, which, eps):
    M = mobility_eval(MODELS[which], PhysicalParams(mu=mu), u, v, eps)
    lam = np.linalg.eigvalsh(M.as_array())
    scale = max(1.0, float(np.max(np.abs(lam))))
    assert lam[0] >= -1e-12 * scale
    assert M.m21 is M.m12


@given(u=heights, v=heights, which=st.integers(0, len(MODELS) - 1))
def test_mobility_depends_on_absolute_values(u, v, which):
    p = PhysicalParams(mu=0.8)
    a = mobility_eval(MODELS[which], p, u, v).as_array()
    b = mobility_eval(MODELS[which], p, -u, -v).as_array()
    np.testing.assert_array_equal(a, b)


@given(u=st.floats(0.05, 5.0), v=st.floats(0.05, 5.0), which=st.integers(0, len(MODELS) - 1))
def test_partials_match_central_differences(u, v, which):
    p = PhysicalParams(mu=1.4)
    model = MODELS[which]
    du, dv = mobility_partials(model, p, u, v)
    h = 1e-6
    for analytic, shift in ((du, (h, 0.0)), (dv, (0.0, h))):
        up = mobility_eval(model, p, u + shift[0], v + shift[1]).as_array()
        dn = mobility_eval(model, p, u - shift[0], v - shift[1]).as_array()
        np.testing.assert_allclose(analytic.as_array(), (up - dn) / (2 * h), rtol=1e-6, atol=1e-8)


def test_eigenvalues_agree_with_lapack(rng):
    M = mobility_eval(WeakSlip(b1=0.3, b=1.1), PhysicalParams(mu=0.6),
                      rng.uniform(-2, 2, 500), rng.uniform(-2, 2, 500))
    lo, hi = M.eigenvalues()
    ref = np.linalg.eigvalsh(M.as_array())
    np.testing.assert_allclose(lo, ref[:, 0], rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(hi, ref[:, 1], rtol=1e-12)
