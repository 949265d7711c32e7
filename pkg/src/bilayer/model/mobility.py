"""Mobility matrices of the two-layer lubrication system.

All three slip regimes are evaluated on ``(|u|, |v|)`` so the matrix is
positive semidefinite for any real input; the regularisation ``eps`` is
added to both diagonal entries afterwards.
"""

from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from ..exceptions import InvalidInputError


@dataclass(frozen=True)
class PhysicalParams:
    """Surface-tension ratio ``sigma`` and viscosity ratio ``mu``."""

    sigma: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        for name in ("sigma", "mu"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidInputError(f"{name} must be a positive real; got {value!r}")


@dataclass
class SymMatrix2:
    """Symmetric 2x2 matrix, possibly with array-valued entries."""

    m11: np.ndarray
    m12: np.ndarray
    m22: np.ndarray

    @property
    def m21(self):
        return self.m12

    def det(self):
        return self.m11 * self.m22 - self.m12 * self.m12

    def trace(self):
        return self.m11 + self.m22

    def eigenvalues(self):
        """Return ``(lambda_min, lambda_max)``.

        The smaller eigenvalue is computed as ``det / lambda_max`` to avoid
        the cancellation of the textbook formula.
        """
        half_tr = 0.5 * (self.m11 + self.m22)
        radius = np.hypot(0.5 * (self.m11 - self.m22), self.m12)
        lam_max = half_tr + radius
        with np.errstate(divide="ignore", invalid="ignore"):
            lam_min = np.where(lam_max > 0, self.det() / np.where(lam_max > 0, lam_max, 1.0),
                               half_tr - radius)
        return lam_min, lam_max

    def min_eigenvalue(self):
        return self.eigenvalues()[0]

    def as_array(self):
        """Stack into an array of shape ``(..., 2, 2)``."""
        m11, m12, m22 = np.broadcast_arrays(self.m11, self.m12, self.m22)
        return np.stack([np.stack([m11, m12], -1), np.stack([m12, m22], -1)], -2)

    def add_diagonal(self, eps):
        return SymMatrix2(self.m11 + eps, self.m12, self.m22 + eps)


@dataclass(frozen=True)
class NoSlip:
    """No-slip at both interfaces."""

    tag: ClassVar[str] = "no_slip"

    def entries(self, a, b, mu):
        m11 = a**3 / (3.0 * mu)
        m12 = a**2 * b / (2.0 * mu)
        m22 = b**3 / 3.0 + a * b**2 / mu
        return m11, m12, m22

    def partials(self, a, b, mu):
        # ((dm11/da, dm11/db), (dm12/da, dm12/db), (dm22/da, dm22/db))
        zero = np.zeros_like(a * b)
        return (
            (a**2 / mu, zero),
            (a * b / mu, a**2 / (2.0 * mu)),
            (b**2 / mu, b**2 + 2.0 * a * b / mu),
        )


@dataclass(frozen=True)
class NavierSlip:
    """Navier slip at both interfaces, time rescaled by the lower slip length.

    ``alpha = (b / b1) * (mu + 1)``.
    """

    alpha: float = 0.0
    tag: ClassVar[str] = "navier_slip"

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidInputError(f"alpha must be nonnegative; got {self.alpha!r}")

    def entries(self, a, b, mu):
        return a**2 / mu, a * b / mu, (1.0 + self.alpha) * b**2 / mu

    def partials(self, a, b, mu):
        zero = np.zeros_like(a * b)
        return (
            (2.0 * a / mu, zero),
            (b / mu, a / mu),
            (zero, 2.0 * (1.0 + self.alpha) * b / mu),
        )


@dataclass(frozen=True)
class WeakSlip:
    """Weak slip at both interfaces; ``b1`` solid-liquid, ``b`` liquid-liquid slip length.

    The ``1/mu`` prefactor multiplies every entry, including the ``mu v^3 / 3`` term.
    """

    b1: float = 1.0
    b: float = 0.0
    tag: ClassVar[str] = "weak_slip"

    def __post_init__(self):
        if not np.isfinite(self.b1) or self.b1 <= 0:
            raise InvalidInputError(f"b1 must be positive; got {self.b1!r}")
        if not np.isfinite(self.b) or self.b < 0:
            raise InvalidInputError(f"b must be nonnegative; got {self.b!r}")

    def navier_alpha(self, mu):
        """Parameter of the Navier-slip matrix this model tends to for large slip."""
        return self.b / self.b1 * (mu + 1.0)

    def entries(self, a, b, mu):
        b1, s = self.b1, self.b
        m11 = (a**3 / 3.0 + b1 * a**2) / mu
        m12 = (a**2 * b / 2.0 + b1 * a * b) / mu
        m22 = b**3 / 3.0 + (a * b**2 + (b1 + s * (mu + 1.0)) * b**2) / mu
        return m11, m12, m22

    def partials(self, a, b, mu):
        b1, s = self.b1, self.b
        zero = np.zeros_like(a * b)
        return (
            ((a**2 + 2.0 * b1 * a) / mu, zero),
            ((a * b + b1 * b) / mu, (a**2 / 2.0 + b1 * a) / mu),
            (b**2 / mu, b**2 + (2.0 * a * b + 2.0 * (b1 + s * (mu + 1.0)) * b) / mu),
        )


MobilityModel = Union[NoSlip, NavierSlip, WeakSlip]

MOBILITY_MODELS = {cls.tag: cls for cls in (NoSlip, NavierSlip, WeakSlip)}


def _as_finite(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def mobility_eval(model, params, u, v, eps=0.0):
    """Evaluate ``M(|u|, |v|) + eps * I``.

    ``u`` and ``v`` may be scalars or arrays of a common shape; the entries
    of the returned :class:`SymMatrix2` broadcast accordingly.
    """
    u = _as_finite(u, "u")
    v = _as_finite(v, "v")
    eps = float(eps)
    if not np.isfinite(eps) or eps < 0:
        raise InvalidInputError(f"eps must be a nonnegative real; got {eps!r}")
    m11, m12, m22 = model.entries(np.abs(u), np.abs(v), params.mu)
    return SymMatrix2(m11 + eps, m12, m22 + eps)


def mobility_partials(model, params, u, v):
    """Derivatives of the (unregularised) entries w.r.t. signed ``u`` and ``v``.

    Returns ``(dM/du, dM/dv)`` as two :class:`SymMatrix2`.  At ``u == 0`` the
    derivative of ``|u|`` is taken as 0.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    su, sv = np.sign(u), np.sign(v)
    (d11a, d11b), (d12a, d12b), (d22a, d22b) = model.partials(np.abs(u), np.abs(v), params.mu)
    du = SymMatrix2(d11a * su, d12a * su, d22a * su)
    dv = SymMatrix2(d11b * sv, d12b * sv, d22b * sv)
    return du, dv
