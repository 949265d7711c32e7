"""Intermolecular potentials ``Pi_k(s) = s**-n - gamma_k * s**-m`` and their primitives."""

from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from ..exceptions import ConfigError, DomainError, InvalidInputError


@dataclass(frozen=True)
class ForceFree:
    """No intermolecular forces."""

    tag: ClassVar[str] = "none"


@dataclass(frozen=True)
class BornVdW:
    """Van der Waals attraction plus Born repulsion.

    ``floor`` is the cutoff height below which the force is frozen at its
    value at ``floor``; the energy is continued linearly there so that its
    derivative is still the (cut off) force.
    """

    n: float = 3.0
    m: float = 12.0
    gamma1: float = 0.1
    gamma2: float = 0.1
    floor: float = 1e-4
    tag: ClassVar[str] = "born_vdw"

    def __post_init__(self):
        for name in ("n", "m", "gamma1", "gamma2", "floor"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidInputError(f"{name} must be a positive real; got {value!r}")
        if not self.n < self.m:
            raise InvalidInputError(f"exponents must satisfy n < m; got n={self.n}, m={self.m}")

    def gamma(self, kind):
        if kind == 1:
            return self.gamma1
        if kind == 2:
            return self.gamma2
        raise InvalidInputError(f"kind must be 1 or 2; got {kind!r}")

    def zero(self, kind):
        """Height where the force vanishes, ``gamma_k ** (1 / (m - n))``."""
        return self.gamma(kind) ** (1.0 / (self.m - self.n))


PotentialModel = Union[ForceFree, BornVdW]


def _prepare(pot, s, strict):
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("height contains non-finite values")
    if strict and np.any(s <= 0):
        raise DomainError("potential evaluated at nonpositive height")
    return s, np.maximum(s, pot.floor)


def potential_force(pot, kind, s, strict=False):
    """Return ``Pi_kind(max(s, floor))``; zero for :class:`ForceFree`."""
    if isinstance(pot, ForceFree):
        return np.zeros_like(np.asarray(s, dtype=float))
    _, c = _prepare(pot, s, strict)
    return c ** -pot.n - pot.gamma(kind) * c ** -pot.m


def potential_force_derivative(pot, kind, s):
    """Derivative of :func:`potential_force` w.r.t. ``s`` (zero below the floor)."""
    s = np.asarray(s, dtype=float)
    if isinstance(pot, ForceFree):
        return np.zeros_like(s)
    c = np.maximum(s, pot.floor)
    d = -pot.n * c ** (-pot.n - 1.0) + pot.m * pot.gamma(kind) * c ** (-pot.m - 1.0)
    return np.where(s > pot.floor, d, 0.0)


def _primitive(pot, kind, c):
    g = pot.gamma(kind)
    return g * c ** (1.0 - pot.m) / (pot.m - 1.0) - c ** (1.0 - pot.n) / (pot.n - 1.0)


def potential_energy(pot, kind, s, strict=False):
    """Return ``U_kind(s) = -int_s^inf Pi_kind``, so that ``U' = Pi`` and ``U(inf) = 0``.

    Requires ``n > 1`` and ``m > 1`` for the tail integral to converge.
    """
    if isinstance(pot, ForceFree):
        return np.zeros_like(np.asarray(s, dtype=float))
    if pot.n <= 1 or pot.m <= 1:
        raise ConfigError(
            f"potential: energy needs n > 1 and m > 1 for convergence; got n={pot.n}, m={pot.m}")
    s, c = _prepare(pot, s, strict)
    base = _primitive(pot, kind, c)
    below = s < pot.floor
    if np.any(below):
        f = pot.floor
        slope = f ** -pot.n - pot.gamma(kind) * f ** -pot.m
        base = np.where(below, _primitive(pot, kind, f) + slope * (s - f), base)
    return base


def _force_second_derivative(pot, kind, s):
    c = np.maximum(s, pot.floor)
    n, m = pot.n, pot.m
    d2 = n * (n + 1.0) * c ** (-n - 2.0) - pot.gamma(kind) * m * (m + 1.0) * c ** (-m - 2.0)
    return np.where(s > pot.floor, d2, 0.0)


DQ_SWITCH = 1e-4


def potential_difference_quotient(pot, kind, a, b):
    """Secant slope ``(U(b) - U(a)) / (b - a)`` and its derivative w.r.t. ``b``.

    Used as the time-discrete force: it makes the potential part of the
    energy change exactly ``sum w * dq * (b - a)``.  For
    ``|b - a| <= DQ_SWITCH * |mid|`` the midpoint expansion
    ``Pi(mid) + Pi''(mid) h^2 / 24`` replaces the cancelling quotient.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if isinstance(pot, ForceFree):
        return np.zeros_like(b), np.zeros_like(b)
    h = b - a
    mid = 0.5 * (a + b)
    small = np.abs(h) <= DQ_SWITCH * np.maximum(np.abs(mid), pot.floor)
    safe = np.where(small, 1.0, h)
    dq_exact = (potential_energy(pot, kind, b) - potential_energy(pot, kind, a)) / safe
    d_exact = (potential_force(pot, kind, b) - dq_exact) / safe
    pi2 = _force_second_derivative(pot, kind, mid)
    dq_taylor = potential_force(pot, kind, mid) + pi2 * h**2 / 24.0
    d_taylor = 0.5 * potential_force_derivative(pot, kind, mid) + pi2 * h / 12.0
    return np.where(small, dq_taylor, dq_exact), np.where(small, d_taylor, d_exact)
