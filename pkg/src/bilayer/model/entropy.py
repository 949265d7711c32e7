"""Bernis-Friedman type entropies ``G_{eps,n}`` with upper cap ``A``.

``G(s) = -int_s^A g(r) dr`` with ``g(r) = -int_r^A (|q|^n + eps)^(-1/2) dq``.
Exchanging the order of integration gives the single integral

    G(s) = int_s^A (q - s) (|q|^n + eps)^(-1/2) dq,

which is what is evaluated here: in closed form for ``eps = 0`` and for
``n = 2``, and through tabulated antiderivatives built with adaptive
composite Gauss-Legendre quadrature for ``n = 3, eps > 0``.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigError, InvalidInputError
from .mobility import NoSlip

_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class EntropyConfig:
    """Cap ``A``, exponents for ``u`` and ``v`` and regularisation ``eps``."""

    A: float
    n_u: int = 3
    n_v: int = 2
    eps: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.A) or self.A <= 0:
            raise ConfigError(f"entropy.A: must be positive; got {self.A!r}")
        for name in ("n_u", "n_v"):
            if getattr(self, name) not in (2, 3):
                raise ConfigError(f"entropy.{name}: must be 2 or 3; got {getattr(self, name)!r}")
        if not np.isfinite(self.eps) or self.eps < 0:
            raise ConfigError(f"entropy.eps: must be nonnegative; got {self.eps!r}")

    @classmethod
    def for_model(cls, model, A, eps=0.0):
        """Exponent pairing per slip regime: (3, 2) for no-slip, (2, 2) otherwise."""
        n_u = 3 if isinstance(model, NoSlip) else 2
        return cls(A=A, n_u=n_u, n_v=2, eps=eps)


def default_cap(state):
    """``2 * (sup |initial data| + 1)``."""
    return 2.0 * (max(np.max(np.abs(state.u)), np.max(np.abs(state.v))) + 1.0)


def _gl(f, a, b, rule):
    """Vectorised Gauss-Legendre over intervals ``[a_k, b_k]``."""
    x, w = rule
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    pts = a + half * (x + 1.0)
    return np.sum(half * w * f(pts), axis=-1)


def _h0(t):
    return 1.0 / np.sqrt(t**3 + 1.0)


def _h1(t):
    return t / np.sqrt(t**3 + 1.0)


class _CubicTable:
    """Antiderivatives ``H0(T) = int_0^T (t^3+1)^-1/2`` and ``H1(T) = int_0^T t (t^3+1)^-1/2``."""

    def __init__(self, t_max, tol=1e-15):
        top = max(2.0, 2.0 ** np.ceil(np.log2(max(t_max, 1.0))))
        edges = np.concatenate(([0.0, 0.5], 2.0 ** np.arange(0, int(np.log2(top)) + 1)))
        for _ in range(60):
            a, b = edges[:-1], edges[1:]
            bad = np.zeros(a.size, dtype=bool)
            for f in (_h0, _h1):
                hi, lo = _gl(f, a, b, _GL_HI), _gl(f, a, b, _GL_LO)
                bad |= np.abs(hi - lo) > tol * np.maximum(1.0, np.abs(hi))
            if not bad.any():
                break
            mids = 0.5 * (a[bad] + b[bad])
            edges = np.sort(np.concatenate((edges, mids)))
        self.edges = edges
        self.t_max = edges[-1]
        a, b = edges[:-1], edges[1:]
        self.cum0 = np.concatenate(([0.0], np.cumsum(_gl(_h0, a, b, _GL_HI))))
        self.cum1 = np.concatenate(([0.0], np.cumsum(_gl(_h1, a, b, _GL_HI))))

    def __call__(self, T):
        T = np.asarray(T, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, T, side="right") - 1, 0, self.edges.size - 2)
        left = self.edges[idx]
        return (self.cum0[idx] + _gl(_h0, left, T, _GL_HI),
                self.cum1[idx] + _gl(_h1, left, T, _GL_HI))


_TABLE = None


def _cubic_antiderivatives(T):
    global _TABLE
    t_need = float(np.max(T)) if np.size(T) else 1.0
    if _TABLE is None or _TABLE.t_max < t_need:
        _TABLE = _CubicTable(t_need)
    return _TABLE(T)


def _eps_cubic(s, eps, A):
    scale = eps ** (1.0 / 3.0)
    pts = np.concatenate((np.abs(s).ravel(), [abs(A)])) / scale
    h0, h1 = _cubic_antiderivatives(pts)
    f0 = eps ** (-1.0 / 6.0) * h0
    f1 = eps ** (1.0 / 6.0) * h1
    f0_s = np.sign(s).ravel() * f0[:-1]
    f1_s = f1[:-1]
    g = (f1[-1] - f1_s) - s.ravel() * (f0[-1] - f0_s)
    return g.reshape(s.shape)


def _eps_quadratic(s, eps, A):
    r = np.sqrt(eps)
    return (np.sqrt(A**2 + eps) - np.sqrt(s**2 + eps)) - s * (np.arcsinh(A / r) - np.arcsinh(s / r))


def _zero_eps(s, n, A):
    out = np.full(s.shape, np.inf)
    pos = s > 0
    sp_ = s[pos]
    if n == 2:
        out[pos] = A - sp_ - sp_ * (np.log(A) - np.log(sp_))
        out[s == 0] = A
    else:
        # 2 (sqrt A + s / sqrt A - 2 sqrt s), written without cancellation
        out[pos] = 2.0 * (np.sqrt(A) - np.sqrt(sp_)) ** 2 / np.sqrt(A)
        out[s == 0] = 2.0 * np.sqrt(A)
    return out


def entropy_value(s, n, eps, A):
    """Evaluate ``G_{eps,n}(s)``; scalar in, scalar out.

    For ``eps = 0`` negative arguments give ``+inf``.
    """
    if n not in (2, 3):
        raise InvalidInputError(f"entropy exponent must be 2 or 3; got {n!r}")
    if not A > 0:
        raise InvalidInputError(f"entropy cap A must be positive; got {A!r}")
    if eps < 0:
        raise InvalidInputError(f"eps must be nonnegative; got {eps!r}")
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if eps == 0:
        out = _zero_eps(s, n, A)
    elif n == 2:
        out = _eps_quadratic(s, eps, A)
    else:
        out = _eps_cubic(s, eps, A)
    return float(out[0]) if scalar else out


def check_cap(state, A):
    """Raise :class:`ConfigError` if any ``|u|`` or ``|v|`` exceeds ``A``."""
    for name, field in (("u", state.u), ("v", state.v)):
        i = int(np.argmax(np.abs(field)))
        if abs(field[i]) > A:
            raise ConfigError(
                f"entropy.A: cap {A:g} below |{name}| = {abs(field[i]):g} at node {i}")


def entropy_total(state, cfg, grid):
    """``int G_{eps,n_u}(u) + G_{eps,n_v}(v) dx`` with trapezoidal quadrature."""
    state.check_grid(grid)
    check_cap(state, cfg.A)
    density = (entropy_value(state.u, cfg.n_u, cfg.eps, cfg.A)
               + entropy_value(state.v, cfg.n_v, cfg.eps, cfg.A))
    if not np.all(np.isfinite(density)):
        return np.inf
    return grid.integrate(density)
