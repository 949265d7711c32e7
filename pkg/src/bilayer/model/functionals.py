"""Pressures and the energy functional on nodal states.

``grid`` is anything exposing ``laplacian``, ``gradient``, ``integrate`` and
``integrate_faces`` (see :class:`bilayer.discretization.Grid`).
"""

import numpy as np

from ..exceptions import ShapeError
from .potential import potential_energy, potential_force
from .state import PressurePair


def pressures(state, params, pot, lap):
    """Nodal pressures ``p1 = (sigma+1) u'' + v'' - Pi_1(u)``, ``p2 = u'' + v'' - Pi_2(v)``.

    ``lap`` is either a callable second-derivative operator or a grid.
    """
    lap = getattr(lap, "laplacian", lap)
    lu = np.asarray(lap(state.u))
    lv = np.asarray(lap(state.v))
    if lu.shape != state.u.shape:
        raise ShapeError("laplacian output does not match the state")
    p1 = (params.sigma + 1.0) * lu + lv - potential_force(pot, 1, state.u)
    p2 = lu + lv - potential_force(pot, 2, state.v)
    return PressurePair(p1, p2)


def energy(state, params, pot, grid):
    """Discrete energy ``int sigma u_x^2 + (u_x + v_x)^2 + 2 U_1(u) + 2 U_2(v)``.

    Gradient terms use face differences with midpoint quadrature, potential
    terms trapezoidal nodal quadrature; with these choices the pressures
    are exactly ``-1/2`` times the weighted gradient of this function.
    """
    state.check_grid(grid)
    gu = grid.gradient(state.u)
    gv = grid.gradient(state.v)
    e = grid.integrate_faces(params.sigma * gu**2 + (gu + gv) ** 2)
    e += 2.0 * grid.integrate(potential_energy(pot, 1, state.u) + potential_energy(pot, 2, state.v))
    return e
