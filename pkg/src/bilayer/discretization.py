"""Node-centred finite differences on the uniform grid of [0, 1].

Nodes ``x_i = i * dx`` (``i = 0..N``) carry the film heights; the ``N`` faces
``x_{i+1/2}`` carry gradients, mobilities and fluxes.  The boundary faces
are not stored: the flux through them is zero.  With trapezoidal node
weights the operators satisfy summation by parts,

    sum_i w_i f_i (D J)_i = -sum_j dx (G f)_j J_j,

and ``laplacian_neumann == D @ G``.
"""

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .exceptions import InvalidInputError, ShapeError
from .model.mobility import mobility_eval

FACE_AVERAGES = ("arithmetic", "harmonic")


class Grid:
    """Uniform grid of ``n_cells`` cells on the unit interval."""

    def __init__(self, n_cells):
        if int(n_cells) != n_cells or n_cells < 2:
            raise InvalidInputError(f"n_cells must be an integer >= 2; got {n_cells!r}")
        self.n_cells = int(n_cells)
        self.dx = 1.0 / self.n_cells

    def __repr__(self):
        return f"Grid(n_cells={self.n_cells})"

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n_cells == self.n_cells

    def __hash__(self):
        return hash(("Grid", self.n_cells))

    @property
    def n_nodes(self):
        return self.n_cells + 1

    @cached_property
    def nodes(self):
        return np.arange(self.n_nodes) * self.dx

    @cached_property
    def faces(self):
        return (np.arange(self.n_cells) + 0.5) * self.dx

    @cached_property
    def weights(self):
        w = np.full(self.n_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    # sparse operators, used by the Newton Jacobian

    @cached_property
    def grad_matrix(self):
        n = self.n_cells
        return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr") / self.dx

    @cached_property
    def div_matrix(self):
        n = self.n_cells
        D = sp.diags([np.ones(n), -np.ones(n)], [0, -1], shape=(n + 1, n), format="csr")
        return sp.diags(1.0 / self.weights) @ D

    @cached_property
    def lap_matrix(self):
        return (self.div_matrix @ self.grad_matrix).tocsr()

    # array operators

    def check(self, field, n=None, what="field"):
        field = np.asarray(field, dtype=float)
        expected = self.n_nodes if n is None else n
        if field.shape != (expected,):
            raise ShapeError(f"{what} has shape {field.shape}, expected ({expected},)")
        return field

    def gradient(self, f):
        f = self.check(f)
        return np.diff(f) / self.dx

    def divergence(self, flux):
        flux = self.check(flux, self.n_cells, "flux")
        padded = np.concatenate(([0.0], flux, [0.0]))
        return np.diff(padded) / self.weights

    def laplacian(self, f):
        return self.divergence(self.gradient(f))

    def integrate(self, f):
        """Trapezoidal quadrature of a nodal field."""
        return float(np.dot(self.weights, self.check(f)))

    def integrate_faces(self, g):
        """Midpoint quadrature of a face field."""
        return float(self.dx * np.sum(self.check(g, self.n_cells, "face field")))

    def face_heights(self, f, average="arithmetic"):
        """Face values of a nodal field and their derivatives w.r.t. the two neighbours.

        Returns ``(h, dh_left, dh_right)``.  The harmonic mean acts on ``|f|``
        and vanishes as soon as one neighbour vanishes.
        """
        f = self.check(f)
        left, right = f[:-1], f[1:]
        if average == "arithmetic":
            half = np.full(self.n_cells, 0.5)
            return 0.5 * (left + right), half, half
        if average == "harmonic":
            a, b = np.abs(left), np.abs(right)
            s = a + b
            safe = np.where(s > 0, s, 1.0)
            h = np.where(s > 0, 2.0 * a * b / safe, 0.0)
            dl = np.where(s > 0, 2.0 * b**2 / safe**2, 0.0) * np.sign(left)
            dr = np.where(s > 0, 2.0 * a**2 / safe**2, 0.0) * np.sign(right)
            return h, dl, dr
        raise InvalidInputError(f"face average must be one of {FACE_AVERAGES}; got {average!r}")

    def face_jacobian(self, dh_left, dh_right):
        """Sparse ``(n_cells, n_nodes)`` matrix of face-value derivatives."""
        n = self.n_cells
        return sp.diags([dh_left, dh_right], [0, 1], shape=(n, n + 1), format="csr")


def laplacian_neumann(field, grid):
    """Second difference with reflected ghost nodes (``f_x = 0`` at both ends)."""
    return grid.laplacian(field)


def face_gradient(field, grid):
    """``(f_{i+1} - f_i) / dx`` on the ``n_cells`` faces."""
    return grid.gradient(field)


def divergence_zero_flux(flux, grid):
    """Nodal divergence of a face flux with zero flux through both boundaries.

    The trapezoid-weighted sum of the result vanishes for any input.
    """
    return grid.divergence(flux)


def face_mobility(state, model, params, eps, grid, average="arithmetic"):
    """Mobility matrices at the faces, evaluated on face-averaged heights."""
    state.check_grid(grid)
    hu = grid.face_heights(state.u, average)[0]
    hv = grid.face_heights(state.v, average)[0]
    return mobility_eval(model, params, hu, hv, eps)
