from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidInputError, ShapeError


@dataclass
class FilmPair:
    """Nodal film heights: ``u`` lower layer, ``v`` upper-minus-lower thickness."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.array(self.u, dtype=float, copy=True).reshape(-1)
        self.v = np.array(self.v, dtype=float, copy=True).reshape(-1)
        if self.u.shape != self.v.shape:
            raise ShapeError(f"u and v lengths differ: {self.u.size} != {self.v.size}")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise InvalidInputError("film heights contain non-finite values")

    def __len__(self):
        return self.u.size

    def copy(self):
        return FilmPair(self.u, self.v)

    def stacked(self):
        """Return the state as an ``(n_nodes, 2)`` array with columns ``u, v``."""
        return np.column_stack([self.u, self.v])

    @classmethod
    def from_stacked(cls, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ShapeError(f"expected an (n_nodes, 2) array; got shape {X.shape}")
        return cls(X[:, 0], X[:, 1])

    def max_abs_diff(self, other):
        return max(np.max(np.abs(self.u - other.u)), np.max(np.abs(self.v - other.v)))

    def check_grid(self, grid):
        if len(self) != grid.n_nodes:
            raise ShapeError(f"state has {len(self)} nodes, grid has {grid.n_nodes}")


@dataclass
class PressurePair:
    p1: np.ndarray
    p2: np.ndarray
