"""scikit-learn style facade over a single simulation."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .diagnostics import DiagnosticsRecorder
from .exceptions import ConfigError, ShapeError
from .io import parse_config
from .model import FilmPair
from .stepper import run


class BilayerFilmSimulator(TransformerMixin, BaseEstimator):
    """Evolve two-layer film profiles for ``t_end`` time units.

    ``X`` is an ``(n_nodes, 2)`` array of nodal heights (columns ``u``,
    ``v``) on the uniform grid of ``[0, 1]`` with ``n_nodes - 1`` cells.
    ``fit`` runs the simulation from ``X`` and stores ``state_``,
    ``records_`` and ``summary_``; ``transform`` evolves new profiles with
    the same settings and returns the final heights in the same layout.

    The hyperparameters mirror the sections of the configuration file.
    """

    def __init__(self, model="no_slip", alpha=0.0, b=0.0, b1=0.0, sigma=1.0, mu=1.0,
                 potential="none", n=3.0, m=12.0, gamma1=0.1, gamma2=0.1, floor=1e-4,
                 t_end=0.1, epsilon=1e-6, dt_init=1e-4, dt_min=1e-12, dt_max=1e-1,
                 newton_tol=1e-10, newton_max_iter=25, scheme="fully_implicit",
                 energy_guard=True, face_average="arithmetic"):
        self.model = model
        self.alpha = alpha
        self.b = b
        self.b1 = b1
        self.sigma = sigma
        self.mu = mu
        self.potential = potential
        self.n = n
        self.m = m
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.floor = floor
        self.t_end = t_end
        self.epsilon = epsilon
        self.dt_init = dt_init
        self.dt_min = dt_min
        self.dt_max = dt_max
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        self.scheme = scheme
        self.energy_guard = energy_guard
        self.face_average = face_average

    def to_document(self, n_cells=128):
        """Configuration document equivalent to the current hyperparameters."""
        model = {"type": self.model}
        if self.model == "navier_slip":
            model["alpha"] = self.alpha
        elif self.model == "weak_slip":
            model.update(b=self.b, b1=self.b1)
        pot = {"type": self.potential}
        if self.potential == "born_vdw":
            pot.update(n=self.n, m=self.m, gamma1=self.gamma1, gamma2=self.gamma2, floor=self.floor)
        solver = {k: getattr(self, k) for k in ("epsilon", "dt_init", "dt_min", "dt_max",
                                                 "newton_tol", "newton_max_iter", "scheme",
                                                 "energy_guard", "face_average")}
        return {"grid": {"n_cells": n_cells}, "model": model,
                "params": {"sigma": self.sigma, "mu": self.mu}, "potential": pot,
                "solver": solver, "scenario": {"t_end": self.t_end}}

    def _validate(self, X, reset):
        X = check_array(X, dtype=np.float64, ensure_min_samples=3)
        if X.shape[1] != 2:
            raise ShapeError(f"X must have 2 columns (u, v); got {X.shape[1]}")
        if reset:
            self.n_features_in_ = 2
        return X

    def _simulate(self, X):
        cfg = parse_config(self.to_document(n_cells=X.shape[0] - 1))
        s = cfg.scenario
        state = FilmPair.from_stacked(X)
        summary = run(state, s.t_end, s.solver, s.model, s.params, s.pot, s.grid)
        return cfg, summary

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        cfg = parse_config(self.to_document(n_cells=X.shape[0] - 1))
        s = cfg.scenario
        initial = FilmPair.from_stacked(X)
        rec = DiagnosticsRecorder(s.model, s.params, s.pot, s.grid, s.solver.epsilon,
                                  average=s.solver.face_average)
        rec.start(initial)
        self.summary_ = run(initial, s.t_end, s.solver, s.model, s.params, s.pot, s.grid, rec)
        self.grid_ = s.grid
        self.initial_record_ = rec.initial
        self.records_ = rec.records
        self.state_ = self.summary_.final
        return self

    def transform(self, X):
        check_is_fitted(self, "state_")
        X = self._validate(X, reset=False)
        _, summary = self._simulate(X)
        if not summary.complete:
            raise ConfigError(f"simulation aborted at t={summary.t:.4g}: {summary.error}")
        return summary.final.stacked()

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).state_.stacked()

    @property
    def nodes_(self):
        check_is_fitted(self, "grid_")
        return self.grid_.nodes

