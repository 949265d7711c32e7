"""Simulator for the eps-regularised two-layer thin-film system."""

from .diagnostics import DiagnosticsRecord, DiagnosticsRecorder, HolderReport, holder_fit
from .discretization import Grid
from .estimator import BilayerFilmSimulator
from .exceptions import (
    BilayerError,
    ConfigError,
    DomainError,
    DtUnderflowError,
    InvalidInputError,
    NewtonDivergedError,
    NotApplicableError,
    PreconditionError,
    ShapeError,
)
from .model import (
    BornVdW,
    EntropyConfig,
    FilmPair,
    ForceFree,
    NavierSlip,
    NoSlip,
    PhysicalParams,
    WeakSlip,
    energy,
    pressures,
)
from .stepper import SolverConfig, run, step

__version__ = "0.1.0"
