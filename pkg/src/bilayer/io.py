"""Run configuration documents, diagnostics series and snapshot files.

All numbers are written as decimal text with 17 significant digits, which
round-trips IEEE doubles exactly.
"""

import copy
import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from .diagnostics import DiagnosticsRecord
from .discretization import FACE_AVERAGES, Grid
from .exceptions import BilayerError, ConfigError
from .harness.initial_conditions import IC_TYPES, ic_from_dict
from .harness.scenarios import Scenario
from .model import BornVdW, FilmPair, ForceFree, NavierSlip, NoSlip, PhysicalParams, WeakSlip
from .stepper import SCHEMES, SolverConfig

DEFAULTS = {
    "grid": {"n_cells": 128},
    "model": {"type": "no_slip"},
    "params": {"sigma": 1.0, "mu": 1.0},
    "potential": {"type": "none"},
    "solver": {
        "epsilon": 1e-6, "dt_init": 1e-4, "dt_min": 1e-12, "dt_max": 1e-1, "newton_tol": 1e-10,
        "newton_max_iter": 25, "scheme": "fully_implicit", "energy_guard": True,
        "face_average": "arithmetic",
    },
    "scenario": {"name": "custom", "ic": {"type": "cosine"}, "t_end": 0.1},
    "output": {"dir": "out", "snapshot_every": 0, "csv": "series.csv"},
}

MODEL_KEYS = {"no_slip": {"type"}, "navier_slip": {"type", "alpha"}, "weak_slip": {"type", "b", "b1"}}
POTENTIAL_DEFAULTS = {"n": 3.0, "m": 12.0, "gamma1": 0.1, "gamma2": 0.1, "floor": 1e-4}

SERIES_HEADER = ["t", "energy", "mass_u", "mass_v", "min_u", "min_v", "entropy", "dissipation",
                 "eps_dissipation", "balance_residual", "dt", "newton_iters"]
SNAPSHOT_COLUMNS = ["x", "u", "v", "p1", "p2"]


def fmt(x):
    """17-significant-digit decimal text (exact for doubles)."""
    return "%.17g" % x


@dataclass
class OutputConfig:
    dir: str = "out"
    snapshot_every: int = 0
    csv: str = "series.csv"


@dataclass
class RunConfig:
    scenario: Scenario
    solver: SolverConfig
    output: OutputConfig
    document: dict
    config_hash: str


def config_hash(document):
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    canon = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _merge_defaults(doc, errors):
    out = copy.deepcopy(DEFAULTS)
    if not isinstance(doc, dict):
        raise ConfigError("document: top level must be an object")
    for section, body in doc.items():
        if section not in DEFAULTS:
            errors.append(f"{section}: unknown section")
            continue
        if not isinstance(body, dict):
            errors.append(f"{section}: must be an object")
            continue
        if section == "model" and body.get("type", "no_slip") != out["model"]["type"]:
            out["model"] = {}
        if section == "potential" and body.get("type", "none") == "born_vdw":
            out["potential"] = {"type": "born_vdw", **POTENTIAL_DEFAULTS}
        out[section].update(copy.deepcopy(body))
    return out


def _number(errors, path, value, positive=False, nonnegative=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        errors.append(f"{path}: must be a finite number; got {value!r}")
        return False
    if integer and int(value) != value:
        errors.append(f"{path}: must be an integer; got {value!r}")
        return False
    if positive and not value > 0:
        errors.append(f"{path}: must be > 0; got {value!r}")
        return False
    if nonnegative and not value >= 0:
        errors.append(f"{path}: must be >= 0; got {value!r}")
        return False
    return True


def _check_keys(errors, section, body, allowed):
    for key in sorted(set(body) - set(allowed)):
        errors.append(f"{section}.{key}: unknown key")


def _build_model(doc, errors):
    body = doc["model"]
    tag = body.get("type", "no_slip")
    if tag not in MODEL_KEYS:
        errors.append(f"model.type: must be one of {sorted(MODEL_KEYS)}; got {tag!r}")
        return None
    _check_keys(errors, "model", body, MODEL_KEYS[tag])
    values = {k: body.get(k, 0.0) for k in MODEL_KEYS[tag] - {"type"}}
    if not all([_number(errors, f"model.{k}", v, nonnegative=True) for k, v in sorted(values.items())]):
        return None
    return {"no_slip": NoSlip, "navier_slip": NavierSlip, "weak_slip": WeakSlip}[tag](**values)


def _build_params(doc, errors):
    body = doc["params"]
    _check_keys(errors, "params", body, {"sigma", "mu"})
    ok = [_number(errors, f"params.{k}", body[k], positive=True) for k in ("sigma", "mu")]
    return PhysicalParams(body["sigma"], body["mu"]) if all(ok) else None


def _build_potential(doc, errors):
    body = doc["potential"]
    tag = body.get("type", "none")
    if tag == "none":
        _check_keys(errors, "potential", body, {"type"})
        return ForceFree()
    if tag != "born_vdw":
        errors.append(f"potential.type: must be 'none' or 'born_vdw'; got {tag!r}")
        return None
    _check_keys(errors, "potential", body, {"type", *POTENTIAL_DEFAULTS})
    ok = [_number(errors, f"potential.{k}", body[k], positive=True) for k in POTENTIAL_DEFAULTS]
    if not all(ok):
        return None
    if not body["n"] < body["m"]:
        errors.append(f"potential.n must be < potential.m (repulsion decays faster than "
                      f"attraction); got n={body['n']!r}, m={body['m']!r}")
        return None
    if body["n"] <= 1:
        errors.append(f"potential.n: must be > 1 for a finite energy; got {body['n']!r}")
        return None
    return BornVdW(**{k: float(body[k]) for k in POTENTIAL_DEFAULTS})


def _build_solver(doc, errors):
    body = doc["solver"]
    _check_keys(errors, "solver", body, DEFAULTS["solver"])
    for key in ("epsilon",):
        _number(errors, f"solver.{key}", body[key], nonnegative=True)
    for key in ("dt_init", "dt_min", "dt_max", "newton_tol"):
        _number(errors, f"solver.{key}", body[key], positive=True)
    _number(errors, "solver.newton_max_iter", body["newton_max_iter"], positive=True, integer=True)
    if body["scheme"] not in SCHEMES:
        errors.append(f"solver.scheme: must be one of {list(SCHEMES)}; got {body['scheme']!r}")
    if not isinstance(body["energy_guard"], bool):
        errors.append(f"solver.energy_guard: must be true or false; got {body['energy_guard']!r}")
    if body["face_average"] not in FACE_AVERAGES:
        errors.append(f"solver.face_average: must be one of {list(FACE_AVERAGES)}; "
                      f"got {body['face_average']!r}")
    if errors:
        return None
    try:
        return SolverConfig(**{**body, "newton_max_iter": int(body["newton_max_iter"])})
    except ConfigError as exc:
        errors.extend(exc.errors)
        return None


def _build_ic(doc, errors):
    body = doc["scenario"]
    _check_keys(errors, "scenario", body, {"name", "ic", "t_end"})
    _number(errors, "scenario.t_end", body["t_end"], positive=True)
    ic = body["ic"]
    if not isinstance(ic, dict):
        errors.append("scenario.ic: must be an object")
        return None
    if ic.get("type", "cosine") not in IC_TYPES:
        errors.append(f"scenario.ic.type: must be one of {sorted(IC_TYPES)}; got {ic.get('type')!r}")
        return None
    try:
        return ic_from_dict(ic)
    except ConfigError as exc:
        errors.extend(exc.errors)
        return None


def _build_output(doc, errors):
    body = doc["output"]
    _check_keys(errors, "output", body, DEFAULTS["output"])
    _number(errors, "output.snapshot_every", body["snapshot_every"], nonnegative=True, integer=True)
    for key in ("dir", "csv"):
        if not isinstance(body[key], str) or not body[key]:
            errors.append(f"output.{key}: must be a non-empty string")
    return OutputConfig(body["dir"], int(body["snapshot_every"]), body["csv"]) if not errors else None


def parse_config(document):
    """Validate a configuration document (``dict`` or JSON text).

    Missing keys take the values of :data:`DEFAULTS`; every violation is
    collected and reported together in one :class:`ConfigError` whose
    ``errors`` are ``"section.key: message"`` strings.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"document: invalid JSON ({exc})") from exc
    errors: List[str] = []
    doc = _merge_defaults(document, errors)
    _check_keys(errors, "grid", doc["grid"], {"n_cells"})
    grid = None
    if _number(errors, "grid.n_cells", doc["grid"]["n_cells"], integer=True):
        if doc["grid"]["n_cells"] < 2:
            errors.append(f"grid.n_cells: must be >= 2; got {doc['grid']['n_cells']!r}")
        else:
            grid = Grid(int(doc["grid"]["n_cells"]))
    model = _build_model(doc, errors)
    params = _build_params(doc, errors)
    pot = _build_potential(doc, errors)
    solver_errors: List[str] = []
    solver = _build_solver(doc, solver_errors)
    errors.extend(solver_errors)
    ic = _build_ic(doc, errors)
    out_errors: List[str] = []
    output = _build_output(doc, out_errors)
    errors.extend(out_errors)
    if errors:
        raise ConfigError(errors)
    scenario = Scenario(str(doc["scenario"]["name"]), ic, model, params, pot,
                        float(doc["scenario"]["t_end"]), solver, grid)
    return RunConfig(scenario, solver, output, doc, config_hash(doc))


def load_config(path):
    """Read and validate a JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror or exc}") from exc
    return parse_config(text)


def _io_error(path, exc):
    return BilayerError(f"cannot write {path}: {exc.strerror or exc}")


def write_series(records, path, config_hash=None):
    """One CSV row per record (accepted steps); a ``# config_hash=`` line precedes the header if given."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            if config_hash is not None:
                fh.write(f"# config_hash={config_hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SERIES_HEADER)
            for r in records:
                row = list(r.as_tuple())
                w.writerow([fmt(v) for v in row[:-1]] + [str(int(row[-1]))])
    except OSError as exc:
        raise _io_error(path, exc) from exc
    return path


def read_series(path):
    """Parse a file written by :func:`write_series` back into records."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows or rows[0] != SERIES_HEADER:
        raise ConfigError(f"series: {path} lacks the expected header")
    return [DiagnosticsRecord(*[float(v) for v in row[:-1]], int(row[-1])) for row in rows[1:]]


@dataclass
class Snapshot:
    t: float
    n_cells: int
    model: str
    config_hash: str
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p1: np.ndarray
    p2: np.ndarray

    @property
    def state(self):
        return FilmPair(self.u, self.v)


def write_snapshot(path, t, state, pressure, grid, model_tag, config_hash):
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"# t={fmt(t)}\n# n_cells={grid.n_cells}\n# model={model_tag}\n"
                     f"# config_hash={config_hash}\n")
            fh.write(",".join(SNAPSHOT_COLUMNS) + "\n")
            for row in zip(grid.nodes, state.u, state.v, pressure.p1, pressure.p2):
                fh.write(",".join(fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise _io_error(path, exc) from exc
    return path


def read_snapshot(path):
    meta, rows = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            elif line.strip() and not line.startswith("x,"):
                rows.append([float(v) for v in line.split(",")])
    a = np.array(rows).reshape(-1, len(SNAPSHOT_COLUMNS))
    return Snapshot(float(meta["t"]), int(meta["n_cells"]), meta["model"], meta["config_hash"],
                    *a.T)


def output_dir(cli_value: Optional[str], config_value: str):
    """``--out`` beats ``BILAYER_OUT`` beats the config's ``output.dir``."""
    return Path(cli_value or os.environ.get("BILAYER_OUT") or config_value)
