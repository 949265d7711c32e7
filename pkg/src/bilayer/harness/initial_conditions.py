"""Initial-condition descriptors.

Every profile is nonnegative and has zero slope at both ends (exactly for
the constant and touching profiles, up to the ``O(dx)`` one-sided
difference for cosines).
"""

from dataclasses import asdict, dataclass, fields
from typing import ClassVar, Tuple

import numpy as np

from ..exceptions import ConfigError
from ..model import FilmPair


@dataclass(frozen=True)
class Constant:
    cu: float = 1.0
    cv: float = 1.0
    tag: ClassVar[str] = "constant"

    def __post_init__(self):
        errors = [f"scenario.ic.{k}: must be >= 0; got {getattr(self, k)!r}"
                  for k in ("cu", "cv") if not getattr(self, k) >= 0]
        if errors:
            raise ConfigError(errors)

    def evaluate(self, grid):
        ones = np.ones(grid.n_nodes)
        return FilmPair(self.cu * ones, self.cv * ones)

    def to_dict(self):
        return {"type": self.tag, **asdict(self)}


@dataclass(frozen=True)
class CosinePerturbed:
    """``base + amp * cos(k pi x)`` for each layer."""

    base_u: float = 1.0
    base_v: float = 1.0
    amp_u: float = 0.1
    amp_v: float = 0.1
    mode_k: int = 1
    tag: ClassVar[str] = "cosine"

    def __post_init__(self):
        errors = []
        if int(self.mode_k) != self.mode_k or self.mode_k < 0:
            errors.append(f"scenario.ic.mode_k: must be a nonnegative integer; got {self.mode_k!r}")
        for layer in ("u", "v"):
            base, amp = getattr(self, "base_" + layer), getattr(self, "amp_" + layer)
            if not (np.isfinite(base) and np.isfinite(amp)):
                errors.append(f"scenario.ic.base_{layer}: must be finite")
            elif abs(amp) > base:
                errors.append(f"scenario.ic.amp_{layer}: |amp| {abs(amp):g} exceeds base {base:g} "
                              f"(profile would be negative)")
        if errors:
            raise ConfigError(errors)

    def evaluate(self, grid):
        c = np.cos(self.mode_k * np.pi * grid.nodes)
        return FilmPair(self.base_u + self.amp_u * c, self.base_v + self.amp_v * c)

    def to_dict(self):
        return {"type": self.tag, **asdict(self)}


def _quadratic_bump(xi):
    """C^1 bump on ``|xi| <= 1``: ``1 - 2 xi^2`` inside ``1/2``, ``2 (1 - |xi|)^2`` outside."""
    a = np.abs(xi)
    return np.where(a <= 0.5, 1.0 - 2.0 * a**2, np.where(a <= 1.0, 2.0 * (1.0 - a) ** 2, 0.0))


@dataclass(frozen=True)
class TouchingZero:
    """Piecewise-quadratic bumps that vanish (with zero slope) outside their support.

    Each layer is ``height * q((x - center) / halfwidth)`` with the C^1 bump
    ``q``; supports must stay inside ``[0, 1]`` so the profiles are zero on
    a neighbourhood of both ends.
    """

    centers: Tuple[float, float] = (0.5, 0.5)
    halfwidths: Tuple[float, float] = (0.3, 0.3)
    heights: Tuple[float, float] = (1.0, 0.5)
    tag: ClassVar[str] = "touching_zero"

    def __post_init__(self):
        errors = []
        for k, layer in enumerate("uv"):
            c, w, h = self.centers[k], self.halfwidths[k], self.heights[k]
            if not w > 0:
                errors.append(f"scenario.ic.halfwidths[{k}]: must be positive; got {w!r}")
            elif not (c - w >= 0 and c + w <= 1):
                errors.append(f"scenario.ic.centers[{k}]: support [{c - w:g}, {c + w:g}] of {layer} "
                              f"leaves [0, 1]")
            if not h >= 0:
                errors.append(f"scenario.ic.heights[{k}]: must be >= 0; got {h!r}")
        if errors:
            raise ConfigError(errors)

    def evaluate(self, grid):
        x = grid.nodes
        u, v = (h * _quadratic_bump((x - c) / w)
                for c, w, h in zip(self.centers, self.halfwidths, self.heights))
        return FilmPair(u, v)

    def to_dict(self):
        return {"type": self.tag, "centers": list(self.centers),
                "halfwidths": list(self.halfwidths), "heights": list(self.heights)}


IC_TYPES = {cls.tag: cls for cls in (Constant, CosinePerturbed, TouchingZero)}


def ic_from_dict(doc):
    """Build a descriptor from ``{"type": ..., **fields}``."""
    doc = dict(doc)
    tag = doc.pop("type", CosinePerturbed.tag)
    if tag not in IC_TYPES:
        raise ConfigError(f"scenario.ic.type: must be one of {sorted(IC_TYPES)}; got {tag!r}")
    cls = IC_TYPES[tag]
    unknown = sorted(set(doc) - {f.name for f in fields(cls)})
    if unknown:
        raise ConfigError([f"scenario.ic.{k}: unknown key for {tag}" for k in unknown])
    for key in ("centers", "halfwidths", "heights"):
        if key in doc:
            if not isinstance(doc[key], (list, tuple)) or len(doc[key]) != 2:
                raise ConfigError(f"scenario.ic.{key}: must be a pair [u, v]")
            doc[key] = tuple(doc[key])
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"scenario.ic: non-numeric field ({exc})") from exc
