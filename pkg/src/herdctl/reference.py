"""Reference trajectories for the herd: fixed targets or drifting waves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import InvariantViolation


def _as_stacked(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0 or arr.size % 2 != 0:
        raise InvariantViolation(f"{name} must hold an even, positive number of coordinates")
    if not np.all(np.isfinite(arr)):
        raise InvariantViolation(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class StaticReference:
    """Fixed desired positions, stacked as (x_1, y_1, ..., x_m, y_m)."""

    positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", _as_stacked(self.positions, "positions"))
        object.__setattr__(self, "_zero", np.zeros_like(self.positions))

    @property
    def m(self) -> int:
        return self.positions.size // 2


@dataclass(frozen=True)
class TimeVaryingReference:
    """Desired positions drifting along +x while waving vertically.

    Evader j (1-indexed) is sent along

        x*_j(t) = x0_j + v_j t
        y*_j(t) = y0_j + 0.5 sin(w_j t + 2 pi / j) - 0.5 sin(2 pi / j)

    so each target starts at its initial position with velocity
    (v_j, 0.5 w_j cos(2 pi / j)). v is the drift speed in m/s, w the wave
    frequency in rad/s, one entry per evader.
    """

    initial_positions: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        x0 = _as_stacked(self.initial_positions, "initial_positions")
        m = x0.size // 2
        v = np.asarray(self.v, dtype=float).reshape(-1)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if v.size != m:
            raise InvariantViolation(f"v must hold one rate per evader ({m}), got {v.size}")
        if w.size != m:
            raise InvariantViolation(f"w must hold one rate per evader ({m}), got {w.size}")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise InvariantViolation("v and w must be finite")
        object.__setattr__(self, "initial_positions", x0)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "_phase", 2.0 * np.pi / np.arange(1, m + 1))

    @property
    def m(self) -> int:
        return self.initial_positions.size // 2


ReferenceSpec = Union[StaticReference, TimeVaryingReference]


class ReferenceSample(NamedTuple):
    """Desired stacked positions and their exact time derivative."""

    x_star: np.ndarray
    xdot_star: np.ndarray


def reference_at(spec: ReferenceSpec, t: float) -> ReferenceSample:
    """Evaluate the reference at time t. Returned arrays must not be mutated."""
    if isinstance(spec, StaticReference):
        return ReferenceSample(spec.positions, spec._zero)
    if not isinstance(spec, TimeVaryingReference):
        raise InvariantViolation(f"unsupported reference {type(spec).__name__}")
    arg = spec.w * t + spec._phase
    x_star = np.empty(2 * spec.m)
    x_star[0::2] = spec.initial_positions[0::2] + spec.v * t
    x_star[1::2] = spec.initial_positions[1::2] + 0.5 * (np.sin(arg) - np.sin(spec._phase))
    xdot_star = np.empty(2 * spec.m)
    xdot_star[0::2] = spec.v
    xdot_star[1::2] = 0.5 * spec.w * np.cos(arg)
    return ReferenceSample(x_star, xdot_star)
