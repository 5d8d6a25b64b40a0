"""Continuous-time action design: expand the action with its own dynamics.

Instead of solving h(x, u) = 0 per sample, the herder positions get a
velocity law u_dot that steers the residual along the commanded rate
-K_h h. Integrated together with the evaders this keeps the coupled
(state error, residual) system contracting whenever the joint gain
condition holds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .diff import FiniteDiffSettings, damped_right_pinv, jacobians
from .dynamics import DesiredDynamics, h_star, residual_h
from .errors import DimensionMismatch, InvariantViolation, NonSymmetricInput

DEFAULT_PINV_DAMPING = 1e-3
"""Default pseudoinverse damping for the action law.

Chosen on the plateau where both evader models track reliably: far
herder-evader pairs give the exponential model nearly-zero Jacobian
columns, and an (almost) undamped pseudoinverse amplifies those weak
directions until the commanded velocity is dominated by them. Values
at or above 1e-2 distort the law for the inverse model instead."""


def _check_symmetric(K, name: str) -> np.ndarray:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise InvariantViolation(f"{name} must be finite")
    scale = max(1.0, float(np.abs(K).max()))
    if float(np.abs(K - K.T).max()) > 1e-12 * scale:
        raise NonSymmetricInput(f"{name} must be symmetric")
    return K


@dataclass(frozen=True)
class ExplicitGains:
    """Symmetric positive definite gain pair (K_f on the state error, K_h on the residual)."""

    K_f: np.ndarray
    K_h: np.ndarray

    def __post_init__(self):
        K_f = _check_symmetric(self.K_f, "K_f")
        K_h = _check_symmetric(self.K_h, "K_h")
        if K_f.shape != K_h.shape:
            raise DimensionMismatch(f"K_f {K_f.shape} and K_h {K_h.shape} must match")
        for K, name in ((K_f, "K_f"), (K_h, "K_h")):
            if float(np.linalg.eigvalsh(K)[0]) <= 0.0:
                raise InvariantViolation(f"{name} must be positive definite")
        if np.linalg.norm(K_h, 2) <= np.linalg.norm(K_f, 2):
            warnings.warn(
                "the residual gain K_h should dominate the state gain K_f for a fast inner loop",
                stacklevel=2,
            )
        object.__setattr__(self, "K_f", K_f)
        object.__setattr__(self, "K_h", K_h)


class GasCondition(NamedTuple):
    negative_definite: bool
    max_eigenvalue: float


def gas_condition(K_f, K_h) -> GasCondition:
    """Joint gain test for global asymptotic stability of (state error, residual).

    Assembles K = [[-K_f, I/2], [I/2, -K_h]] and reports whether it is
    negative definite together with its largest eigenvalue. For diagonal
    gains this reduces to k_f k_h > 1/4 entrywise.
    """
    K_f = _check_symmetric(K_f, "K_f")
    K_h = _check_symmetric(K_h, "K_h")
    if K_f.shape != K_h.shape:
        raise DimensionMismatch(f"K_f {K_f.shape} and K_h {K_h.shape} must match")
    half = 0.5 * np.eye(K_f.shape[0])
    K = np.block([[-K_f, half], [half, -K_h]])
    top = float(np.linalg.eigvalsh(K)[-1])
    return GasCondition(bool(top < 0.0), top)


def action_derivative(config, dd: DesiredDynamics, gains: ExplicitGains, x, u, t: float,
                      settings: FiniteDiffSettings | None = None,
                      pinv_damping: float = DEFAULT_PINV_DAMPING) -> np.ndarray:
    """Herder velocity command that steers the residual along -K_h h.

    u_dot = pinv(J_u) (h_star - J_x f), with a damped right pseudoinverse
    guarding nearly singular herder placements.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    J_x, J_u = jacobians(config, dd, x, u, t, settings)
    h = residual_h(config, dd, x, u, t)
    f = config.dynamics(x, u)
    target = h_star(gains.K_h, h) - J_x @ f
    return damped_right_pinv(J_u, pinv_damping) @ target
