"""Numerical differentiation of the control residual plus pseudoinverse helpers.

Jacobians are central differences with a per-coordinate step, evaluated in
one batched call per block so the herd dynamics kernel does the heavy
lifting. The residual has no closed-form derivative worth maintaining once
model switching enters the picture, so everything downstream consumes
these numerical Jacobians.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import DesiredDynamics, residual_h
from .errors import InvariantViolation, SingularSystem

DEFAULT_FD_STEP = 1e-6
COND_LIMIT = 1e14
"""Condition-number estimate above which an undamped solve is refused."""


@dataclass(frozen=True)
class FiniteDiffSettings:
    """Base perturbation for central differences; scaled per coordinate."""

    step: float = DEFAULT_FD_STEP

    def __post_init__(self):
        if not self.step > 0:
            raise InvariantViolation(f"finite-difference step must be positive, got {self.step}")


class JacobianPair(NamedTuple):
    J_x: np.ndarray
    J_u: np.ndarray


def _central_columns(fn, z: np.ndarray, base_step: float) -> np.ndarray:
    """Central-difference Jacobian of a batched vector map at z.

    The perturbation of coordinate c is max(base_step, base_step * |z_c|).
    """
    z = np.asarray(z, dtype=float)
    dim = z.size
    delta = base_step * np.maximum(1.0, np.abs(z))
    probes = np.concatenate([z + np.diag(delta), z - np.diag(delta)], axis=0)
    values = np.asarray(fn(probes), dtype=float)
    return (values[:dim] - values[dim:]).T / (2.0 * delta)


def jacobian_u(config, dd: DesiredDynamics, x, u, t: float,
               settings: FiniteDiffSettings | None = None) -> np.ndarray:
    """Jacobian of the residual with respect to the stacked herder positions."""
    step = (settings or _DEFAULT_SETTINGS).step
    x = np.asarray(x, dtype=float)
    return _central_columns(lambda U: residual_h(config, dd, x, U, t),
                            np.asarray(u, dtype=float), step)


def jacobians(config, dd: DesiredDynamics, x, u, t: float,
              settings: FiniteDiffSettings | None = None) -> JacobianPair:
    """Residual Jacobians with respect to the state block and the action block."""
    step = (settings or _DEFAULT_SETTINGS).step
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    J_x = _central_columns(lambda X: residual_h(config, dd, X, u, t), x, step)
    J_u = _central_columns(lambda U: residual_h(config, dd, x, U, t), u, step)
    return JacobianPair(J_x, J_u)


_DEFAULT_SETTINGS = FiniteDiffSettings()


def damped_right_pinv(J, mu: float = 0.0) -> np.ndarray:
    """Right pseudoinverse J^T (J J^T + mu I)^-1 of a wide or square matrix.

    With mu = 0 this is the exact Moore-Penrose right inverse and requires
    full row rank; any mu > 0 yields a finite damped solution regardless of
    rank.
    """
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if mu < 0:
        raise InvariantViolation(f"damping must be non-negative, got {mu}")
    rows = J.shape[0]
    M = J @ J.T + mu * np.eye(rows)
    if mu == 0.0:
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularSystem(
                f"J J^T is numerically singular (condition estimate {cond:.3e}) and no damping is set"
            )
    try:
        return np.linalg.solve(M, J).T
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"damped normal matrix could not be factorised: {exc}") from exc


class RankCondition(NamedTuple):
    satisfied: bool
    smallest_singular_value: float


def rank_condition(J_u, rel_tol: float = 1e-8) -> RankCondition:
    """Full-row-rank check of J_u, the local existence test for a solving action.

    Works on the singular values of J_u J_u^T: satisfied when the smallest
    exceeds rel_tol times the largest.
    """
    J = np.atleast_2d(np.asarray(J_u, dtype=float))
    rows = J.shape[0]
    s = np.linalg.svd(J, compute_uv=False)
    g = np.zeros(rows)
    g[: s.size] = s * s
    largest = float(g.max(initial=0.0))
    smallest = float(g.min()) if rows <= s.size else 0.0
    return RankCondition(bool(smallest > rel_tol * largest and largest > 0.0), smallest)
