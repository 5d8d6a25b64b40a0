"""Discrete-time action design: damped least-squares root finding per sample.

Each control sample solves h(x, u) = 0 for the herder positions with a
Levenberg-Marquardt iteration, warm started from the previously applied
action, then rate-limits the commanded displacement to what the herders
can physically cover in one sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diff import COND_LIMIT, FiniteDiffSettings, jacobian_u
from .dynamics import DesiredDynamics, residual_h
from .errors import CollisionSingularity, InvariantViolation, SingularSystem

_MAX_STEP_HALVINGS = 10


@dataclass(frozen=True)
class LMConfig:
    """Damped least-squares settings.

    damping is the fixed regulariser added to the normal matrix, step_tol
    the step-norm (m) under which the iteration is declared converged, and
    max_iter the iteration budget per sample (None removes the budget so
    the iteration runs until the step criterion is met).
    """

    damping: float = 0.1
    step_tol: float = 1e-3
    max_iter: int | None = 20

    def __post_init__(self):
        if self.damping < 0:
            raise InvariantViolation(f"damping must be non-negative, got {self.damping}")
        if not self.step_tol > 0:
            raise InvariantViolation(f"step_tol must be positive, got {self.step_tol}")
        if self.max_iter is not None and int(self.max_iter) < 1:
            raise InvariantViolation(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass(frozen=True)
class LMResult:
    """Outcome of one per-sample solve.

    u is the final iterate when converged, otherwise the iterate with the
    smallest residual norm seen. residual_norm is |h(x, u)| at that action.
    """

    u: np.ndarray
    iterations: int
    residual_norm: float
    step_norm: float
    converged: bool


def lm_solve(config, dd: DesiredDynamics, x, u_start, t: float,
             lm: LMConfig | None = None,
             settings: FiniteDiffSettings | None = None) -> LMResult:
    """Solve h(x, u) = 0 for u from a warm start.

    The Jacobian is recomputed every iteration. Each computed step is
    accepted only where it reduces the residual norm; otherwise it is
    halved, up to ten times, before the iteration stops at the best point
    found. A step that would land a herder on top of an evader is likewise
    halved, but exhausting the halvings on a collision propagates the
    error. Convergence is declared once the computed (unhalved) step norm
    falls under step_tol.
    """
    lm = lm or LMConfig()
    x = np.asarray(x, dtype=float)
    u = np.array(u_start, dtype=float).reshape(-1)
    dim = u.size
    eye = np.eye(dim)

    h = residual_h(config, dd, x, u, t)
    eta = float(np.linalg.norm(h))
    best_u, best_eta = u, eta
    k = 0
    step_norm = float("inf")
    converged = False
    while lm.max_iter is None or k < lm.max_iter:
        k += 1
        J = jacobian_u(config, dd, x, u, t, settings)
        A = J.T @ J + lm.damping * eye
        if lm.damping == 0.0:
            cond = np.linalg.cond(A)
            if not np.isfinite(cond) or cond > COND_LIMIT:
                raise SingularSystem(
                    f"undamped normal matrix is numerically singular at iteration {k} "
                    f"(condition estimate {cond:.3e})"
                )
        try:
            zeta = -np.linalg.solve(A, J.T @ h)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"normal matrix could not be factorised: {exc}") from exc
        step_norm = float(np.linalg.norm(zeta))
        accepted = False
        for halving in range(_MAX_STEP_HALVINGS + 1):
            try:
                h_next = residual_h(config, dd, x, u + zeta, t)
            except CollisionSingularity:
                if halving == _MAX_STEP_HALVINGS:
                    raise
                zeta = 0.5 * zeta
                continue
            if float(np.linalg.norm(h_next)) < eta:
                accepted = True
                break
            if halving == _MAX_STEP_HALVINGS:
                break
            zeta = 0.5 * zeta
        if accepted:
            u = u + zeta
            h = h_next
            eta = float(np.linalg.norm(h_next))
            if eta < best_eta:
                best_u, best_eta = u, eta
        if step_norm < lm.step_tol:
            converged = True
            break
        if not accepted:
            break
    if converged:
        return LMResult(u, k, eta, step_norm, True)
    return LMResult(best_u, k, best_eta, step_norm, False)


def rate_limit_action(u_prev, u_solved, v_max: float, sample_time: float) -> np.ndarray:
    """Clip each herder's commanded displacement to at most v_max * sample_time."""
    u_prev = np.asarray(u_prev, dtype=float)
    u_solved = np.asarray(u_solved, dtype=float)
    if u_prev.shape != u_solved.shape:
        raise InvariantViolation(
            f"action shapes differ: {u_prev.shape} vs {u_solved.shape}"
        )
    cap = v_max * sample_time
    delta = (u_solved - u_prev).reshape(-1, 2)
    norms = np.sqrt((delta * delta).sum(axis=1))
    over = norms > cap
    if over.any():
        delta = delta.copy()
        delta[over] *= (cap / norms[over])[:, None]
    return u_prev + delta.reshape(u_prev.shape)
