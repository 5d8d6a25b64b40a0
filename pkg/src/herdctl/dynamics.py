"""Planar evader models and the closed-loop control residual.

The herd state stacks evader positions x = (p_1, ..., p_m) and the action
stacks herder positions u = (h_1, ..., h_n), both as flat float vectors.
Evaders are repelled by herders; herding works by placing the herders so
that the net repulsion matches a desired velocity field f*. The residual
h(x, u) = f(x, u) - f*(x, t) is the quantity both controllers drive to
zero.

Evaluation routines accept arbitrary leading batch axes on x and u, which
the finite-difference and root-finding code relies on for speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import CollisionSingularity, DimensionMismatch, InvariantViolation
from .reference import ReferenceSpec, reference_at

EPS_COLLISION = 1e-6
"""Herder-evader separation (m) at or below which the dynamics are singular."""


@dataclass(frozen=True)
class InverseModel:
    """Inverse-cube repulsion: velocity gamma * sum_i d_i / |d_i|^3.

    d_i = p - h_i points from herder i to the evader, so the influence of a
    herder grows without bound as it closes in.
    """

    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise InvariantViolation(f"gamma must be a positive finite number, got {self.gamma}")


@dataclass(frozen=True)
class ExponentialModel:
    """Gaussian repulsion alpha * sum_i c_i d_i exp(-|d_i|^2 / sigma^2).

    The per-herder factor c_i switches on the separation: inside the trigger
    radius r the evader is scared and c_i = 1, outside it the reaction is
    weakened to c_i = beta < 1.
    """

    alpha: float
    beta: float
    sigma: float
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvariantViolation(f"alpha must be a positive finite number, got {self.alpha}")
        if not (math.isfinite(self.beta) and 0 < self.beta < 1):
            raise InvariantViolation(f"beta must lie in (0, 1), got {self.beta}")
        if not (math.isfinite(self.sigma) and self.sigma > 1):
            raise InvariantViolation(f"sigma must be greater than 1, got {self.sigma}")
        if not (math.isfinite(self.r) and self.r > 0):
            raise InvariantViolation(f"r must be a positive finite number, got {self.r}")


EvaderModel = Union[InverseModel, ExponentialModel]


@dataclass(frozen=True)
class _PackedModels:
    """Per-evader model parameters flattened into arrays for vectorised evaluation."""

    is_inverse: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    inv_sigma2: np.ndarray
    r: np.ndarray
    all_inverse: bool
    all_exponential: bool


@dataclass(frozen=True)
class HerdConfig:
    """Per-evader motion models plus the herder head-count."""

    models: tuple
    n_herders: int

    def __post_init__(self):
        models = tuple(self.models)
        if not models:
            raise InvariantViolation("at least one evader model is required")
        for mdl in models:
            if not isinstance(mdl, (InverseModel, ExponentialModel)):
                raise InvariantViolation(f"unsupported evader model {type(mdl).__name__}")
        if int(self.n_herders) < 1:
            raise InvariantViolation(f"n_herders must be at least 1, got {self.n_herders}")
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "n_herders", int(self.n_herders))

    @property
    def m(self) -> int:
        return len(self.models)

    @property
    def model_label(self) -> str:
        kinds = {"inverse" if isinstance(mdl, InverseModel) else "exponential" for mdl in self.models}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    @cached_property
    def _packed(self) -> _PackedModels:
        is_inv = np.array([isinstance(mdl, InverseModel) for mdl in self.models])
        gamma = np.array([mdl.gamma if isinstance(mdl, InverseModel) else 0.0 for mdl in self.models])
        alpha = np.array([0.0 if isinstance(mdl, InverseModel) else mdl.alpha for mdl in self.models])
        beta = np.array([1.0 if isinstance(mdl, InverseModel) else mdl.beta for mdl in self.models])
        inv_sigma2 = np.array(
            [0.0 if isinstance(mdl, InverseModel) else 1.0 / mdl.sigma**2 for mdl in self.models]
        )
        r = np.array([0.0 if isinstance(mdl, InverseModel) else mdl.r for mdl in self.models])
        return _PackedModels(
            is_inverse=is_inv,
            gamma=gamma,
            alpha=alpha,
            beta=beta,
            inv_sigma2=inv_sigma2,
            r=r,
            all_inverse=bool(is_inv.all()),
            all_exponential=bool((~is_inv).all()),
        )

    def dynamics(self, x, u) -> np.ndarray:
        """Stacked evader velocities; makes HerdConfig usable as a generic plant."""
        return stacked_dynamics(self, x, u)


def evader_velocity(model: EvaderModel, p, herders) -> np.ndarray:
    """Velocity of a single evader reacting to every herder.

    Scalar reference implementation kept deliberately plain;
    ``stacked_dynamics`` is the vectorised equivalent the controllers use.

    Args:
        model: InverseModel or ExponentialModel for this evader.
        p: evader position, length-2 sequence.
        herders: iterable of herder positions, each a length-2 sequence.
    """
    px, py = float(p[0]), float(p[1])
    vx = 0.0
    vy = 0.0
    for h in herders:
        dx = px - float(h[0])
        dy = py - float(h[1])
        dist = math.hypot(dx, dy)
        if dist <= EPS_COLLISION:
            raise CollisionSingularity(
                f"herder at distance {dist:.3e} m from evader (limit {EPS_COLLISION:.0e} m)"
            )
        if isinstance(model, InverseModel):
            w = model.gamma / dist**3
        elif isinstance(model, ExponentialModel):
            w = model.alpha * math.exp(-(dx * dx + dy * dy) / model.sigma**2)
            if dist > model.r:
                w *= model.beta
        else:
            raise InvariantViolation(f"unsupported evader model {type(model).__name__}")
        vx += w * dx
        vy += w * dy
    return np.array([vx, vy])


def _pair_weights(packed: _PackedModels, dist2: np.ndarray) -> np.ndarray:
    if packed.all_inverse:
        return packed.gamma[:, None] / (dist2 * np.sqrt(dist2))
    dist = np.sqrt(dist2)
    scared = dist <= packed.r[:, None]
    w_exp = (
        np.where(scared, 1.0, packed.beta[:, None])
        * packed.alpha[:, None]
        * np.exp(-dist2 * packed.inv_sigma2[:, None])
    )
    if packed.all_exponential:
        return w_exp
    w_inv = packed.gamma[:, None] / (dist2 * dist)
    return np.where(packed.is_inverse[:, None], w_inv, w_exp)


def stacked_dynamics(config: HerdConfig, x, u) -> np.ndarray:
    """Stacked evader velocities f(x, u) for a possibly heterogeneous herd.

    x and u may carry leading batch axes; the trailing axis must hold 2*m
    and 2*n coordinates respectively.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    m = config.m
    n = config.n_herders
    if x.shape[-1] != 2 * m:
        raise DimensionMismatch(f"state length {x.shape[-1]} does not match 2*m = {2 * m}")
    if u.shape[-1] != 2 * n:
        raise DimensionMismatch(f"action length {u.shape[-1]} does not match 2*n = {2 * n}")
    P = x.reshape(x.shape[:-1] + (m, 1, 2))
    H = u.reshape(u.shape[:-1] + (1, n, 2))
    D = P - H
    dist2 = np.einsum("...k,...k->...", D, D)
    if np.any(dist2 <= EPS_COLLISION * EPS_COLLISION):
        nearest = math.sqrt(float(dist2.min()))
        raise CollisionSingularity(
            f"herder at distance {nearest:.3e} m from evader (limit {EPS_COLLISION:.0e} m)"
        )
    w = _pair_weights(config._packed, dist2)
    V = np.einsum("...mn,...mnk->...mk", w, D)
    return V.reshape(V.shape[:-2] + (2 * m,))


@dataclass(frozen=True)
class DesiredDynamics:
    """Commanded velocity field f*(x, t) = -K_f (x - x*(t)), plus optional dx*/dt.

    K_f must be symmetric; the feedforward term matters only for
    time-varying references and defaults to off here (scenario parsing
    switches it on for those).
    """

    K_f: np.ndarray
    reference: ReferenceSpec
    feedforward: bool = False

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K_f, dtype=float))
        dim = 2 * self.reference.m
        if K.shape != (dim, dim):
            raise DimensionMismatch(f"K_f shape {K.shape} does not match 2*m = {dim}")
        if not np.all(np.isfinite(K)):
            raise InvariantViolation("K_f must be finite")
        scale = max(1.0, float(np.abs(K).max()))
        if float(np.abs(K - K.T).max()) > 1e-12 * scale:
            raise InvariantViolation("K_f must be symmetric")
        object.__setattr__(self, "K_f", K)


def desired_dynamics(dd: DesiredDynamics, x, t: float) -> np.ndarray:
    """Evaluate the commanded velocity field at state x and time t."""
    x = np.asarray(x, dtype=float)
    ref = reference_at(dd.reference, t)
    if x.shape[-1] != ref.x_star.size:
        raise DimensionMismatch(
            f"state length {x.shape[-1]} does not match reference length {ref.x_star.size}"
        )
    out = -((x - ref.x_star) @ dd.K_f.T)
    if dd.feedforward:
        out = out + ref.xdot_star
    return out


def residual_h(config, dd: DesiredDynamics, x, u, t: float) -> np.ndarray:
    """Control residual h = f(x, u) - f*(x, t); herding roots solve h = 0 in u.

    ``config`` may be any plant exposing ``m``, ``n_herders`` and a batched
    ``dynamics(x, u)``; HerdConfig is the herding plant.
    """
    return config.dynamics(x, u) - desired_dynamics(dd, x, t)


def h_star(K_h, h) -> np.ndarray:
    """Commanded residual rate -K_h h that drives the residual to zero."""
    K = np.atleast_2d(np.asarray(K_h, dtype=float))
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != K.shape[1]:
        raise DimensionMismatch(f"residual length {h.shape[-1]} does not match K_h {K.shape}")
    return -(h @ K.T)
