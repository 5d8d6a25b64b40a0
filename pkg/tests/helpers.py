"""Synthetic plants and record builders shared across the test modules.

The controllers only require a plant object exposing ``m``, ``n_herders``
and a batched ``dynamics(x, u)``, so tests can swap the herding dynamics
for plants whose Jacobians, roots and failure modes are known in closed
form.
"""

from __future__ import annotations

import numpy as np

from herdctl import RunRecord
from herdctl.errors import CollisionSingularity


class LinearPlant:
    """f(x, u) = A u + B x + c with broadcasting over batched x or u."""

    def __init__(self, m, n_herders, A=None, B=None, c=None):
        self.m = m
        self.n_herders = n_herders
        dim_x, dim_u = 2 * m, 2 * n_herders
        self.A = np.zeros((dim_x, dim_u)) if A is None else np.asarray(A, dtype=float)
        self.B = np.zeros((dim_x, dim_x)) if B is None else np.asarray(B, dtype=float)
        self.c = np.zeros(dim_x) if c is None else np.asarray(c, dtype=float)

    def dynamics(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return u @ self.A.T + x @ self.B.T + self.c


class MapPlant:
    """f(x, u) = g(u), a state-independent map of the stacked action."""

    def __init__(self, m, n_herders, g):
        self.m = m
        self.n_herders = n_herders
        self.g = g

    def dynamics(self, x, u):
        return self.g(np.asarray(u, dtype=float))


class BarrierPlant(LinearPlant):
    """Affine plant u - root that raises CollisionSingularity inside a region.

    ``barrier`` receives one stacked action row and returns True where the
    evaluation must fail, which lets tests trigger and exhaust the
    solver's step-halving deterministically.
    """

    def __init__(self, root, barrier):
        root = np.asarray(root, dtype=float)
        super().__init__(1, root.size // 2, A=np.eye(root.size), c=-root)
        self.barrier = barrier

    def dynamics(self, x, u):
        u = np.asarray(u, dtype=float)
        for row in np.atleast_2d(u):
            if self.barrier(row):
                raise CollisionSingularity("action entered the barrier region")
        return super().dynamics(x, u)


def fake_record(t, error_norm, lyapunov=None, eta=None, sat_herders=None,
                sat_evaders=None, sample_time=None, m=1, n=1) -> RunRecord:
    """Assemble a RunRecord with given scalar series and placeholder geometry."""
    t = np.asarray(t, dtype=float)
    rows = t.size
    error_norm = np.asarray(error_norm, dtype=float)
    zeros = np.zeros(rows)
    false = np.zeros(rows, dtype=bool)
    if sample_time is None:
        sample_time = float(t[1] - t[0]) if rows > 1 else 1.0
    return RunRecord(
        t=t,
        x=np.zeros((rows, 2 * m)),
        u=np.zeros((rows, 2 * n)),
        x_star=np.zeros((rows, 2 * m)),
        error_norm=error_norm,
        eta=zeros.copy() if eta is None else np.asarray(eta, dtype=float),
        iterations=np.zeros(rows, dtype=int),
        tau=zeros.copy(),
        lyapunov=zeros.copy() if lyapunov is None else np.asarray(lyapunov, dtype=float),
        sat_herders=false.copy() if sat_herders is None else np.asarray(sat_herders, dtype=bool),
        sat_evaders=false.copy() if sat_evaders is None else np.asarray(sat_evaders, dtype=bool),
        lm_converged=np.ones(rows, dtype=bool),
        sample_time=sample_time,
        controller="implicit",
        model="inverse",
    )


def rotate_stacked(angle: float, vec: np.ndarray) -> np.ndarray:
    """Apply one planar rotation to every (x, y) block of a stacked vector."""
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    pts = np.asarray(vec, dtype=float).reshape(-1, 2)
    return (pts @ R.T).reshape(-1)


def random_herd_positions(rng, m, n, span=4.0, min_sep=0.05):
    """Draw evader and herder positions with every pair clearly separated."""
    while True:
        x = rng.uniform(-span, span, size=2 * m)
        u = rng.uniform(-span, span, size=2 * n)
        P = x.reshape(m, 1, 2)
        H = u.reshape(1, n, 2)
        d = np.sqrt(((P - H) ** 2).sum(axis=2))
        if d.min() > min_sep:
            return x, u
