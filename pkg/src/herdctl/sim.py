"""Closed-loop fixed-step simulation with per-sample metrics.

Both controller designs run here: the explicit one integrates the herder
velocity law alongside the evaders, the implicit one re-solves the
residual equation each sample. Evaders and herders share the sample time
and the same speed cap. Wall-clock cost is measured around the controller
computation only.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .diff import FiniteDiffSettings
from .dynamics import DesiredDynamics, residual_h
from .errors import CollisionSingularity, InvariantViolation, NotSettled, SingularSystem
from .explicit import DEFAULT_PINV_DAMPING, ExplicitGains, action_derivative, gas_condition
from .implicit import LMConfig, lm_solve, rate_limit_action
from .reference import reference_at

log = logging.getLogger(__name__)

HERDER_SEPARATION_WARN = 0.01
"""Herder-herder spacing (m) under which a proximity warning is logged."""

LYAPUNOV_TOL_COEFF = 10.0
"""Sampling-error allowance for the Lyapunov monitor, calibrated on the
linear benchmark plant (see tests). Steps may raise V by at most
coeff * T^2 * rho^2 * max(V, floor) with rho the largest gain norm."""

LYAPUNOV_V_FLOOR = 1e-6

ETA_DRIFT_RATE = 1.0
"""Residual growth (m/s per second) tolerated between consecutive samples
before the step counts as a residual regression in the run summary."""


@dataclass(frozen=True)
class SimSettings:
    """Shared sample time (s), total duration (s) and speed cap (m/s)."""

    sample_time: float
    duration: float
    v_max: float

    def __post_init__(self):
        if not (math.isfinite(self.sample_time) and self.sample_time > 0):
            raise InvariantViolation(f"sample_time must be positive, got {self.sample_time}")
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise InvariantViolation(f"duration must be non-negative, got {self.duration}")
        if not (math.isfinite(self.v_max) and self.v_max > 0):
            raise InvariantViolation(f"v_max must be positive, got {self.v_max}")


@dataclass(eq=False)
class RunRecord:
    """Time series of one closed-loop run plus bookkeeping flags.

    Row s holds the state and action after s control samples; row 0 is the
    initial condition. eta is the residual norm reported by the solver for
    implicit runs and |h| at the recorded pair for explicit runs.
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    x_star: np.ndarray
    error_norm: np.ndarray
    eta: np.ndarray
    iterations: np.ndarray
    tau: np.ndarray
    lyapunov: np.ndarray
    sat_herders: np.ndarray
    sat_evaders: np.ndarray
    lm_converged: np.ndarray
    sample_time: float
    controller: str
    model: str
    min_herder_separation: float | None = None
    herder_separation_warnings: int = 0
    abort_reason: str | None = None

    @property
    def m(self) -> int:
        return self.x.shape[1] // 2

    @property
    def n(self) -> int:
        return self.u.shape[1] // 2

    @property
    def rows(self) -> int:
        return self.t.size

    def final_evader_errors(self) -> np.ndarray:
        """Per-evader distance to the reference at the last recorded sample."""
        diff = (self.x[-1] - self.x_star[-1]).reshape(-1, 2)
        return np.sqrt((diff * diff).sum(axis=1))

    def summary(self, band: float = 0.05) -> dict:
        """Aggregate the rows into the run summary written next to the trajectory."""
        sl = slice(1, None) if self.rows > 1 else slice(None)
        try:
            settled = settling_time(self, band)
        except NotSettled:
            settled = None
        eta_tail = self.eta[1:]
        regressions = int(np.count_nonzero(
            np.diff(eta_tail) > ETA_DRIFT_RATE * self.sample_time
        )) if eta_tail.size > 1 else 0
        return {
            "rows": int(self.rows),
            "sample_time": float(self.sample_time),
            "duration": float(self.t[-1]),
            "controller": self.controller,
            "model": self.model,
            "k_mean": float(np.mean(self.iterations[sl])),
            "k_std": float(np.std(self.iterations[sl])),
            "eta_mean": float(np.mean(self.eta[sl])),
            "eta_std": float(np.std(self.eta[sl])),
            "tau_mean": float(np.mean(self.tau[sl])),
            "tau_std": float(np.std(self.tau[sl])),
            "settling_time": settled,
            "settling_band": float(band),
            "initial_error": float(self.error_norm[0]),
            "final_error": float(self.error_norm[-1]),
            "final_max_evader_error": float(self.final_evader_errors().max()),
            "flags": {
                "lm_nonconverged_samples": int(np.count_nonzero(~self.lm_converged[sl])),
                "saturated_herder_steps": int(np.count_nonzero(self.sat_herders)),
                "saturated_evader_steps": int(np.count_nonzero(self.sat_evaders)),
                "herder_separation_warnings": int(self.herder_separation_warnings),
                "min_herder_separation": (
                    None if self.min_herder_separation is None
                    else float(self.min_herder_separation)
                ),
                "eta_regression_steps": regressions,
                "aborted": self.abort_reason,
            },
        }


def _clip_blocks(vec: np.ndarray, cap: float) -> tuple[np.ndarray, bool]:
    """Cap the Euclidean norm of every (x, y) block of a stacked vector."""
    pts = vec.reshape(-1, 2)
    norms = np.sqrt((pts * pts).sum(axis=1))
    over = norms > cap
    if not over.any():
        return vec, False
    pts = pts.copy()
    pts[over] *= (cap / norms[over])[:, None]
    return pts.reshape(vec.shape), True


def _min_block_distance(u: np.ndarray) -> float:
    pts = u.reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    dist2 = (diff * diff).sum(axis=2)
    n = pts.shape[0]
    return math.sqrt(float(dist2[np.triu_indices(n, k=1)].min()))


def euler_step(config, x, u_next, sample_time: float, v_max: float) -> np.ndarray:
    """One forward-Euler update of the evaders with per-evader speed capping."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(config.dynamics(x, u_next), dtype=float)
    v, _ = _clip_blocks(v, v_max)
    return x + sample_time * v


def run(scenario, design: str | None = None) -> RunRecord:
    """Simulate a scenario closed loop.

    ``design`` overrides the controller type stored in the scenario
    ("explicit" or "implicit"). On a collision or singular system the run
    aborts, keeping the rows recorded so far and noting the reason.
    """
    ctl = scenario.controller
    design = design or ctl.type
    if design not in ("explicit", "implicit"):
        raise InvariantViolation(f"unknown controller design {design!r}")
    cfg = scenario.herd
    st = scenario.settings
    dd = DesiredDynamics(ctl.K_f, scenario.reference, ctl.feedforward)
    fd = FiniteDiffSettings(step=ctl.fd_step)
    lm = ctl.lm
    gains = None
    if design == "explicit":
        gains = ExplicitGains(ctl.K_f, ctl.K_h)
        gas = gas_condition(ctl.K_f, ctl.K_h)
        if not gas.negative_definite:
            log.warning(
                "gain condition fails (max eigenvalue %.3g); convergence is not guaranteed",
                gas.max_eigenvalue,
            )

    T = st.sample_time
    steps = int(math.floor(st.duration / T + 1e-9))
    rows = steps + 1
    dim_x = 2 * cfg.m
    dim_u = 2 * cfg.n_herders
    t_arr = np.arange(rows) * T
    xs = np.zeros((rows, dim_x))
    us = np.zeros((rows, dim_u))
    x_star_arr = np.zeros((rows, dim_x))
    err = np.zeros(rows)
    eta_arr = np.zeros(rows)
    iters = np.zeros(rows, dtype=int)
    tau = np.zeros(rows)
    lyap = np.zeros(rows)
    sat_h = np.zeros(rows, dtype=bool)
    sat_e = np.zeros(rows, dtype=bool)
    lm_ok = np.ones(rows, dtype=bool)

    def fill(s: int, t_s: float, x_s: np.ndarray, u_s: np.ndarray, eta_s: float | None):
        ref = reference_at(scenario.reference, t_s)
        e = x_s - ref.x_star
        err[s] = math.sqrt(float(e @ e))
        try:
            h_row = residual_h(cfg, dd, x_s, u_s, t_s)
            hn2 = float(h_row @ h_row)
        except CollisionSingularity:
            hn2 = math.nan
        lyap[s] = 0.5 * float(e @ e) + 0.5 * hn2
        eta_arr[s] = math.sqrt(hn2) if eta_s is None else eta_s
        xs[s] = x_s
        us[s] = u_s
        x_star_arr[s] = ref.x_star

    x = np.array(scenario.x0, dtype=float).reshape(-1)
    u = np.array(scenario.u0, dtype=float).reshape(-1)
    fill(0, 0.0, x, u, None)

    min_sep = math.inf
    sep_warnings = 0
    abort = None
    completed = rows
    for s in range(1, rows):
        t_prev = float(t_arr[s - 1])
        try:
            clock = time.perf_counter()
            if design == "implicit":
                res = lm_solve(cfg, dd, x, u, t_prev, lm, fd)
                u_new = rate_limit_action(u, res.u, st.v_max, T)
                clipped_h = bool(
                    np.linalg.norm((res.u - u_new).reshape(-1, 2), axis=1).max() > 1e-15
                )
                k_s, eta_s, conv = res.iterations, res.residual_norm, res.converged
            else:
                udot = action_derivative(cfg, dd, gains, x, u, t_prev, fd, ctl.pinv_damping)
                udot, clipped_h = _clip_blocks(udot, st.v_max)
                u_new = u + T * udot
                k_s, eta_s, conv = 0, None, True
            tau_s = time.perf_counter() - clock
            v = np.asarray(cfg.dynamics(x, u_new), dtype=float)
            v, clipped_e = _clip_blocks(v, st.v_max)
            x_new = x + T * v
        except (CollisionSingularity, SingularSystem) as exc:
            abort = f"sample {s} (t = {t_arr[s]:.6g} s): {exc}"
            log.error("run aborted at %s", abort)
            completed = s
            break
        x, u = x_new, u_new
        fill(s, float(t_arr[s]), x, u, eta_s)
        iters[s] = k_s
        tau[s] = tau_s
        sat_h[s] = clipped_h
        sat_e[s] = clipped_e
        lm_ok[s] = conv
        if cfg.n_herders > 1:
            sep = _min_block_distance(u)
            if sep < min_sep:
                min_sep = sep
            if sep < HERDER_SEPARATION_WARN:
                if sep_warnings == 0:
                    log.warning(
                        "herders within %.3g m of each other at t = %.6g s", sep, t_arr[s]
                    )
                sep_warnings += 1

    sl = slice(0, completed)
    return RunRecord(
        t=t_arr[sl],
        x=xs[sl],
        u=us[sl],
        x_star=x_star_arr[sl],
        error_norm=err[sl],
        eta=eta_arr[sl],
        iterations=iters[sl],
        tau=tau[sl],
        lyapunov=lyap[sl],
        sat_herders=sat_h[sl],
        sat_evaders=sat_e[sl],
        lm_converged=lm_ok[sl],
        sample_time=T,
        controller=design,
        model=getattr(cfg, "model_label", type(cfg).__name__),
        min_herder_separation=None if math.isinf(min_sep) else min_sep,
        herder_separation_warnings=sep_warnings,
        abort_reason=abort,
    )


def settling_time(record: RunRecord, band: float = 0.05) -> float:
    """First time after which the error norm stays within band * initial error.

    Raises NotSettled when the last recorded sample still violates the band.
    """
    if not 0 < band < 1:
        raise InvariantViolation(f"band must lie in (0, 1), got {band}")
    err = record.error_norm
    threshold = band * float(err[0])
    bad = err > threshold
    if not bad.any():
        return 0.0
    last_bad = int(np.nonzero(bad)[0][-1])
    if last_bad == err.size - 1:
        raise NotSettled(
            f"error norm still {err[-1]:.6g} (> {threshold:.6g}) at t = {record.t[-1]:.6g} s"
        )
    return float(record.t[last_bad + 1])


def lyapunov_violations(record: RunRecord, K_f, K_h,
                        coeff: float = LYAPUNOV_TOL_COEFF,
                        floor: float = LYAPUNOV_V_FLOOR) -> int:
    """Count steps whose Lyapunov increase exceeds the sampling-error allowance.

    Steps where either population saturated are excluded; there the decay
    argument does not apply. The allowance scales with T^2, the squared
    largest gain norm and the current V, so it tracks the local curvature
    of an exponentially decaying V.
    """
    rho = max(np.linalg.norm(np.atleast_2d(K_f), 2),
              np.linalg.norm(np.atleast_2d(K_h), 2), 1.0)
    if record.rows < 2:
        return 0
    tol = coeff * record.sample_time**2 * rho**2 * np.maximum(record.lyapunov[:-1], floor)
    dv = np.diff(record.lyapunov)
    unsaturated = ~(record.sat_herders[1:] | record.sat_evaders[1:])
    return int(np.count_nonzero((dv > tol) & unsaturated))
