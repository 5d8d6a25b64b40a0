"""Scenario documents: JSON parsing, validation, serialisation and run outputs.

A scenario fixes the herd composition, initial positions, reference,
simulation settings and controller configuration. Parsing is strict:
unknown keys, missing fields and out-of-range values are rejected with the
dotted path of the offending entry so a typo never turns into a silently
different experiment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .dynamics import EvaderModel, ExponentialModel, HerdConfig, InverseModel
from .errors import InvariantViolation, SchemaError
from .explicit import DEFAULT_PINV_DAMPING
from .implicit import LMConfig
from .reference import ReferenceSpec, StaticReference, TimeVaryingReference
from .sim import RunRecord, SimSettings

DEFAULT_FD_STEP = 1e-6


@dataclass(eq=False)
class ControllerConfig:
    """Gains and solver settings shared by both controller designs."""

    type: str
    K_f: np.ndarray
    K_h: np.ndarray
    lm: LMConfig
    feedforward: bool
    pinv_damping: float = DEFAULT_PINV_DAMPING
    fd_step: float = DEFAULT_FD_STEP


@dataclass(eq=False)
class Scenario:
    """Everything needed to reproduce one closed-loop run."""

    herd: HerdConfig
    x0: np.ndarray
    u0: np.ndarray
    reference: ReferenceSpec
    settings: SimSettings
    controller: ControllerConfig
    name: str = ""


def _mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path or "$", f"expected an object, got {type(value).__name__}")
    return value


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _field(doc: dict, key: str, path: str):
    if key not in doc:
        raise SchemaError(_join(path, key), "missing required field")
    return doc[key]


def _no_extras(doc: dict, allowed: set, path: str):
    extras = set(doc) - allowed
    if extras:
        raise SchemaError(_join(path, sorted(extras)[0]), "unknown field")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise SchemaError(path, "must be finite")
    return float(value)


def _points(value, path: str, expected: int) -> np.ndarray:
    if not isinstance(value, list) or len(value) != expected:
        raise SchemaError(path, f"expected a list of {expected} [x, y] pairs")
    flat = np.empty(2 * expected)
    for i, entry in enumerate(value):
        if not isinstance(entry, list) or len(entry) != 2:
            raise SchemaError(f"{path}[{i}]", "expected an [x, y] pair")
        flat[2 * i] = _number(entry[0], f"{path}[{i}][0]")
        flat[2 * i + 1] = _number(entry[1], f"{path}[{i}][1]")
    return flat


def _model(entry, path: str) -> EvaderModel:
    entry = _mapping(entry, path)
    kind = _field(entry, "type", path)
    try:
        if kind == "inverse":
            _no_extras(entry, {"type", "gamma"}, path)
            return InverseModel(gamma=_number(_field(entry, "gamma", path), _join(path, "gamma")))
        if kind == "exponential":
            _no_extras(entry, {"type", "alpha", "beta", "sigma", "r"}, path)
            return ExponentialModel(
                alpha=_number(_field(entry, "alpha", path), _join(path, "alpha")),
                beta=_number(_field(entry, "beta", path), _join(path, "beta")),
                sigma=_number(_field(entry, "sigma", path), _join(path, "sigma")),
                r=_number(_field(entry, "r", path), _join(path, "r")),
            )
    except InvariantViolation as exc:
        raise InvariantViolation(f"{path}: {exc}") from None
    raise SchemaError(_join(path, "type"), f"unknown model type {kind!r}")


def _gain(value, path: str, dim: int) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        scalar = _number(value, path)
        if scalar <= 0:
            raise InvariantViolation(f"{path}: scalar gain must be positive, got {scalar}")
        return scalar * np.eye(dim)
    if isinstance(value, list):
        try:
            K = np.array(value, dtype=float)
        except (TypeError, ValueError):
            raise SchemaError(path, "expected a scalar or a square matrix") from None
        if K.shape != (dim, dim):
            raise SchemaError(path, f"matrix must be {dim}x{dim}, got {K.shape}")
        if not np.all(np.isfinite(K)):
            raise InvariantViolation(f"{path}: matrix must be finite")
        scale = max(1.0, float(np.abs(K).max()))
        if float(np.abs(K - K.T).max()) > 1e-12 * scale:
            raise InvariantViolation(f"{path}: matrix must be symmetric")
        if float(np.linalg.eigvalsh(K)[0]) <= 0.0:
            raise InvariantViolation(f"{path}: matrix must be positive definite")
        return K
    raise SchemaError(path, f"expected a scalar or a square matrix, got {type(value).__name__}")


def _lm_config(value, path: str) -> LMConfig:
    if value is None:
        return LMConfig()
    entry = _mapping(value, path)
    _no_extras(entry, {"lambda", "epsilon", "k_max"}, path)
    damping = _number(entry.get("lambda", 0.1), _join(path, "lambda"))
    step_tol = _number(entry.get("epsilon", 1e-3), _join(path, "epsilon"))
    k_max = entry.get("k_max", 20)
    if k_max is not None:
        if isinstance(k_max, bool) or not isinstance(k_max, int):
            raise SchemaError(_join(path, "k_max"), "expected an integer or null")
    try:
        return LMConfig(damping=damping, step_tol=step_tol, max_iter=k_max)
    except InvariantViolation as exc:
        raise InvariantViolation(f"{path}: {exc}") from None


def _reference(value, path: str, m: int) -> ReferenceSpec:
    entry = _mapping(value, path)
    kind = _field(entry, "type", path)
    try:
        if kind == "static":
            _no_extras(entry, {"type", "positions"}, path)
            return StaticReference(_points(_field(entry, "positions", path),
                                           _join(path, "positions"), m))
        if kind == "time_varying":
            _no_extras(entry, {"type", "initial_positions", "v", "w"}, path)
            x0 = _points(_field(entry, "initial_positions", path),
                         _join(path, "initial_positions"), m)
            v = _field(entry, "v", path)
            w = _field(entry, "w", path)
            for name, vec in (("v", v), ("w", w)):
                if not isinstance(vec, list) or len(vec) != m:
                    raise SchemaError(_join(path, name), f"expected a list of {m} numbers")
                for i, item in enumerate(vec):
                    _number(item, f"{_join(path, name)}[{i}]")
            return TimeVaryingReference(x0, np.array(v, dtype=float), np.array(w, dtype=float))
    except InvariantViolation as exc:
        raise InvariantViolation(f"{path}: {exc}") from None
    raise SchemaError(_join(path, "type"), f"unknown reference type {kind!r}")


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
    doc = _mapping(doc, "$")
    _no_extras(doc, {"name", "herd", "initial", "reference", "sim", "controller"}, "")

    name = doc.get("name", "")
    if not isinstance(name, str):
        raise SchemaError("name", "expected a string")

    herd_doc = _mapping(_field(doc, "herd", ""), "herd")
    _no_extras(herd_doc, {"models", "herders"}, "herd")
    models_doc = _field(herd_doc, "models", "herd")
    if not isinstance(models_doc, list) or not models_doc:
        raise SchemaError("herd.models", "expected a non-empty list of model objects")
    models = tuple(_model(entry, f"herd.models[{i}]") for i, entry in enumerate(models_doc))
    herders = _field(herd_doc, "herders", "herd")
    if isinstance(herders, bool) or not isinstance(herders, int):
        raise SchemaError("herd.herders", "expected an integer")
    try:
        herd = HerdConfig(models=models, n_herders=herders)
    except InvariantViolation as exc:
        raise InvariantViolation(f"herd: {exc}") from None
    m = herd.m

    initial = _mapping(_field(doc, "initial", ""), "initial")
    _no_extras(initial, {"evaders", "herders"}, "initial")
    x0 = _points(_field(initial, "evaders", "initial"), "initial.evaders", m)
    u0 = _points(_field(initial, "herders", "initial"), "initial.herders", herd.n_herders)

    reference = _reference(_field(doc, "reference", ""), "reference", m)

    sim_doc = _mapping(_field(doc, "sim", ""), "sim")
    _no_extras(sim_doc, {"T", "duration", "v_max"}, "sim")
    try:
        settings = SimSettings(
            sample_time=_number(_field(sim_doc, "T", "sim"), "sim.T"),
            duration=_number(_field(sim_doc, "duration", "sim"), "sim.duration"),
            v_max=_number(_field(sim_doc, "v_max", "sim"), "sim.v_max"),
        )
    except InvariantViolation as exc:
        raise InvariantViolation(f"sim: {exc}") from None

    ctl_doc = _mapping(_field(doc, "controller", ""), "controller")
    _no_extras(ctl_doc, {"type", "K_f", "K_h", "lm", "feedforward",
                         "pinv_damping", "fd_step"}, "controller")
    ctl_type = _field(ctl_doc, "type", "controller")
    if ctl_type not in ("explicit", "implicit"):
        raise SchemaError("controller.type", f"must be 'explicit' or 'implicit', got {ctl_type!r}")
    K_f = _gain(_field(ctl_doc, "K_f", "controller"), "controller.K_f", 2 * m)
    K_h = _gain(_field(ctl_doc, "K_h", "controller"), "controller.K_h", 2 * m)
    lm = _lm_config(ctl_doc.get("lm"), "controller.lm")
    feedforward = ctl_doc.get("feedforward")
    if feedforward is None:
        feedforward = isinstance(reference, TimeVaryingReference)
    elif not isinstance(feedforward, bool):
        raise SchemaError("controller.feedforward", "expected true, false or null")
    pinv_damping = _number(ctl_doc.get("pinv_damping", DEFAULT_PINV_DAMPING),
                           "controller.pinv_damping")
    if pinv_damping < 0:
        raise InvariantViolation("controller.pinv_damping: must be non-negative")
    fd_step = _number(ctl_doc.get("fd_step", DEFAULT_FD_STEP), "controller.fd_step")
    if fd_step <= 0:
        raise InvariantViolation("controller.fd_step: must be positive")

    controller = ControllerConfig(
        type=ctl_type, K_f=K_f, K_h=K_h, lm=lm, feedforward=bool(feedforward),
        pinv_damping=pinv_damping, fd_step=fd_step,
    )
    return Scenario(herd=herd, x0=x0, u0=u0, reference=reference,
                    settings=settings, controller=controller, name=name)


def load_scenario(path) -> Scenario:
    """Read and parse a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError("scenario", f"cannot read {path}: {exc}") from exc
    return parse_scenario(text)


def _compact_gain(K: np.ndarray):
    dim = K.shape[0]
    scalar = float(K[0, 0])
    if np.array_equal(K, scalar * np.eye(dim)):
        return scalar
    return [[float(v) for v in row] for row in K]


def _points_doc(flat: np.ndarray) -> list:
    pts = flat.reshape(-1, 2)
    return [[float(a), float(b)] for a, b in pts]


def serialize_scenario(scenario: Scenario) -> str:
    """Render a scenario back to its JSON document form (lossless round trip)."""
    models = []
    for mdl in scenario.herd.models:
        if isinstance(mdl, InverseModel):
            models.append({"type": "inverse", "gamma": mdl.gamma})
        else:
            models.append({"type": "exponential", "alpha": mdl.alpha, "beta": mdl.beta,
                           "sigma": mdl.sigma, "r": mdl.r})
    ref = scenario.reference
    if isinstance(ref, StaticReference):
        ref_doc = {"type": "static", "positions": _points_doc(ref.positions)}
    else:
        ref_doc = {
            "type": "time_varying",
            "initial_positions": _points_doc(ref.initial_positions),
            "v": [float(v) for v in ref.v],
            "w": [float(w) for w in ref.w],
        }
    ctl = scenario.controller
    doc = {
        "name": scenario.name,
        "herd": {"models": models, "herders": scenario.herd.n_herders},
        "initial": {
            "evaders": _points_doc(scenario.x0),
            "herders": _points_doc(scenario.u0),
        },
        "reference": ref_doc,
        "sim": {
            "T": scenario.settings.sample_time,
            "duration": scenario.settings.duration,
            "v_max": scenario.settings.v_max,
        },
        "controller": {
            "type": ctl.type,
            "K_f": _compact_gain(ctl.K_f),
            "K_h": _compact_gain(ctl.K_h),
            "lm": {
                "lambda": ctl.lm.damping,
                "epsilon": ctl.lm.step_tol,
                "k_max": ctl.lm.max_iter,
            },
            "feedforward": ctl.feedforward,
            "pinv_damping": ctl.pinv_damping,
            "fd_step": ctl.fd_step,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def _g17(value: float) -> str:
    return f"{value:.17g}"


def write_run(record: RunRecord, out_dir, band: float = 0.05) -> dict:
    """Write trajectory.csv and summary.json for a run; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m, n = record.m, record.n
    header = (
        ["t"]
        + [f"p{axis}_{j + 1}" for j in range(m) for axis in ("x", "y")]
        + [f"h{axis}_{i + 1}" for i in range(n) for axis in ("x", "y")]
        + ["err", "eta", "k", "tau", "V"]
    )
    lines = [",".join(header)]
    for s in range(record.rows):
        cells = [_g17(record.t[s])]
        cells += [_g17(v) for v in record.x[s]]
        cells += [_g17(v) for v in record.u[s]]
        cells += [
            _g17(record.error_norm[s]),
            _g17(record.eta[s]),
            str(int(record.iterations[s])),
            _g17(record.tau[s]),
            _g17(record.lyapunov[s]),
        ]
        lines.append(",".join(cells))
    trajectory = out / "trajectory.csv"
    trajectory.write_text("\n".join(lines) + "\n")
    summary = out / "summary.json"
    summary.write_text(json.dumps(record.summary(band), indent=2) + "\n")
    return {"trajectory": trajectory, "summary": summary}


def bundled_scenario_names() -> list:
    """Names of the scenario documents shipped inside the package."""
    root = resources.files("herdctl").joinpath("data")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_scenario(name: str) -> Scenario:
    """Load one of the bundled scenarios by name (see bundled_scenario_names)."""
    path = resources.files("herdctl").joinpath("data", f"{name}.json")
    if not path.is_file():
        raise SchemaError("scenario", f"unknown bundled scenario {name!r}; "
                          f"available: {', '.join(bundled_scenario_names())}")
    return parse_scenario(path.read_text())


def resolve_scenario(spec: str) -> Scenario:
    """Load a scenario from a file path, falling back to bundled names."""
    path = Path(spec)
    if path.exists():
        return load_scenario(path)
    if spec in bundled_scenario_names():
        return bundled_scenario(spec)
    raise SchemaError("scenario", f"no such file or bundled scenario: {spec}")


def with_sample_time(scenario: Scenario, sample_time: float,
                     unbounded_lm: bool = False) -> Scenario:
    """Copy a scenario with a different sample time, optionally removing the
    iteration budget; used by the sample-time sweep."""
    settings = SimSettings(sample_time=sample_time,
                           duration=scenario.settings.duration,
                           v_max=scenario.settings.v_max)
    lm = scenario.controller.lm
    if unbounded_lm:
        lm = LMConfig(damping=lm.damping, step_tol=lm.step_tol, max_iter=None)
    controller = replace(scenario.controller, lm=lm)
    return replace(scenario, settings=settings, controller=controller)
