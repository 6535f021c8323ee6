"""Scenario configuration: JSON documents describing the true system and the tuning run.

The schema is strict: unknown keys are rejected, dimension inconsistencies are
reported with the offending field, and JSON syntax errors carry line/column
information. A parsed ScenarioConfig echoes back (``echo``) as a plain dict
that re-parses to an equal ScenarioConfig, which is what run metadata stores.
"""

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .kalman import GaussianBelief
from .lti_model import ContinuousModel
from .truth_sim import control_input
from .tuner import DesignParameter, DesignSpec, Scenario, TunerConfig

BUNDLED_SCENARIOS = ("case1", "case2")


class ConfigError(ValueError):
    """Configuration document rejected: syntax, schema, or dimension problem."""


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return obj[key]


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(repr(k) for k in unknown)}")


def _as_matrix(value, where: str) -> tuple[tuple[float, ...], ...]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return ((float(value),),)
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a number or a nonempty nested array")
    rows = []
    width = None
    for row in value:
        if not isinstance(row, list) or not row:
            raise ConfigError(f"{where}: expected a nested array of numbers")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ConfigError(f"{where}: rows have inconsistent lengths")
        for x in row:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ConfigError(f"{where}: entries must be numbers")
        rows.append(tuple(float(x) for x in row))
    return tuple(rows)


def _as_vector(value, where: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a nonempty array of numbers")
    for x in value:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(f"{where}: entries must be numbers")
    return tuple(float(x) for x in value)


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number")
    return float(value)


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer")
    return value


def _as_bool(value, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{where}: expected true or false")
    return value


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario: true model, initial belief, control, design, tuner settings."""

    name: str
    a: tuple
    g: tuple
    gamma: tuple
    h: tuple
    dt: float
    v_true: tuple
    w_true: tuple
    init_mean: tuple
    init_cov: tuple
    control_amplitude: float
    control_omega: float
    design: DesignSpec
    tuner: TunerConfig
    output_dir: str

    def continuous_model(self) -> ContinuousModel:
        return ContinuousModel(
            A=np.array(self.a),
            G=np.array(self.g),
            Gamma=np.array(self.gamma),
            H=np.array(self.h),
            V=np.array(self.v_true),
            W=np.array(self.w_true),
            dt=self.dt,
        )

    def scenario(self) -> Scenario:
        amplitude, omega = self.control_amplitude, self.control_omega

        def control(k: int, dt: float) -> np.ndarray:
            return control_input(k, dt, amplitude=amplitude, omega=omega)

        return Scenario(
            model=self.continuous_model(),
            init=GaussianBelief(mean=np.array(self.init_mean), cov=np.array(self.init_cov)),
            control=control,
        )

    def echo(self) -> dict:
        return {
            "scenario": self.name,
            "model": {
                "A": [list(r) for r in self.a],
                "G": [list(r) for r in self.g],
                "Gamma": [list(r) for r in self.gamma],
                "H": [list(r) for r in self.h],
                "dt": self.dt,
                "V": [list(r) for r in self.v_true],
                "W": [list(r) for r in self.w_true],
            },
            "init": {"mean": list(self.init_mean), "cov": [list(r) for r in self.init_cov]},
            "control": {"amplitude": self.control_amplitude, "omega": self.control_omega},
            "design": {
                "cost": self.design.cost_kind,
                "parameters": [
                    {"name": p.name, "role": p.role, "lower": p.lower, "upper": p.upper}
                    for p in self.design.parameters
                ],
            },
            "tuner": {
                "n_runs": self.tuner.n_runs,
                "horizon": self.tuner.horizon,
                "n_seed": self.tuner.n_seed,
                "max_iterations": self.tuner.max_iterations,
                "alpha": self.tuner.alpha,
                "master_seed": self.tuner.master_seed,
                "acquisition_budget": self.tuner.acquisition_budget,
                "stall_tolerance": self.tuner.stall_tolerance,
                "stall_iterations": self.tuner.stall_iterations,
                "fresh_trajectories": self.tuner.fresh_trajectories,
            },
            "output_dir": self.output_dir,
        }


def _parse_design(obj, where: str) -> DesignSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    _reject_unknown(obj, {"cost", "parameters"}, where)
    cost = obj.get("cost", "nees")
    if cost not in ("nees", "nis"):
        raise ConfigError(f"{where}.cost: must be 'nees' or 'nis'")
    raw = _require(obj, "parameters", where)
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}.parameters: expected a nonempty array")
    params = []
    for i, entry in enumerate(raw):
        pwhere = f"{where}.parameters[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{pwhere}: expected an object")
        _reject_unknown(entry, {"name", "role", "lower", "upper"}, pwhere)
        name = _require(entry, "name", pwhere)
        role = _require(entry, "role", pwhere)
        try:
            params.append(
                DesignParameter(
                    name=str(name),
                    role=str(role),
                    lower=_as_number(_require(entry, "lower", pwhere), f"{pwhere}.lower"),
                    upper=_as_number(_require(entry, "upper", pwhere), f"{pwhere}.upper"),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"{pwhere}: {exc}") from exc
    try:
        return DesignSpec(parameters=tuple(params), cost_kind=cost)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_tuner(obj, where: str, d: int) -> TunerConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    allowed = {
        "n_runs",
        "horizon",
        "n_seed",
        "max_iterations",
        "alpha",
        "master_seed",
        "acquisition_budget",
        "stall_tolerance",
        "stall_iterations",
        "fresh_trajectories",
    }
    _reject_unknown(obj, allowed, where)
    fields: dict = {}
    for key in ("n_runs", "horizon", "n_seed", "max_iterations", "master_seed", "acquisition_budget", "stall_iterations"):
        if key in obj:
            fields[key] = _as_int(obj[key], f"{where}.{key}")
    for key in ("alpha", "stall_tolerance"):
        if key in obj:
            fields[key] = _as_number(obj[key], f"{where}.{key}")
    if "fresh_trajectories" in obj:
        fields["fresh_trajectories"] = _as_bool(obj["fresh_trajectories"], f"{where}.fresh_trajectories")
    fields.setdefault("n_seed", 5 if d == 1 else 10)
    try:
        return TunerConfig(**fields)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    _reject_unknown(doc, {"scenario", "model", "init", "control", "design", "tuner", "output_dir"}, "top level")
    missing = [k for k in ("scenario", "model", "design") if k not in doc]
    if missing:
        raise ConfigError(f"top level: missing required field(s) {', '.join(repr(k) for k in missing)}")

    name = doc["scenario"]
    if not isinstance(name, str) or not name:
        raise ConfigError("scenario: expected a nonempty string")

    model = doc["model"]
    if not isinstance(model, dict):
        raise ConfigError("model: expected an object")
    _reject_unknown(model, {"A", "G", "Gamma", "H", "dt", "V", "W"}, "model")
    a = _as_matrix(_require(model, "A", "model"), "model.A")
    g = _as_matrix(_require(model, "G", "model"), "model.G")
    gamma = _as_matrix(_require(model, "Gamma", "model"), "model.Gamma")
    h = _as_matrix(_require(model, "H", "model"), "model.H")
    dt = _as_number(_require(model, "dt", "model"), "model.dt")
    v_true = _as_matrix(_require(model, "V", "model"), "model.V")
    w_true = _as_matrix(_require(model, "W", "model"), "model.W")

    n = len(a)
    init = doc.get("init", {})
    if not isinstance(init, dict):
        raise ConfigError("init: expected an object")
    _reject_unknown(init, {"mean", "cov"}, "init")
    init_mean = _as_vector(init["mean"], "init.mean") if "mean" in init else tuple([0.0] * n)
    if "cov" in init:
        init_cov = _as_matrix(init["cov"], "init.cov")
    else:
        init_cov = tuple(tuple(1.0 if i == j else 0.0 for j in range(n)) for i in range(n))
    if len(init_mean) != n:
        raise ConfigError("init.mean: length must match the state dimension")
    if len(init_cov) != n or any(len(row) != n for row in init_cov):
        raise ConfigError("init.cov: shape must match the state dimension")

    control = doc.get("control", {})
    if not isinstance(control, dict):
        raise ConfigError("control: expected an object")
    _reject_unknown(control, {"amplitude", "omega"}, "control")
    amplitude = _as_number(control.get("amplitude", 2.0), "control.amplitude")
    omega = _as_number(control.get("omega", 0.75), "control.omega")

    design = _parse_design(doc["design"], "design")
    tuner = _parse_tuner(doc.get("tuner", {}), "tuner", design.d)

    output_dir = doc.get("output_dir", f"kftune-out/{name}")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir: expected a nonempty string")

    cfg = ScenarioConfig(
        name=name,
        a=a,
        g=g,
        gamma=gamma,
        h=h,
        dt=dt,
        v_true=v_true,
        w_true=w_true,
        init_mean=init_mean,
        init_cov=init_cov,
        control_amplitude=amplitude,
        control_omega=omega,
        design=design,
        tuner=tuner,
        output_dir=output_dir,
    )
    try:
        cfg.continuous_model()
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc
    return cfg


def bundled_config_text(name: str) -> str:
    if name not in BUNDLED_SCENARIOS:
        raise ConfigError(f"no bundled scenario named {name!r}")
    return resources.files("kftune").joinpath(f"configs/{name}.json").read_text(encoding="utf-8")


def load_bundled(name: str) -> ScenarioConfig:
    return parse_config(bundled_config_text(name))


def apply_overrides(
    cfg: ScenarioConfig,
    seed: int | None = None,
    iterations: int | None = None,
    cost: str | None = None,
    output_dir: str | None = None,
) -> ScenarioConfig:
    """Command-line flag overrides on top of a parsed configuration."""
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed: must be nonnegative")
        cfg = dataclasses.replace(cfg, tuner=dataclasses.replace(cfg.tuner, master_seed=seed))
    if iterations is not None:
        if iterations < 0:
            raise ConfigError("iters: must be nonnegative")
        cfg = dataclasses.replace(cfg, tuner=dataclasses.replace(cfg.tuner, max_iterations=iterations))
    if cost is not None:
        if cost not in ("nees", "nis"):
            raise ConfigError("cost: must be 'nees' or 'nis'")
        cfg = dataclasses.replace(cfg, design=dataclasses.replace(cfg.design, cost_kind=cost))
    if output_dir is not None:
        cfg = dataclasses.replace(cfg, output_dir=output_dir)
    return cfg
