"""Config parsing, validation and scenario construction.

Configs are TOML (or JSON, so an echoed resolved config can be re-run
verbatim).  The schema is strict: unknown sections or keys are rejected, and
every default the builder fills in is echoed back into summary.json so a run
is reproducible from its own output.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from . import clf as clf_mod
from . import model as model_mod
from .controller import (
    ClassicalController,
    EnvelopeSchedule,
    FlexibleController,
    default_alpha,
)
from .errors import ParseError, ValidationError
from .sim import GridSpec, Scenario


@dataclass
class Config:
    plant: dict
    controller: dict
    run: dict
    map: dict | None
    bench: dict

    def to_dict(self) -> dict:
        out = {
            "plant": dict(self.plant),
            "controller": dict(self.controller),
            "run": dict(self.run),
            "bench": dict(self.bench),
        }
        if self.map is not None:
            out["map"] = dict(self.map)
        return out


def _reject_duplicates(pairs):
    d = {}
    for key, value in pairs:
        if key in d:
            raise ParseError(f"duplicate key '{key}'")
        d[key] = value
    return d


def _require_table(raw: dict, name: str) -> dict:
    if name not in raw:
        raise ValidationError(f"missing required section [{name}]")
    section = raw[name]
    if not isinstance(section, dict):
        raise ValidationError(f"[{name}] must be a table")
    return dict(section)


def _no_unknown(section: dict, allowed: set[str], where: str) -> None:
    for key in section:
        if key not in allowed:
            raise ValidationError(f"unknown key '{where}.{key}'")


def _get_number(
    section: dict,
    where: str,
    key: str,
    default,
    *,
    minimum=None,
    maximum=None,
    strict_min: bool = False,
    strict_max: bool = False,
):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}.{key} must be a number")
    value = float(value)
    if minimum is not None and (value <= minimum if strict_min else value < minimum):
        op = ">" if strict_min else ">="
        raise ValidationError(f"{where}.{key} must be {op} {minimum}")
    if maximum is not None and (value >= maximum if strict_max else value > maximum):
        op = "<" if strict_max else "<="
        raise ValidationError(f"{where}.{key} must be {op} {maximum}")
    return value


def _get_int(section: dict, where: str, key: str, default, *, minimum=None):
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}.{key} must be an integer")
    if minimum is not None and value < minimum:
        raise ValidationError(f"{where}.{key} must be >= {minimum}")
    return value


def _get_vector(section: dict, where: str, key: str, default):
    value = section.get(key, default)
    if value is None:
        return None
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{where}.{key} must be a nonempty array")
    out = []
    for item in value:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ValidationError(f"{where}.{key} must contain numbers")
        out.append(float(item))
    return out


def _validate_plant(section: dict) -> dict:
    kind = section.get("kind")
    if kind not in ("integrator_chain", "buck_boost", "actuator"):
        raise ValidationError(
            "plant.kind must be one of integrator_chain, buck_boost, actuator"
        )
    if kind == "integrator_chain":
        _no_unknown(section, {"kind", "n", "ts", "u_max"}, "plant")
        return {
            "kind": kind,
            "n": _get_int(section, "plant", "n", 2, minimum=1),
            "ts": _get_number(section, "plant", "ts", 1.0, minimum=0.0,
                              strict_min=True),
            "u_max": _get_number(section, "plant", "u_max", 1.0, minimum=0.0,
                                 strict_min=True),
        }
    if kind == "buck_boost":
        allowed = {"kind", "v_in", "inductance", "capacitance", "r_load",
                   "ts", "duty_ref"}
        _no_unknown(section, allowed, "plant")
        return {
            "kind": kind,
            "v_in": _get_number(section, "plant", "v_in", 15.0, minimum=0.0,
                                strict_min=True),
            "inductance": _get_number(section, "plant", "inductance", 1e-4,
                                      minimum=0.0, strict_min=True),
            "capacitance": _get_number(section, "plant", "capacitance", 1e-4,
                                       minimum=0.0, strict_min=True),
            "r_load": _get_number(section, "plant", "r_load", 10.0,
                                  minimum=0.0, strict_min=True),
            "ts": _get_number(section, "plant", "ts", 1e-4, minimum=0.0,
                              strict_min=True),
            "duty_ref": _get_number(section, "plant", "duty_ref", 0.5,
                                    minimum=0.0, maximum=1.0,
                                    strict_min=True, strict_max=True),
        }
    allowed = {"kind", "mass", "damping", "spring", "force_gain", "ts",
               "u_max"}
    _no_unknown(section, allowed, "plant")
    return {
        "kind": kind,
        "mass": _get_number(section, "plant", "mass", 0.1, minimum=0.0,
                            strict_min=True),
        "damping": _get_number(section, "plant", "damping", 1.0, minimum=0.0),
        "spring": _get_number(section, "plant", "spring", 100.0, minimum=0.0),
        "force_gain": _get_number(section, "plant", "force_gain", 10.0,
                                  minimum=0.0, strict_min=True),
        "ts": _get_number(section, "plant", "ts", 1e-4, minimum=0.0,
                          strict_min=True),
        "u_max": _get_number(section, "plant", "u_max", 5.0, minimum=0.0,
                             strict_min=True),
    }


def _validate_controller(section: dict) -> dict:
    kind = section.get("kind")
    if kind not in ("classical", "flexible"):
        raise ValidationError("controller.kind must be classical or flexible")
    allowed = {"kind", "rho", "cone_scale", "q_weight", "r_weight"}
    if kind == "flexible":
        allowed |= {"alpha", "delta", "gamma"}
    _no_unknown(section, allowed, "controller")
    rho = section.get("rho")
    if rho is not None:
        if isinstance(rho, bool) or not isinstance(rho, (int, float)):
            raise ValidationError("controller.rho must be a number")
        if not 0.0 <= float(rho) < 1.0:
            raise ValidationError("rho must lie in [0,1)")
        rho = float(rho)
    out = {
        "kind": kind,
        "rho": rho,
        "cone_scale": _get_number(section, "controller", "cone_scale", None,
                                  minimum=0.0, strict_min=True),
        "q_weight": _get_vector(section, "controller", "q_weight", None),
        "r_weight": _get_vector(section, "controller", "r_weight", None),
    }
    if kind == "flexible":
        out["alpha"] = _get_number(section, "controller", "alpha", None,
                                   minimum=0.0, strict_min=True)
        out["delta"] = _get_number(section, "controller", "delta", 1.0,
                                   minimum=0.0)
        out["gamma"] = _get_number(section, "controller", "gamma", 0.9,
                                   minimum=0.0, maximum=1.0, strict_max=True)
    return out


def _validate_run(section: dict, n: int) -> dict:
    _no_unknown(section, {"x0", "steps", "convergence_tol", "seed"}, "run")
    x0 = _get_vector(section, "run", "x0", None)
    if x0 is None:
        x0 = [0.0] * n
    if len(x0) != n:
        raise ValidationError(f"run.x0 must have length {n}")
    return {
        "x0": x0,
        "steps": _get_int(section, "run", "steps", 100, minimum=1),
        "convergence_tol": _get_number(section, "run", "convergence_tol",
                                       1e-6, minimum=0.0, strict_min=True),
        "seed": _get_int(section, "run", "seed", 0, minimum=0),
    }


def _validate_map(section: dict, n: int, run_steps: int) -> dict:
    _no_unknown(section, {"lo", "hi", "counts", "steps"}, "map")
    lo = _get_vector(section, "map", "lo", None)
    hi = _get_vector(section, "map", "hi", None)
    if lo is None or hi is None:
        raise ValidationError("map.lo and map.hi are required")
    counts = section.get("counts")
    if (
        not isinstance(counts, list)
        or not counts
        or any(isinstance(c, bool) or not isinstance(c, int) for c in counts)
    ):
        raise ValidationError("map.counts must be an array of integers")
    if not (len(lo) == len(hi) == len(counts) == n):
        raise ValidationError(f"map grid arrays must have length {n}")
    return {
        "lo": lo,
        "hi": hi,
        "counts": list(counts),
        "steps": _get_int(section, "map", "steps", run_steps, minimum=1),
    }


def _validate_bench(section: dict, n: int) -> dict:
    _no_unknown(section, {"repetitions", "state_scale"}, "bench")
    if isinstance(section.get("state_scale"), list):
        scale = _get_vector(section, "bench", "state_scale", None)
        if len(scale) != n:
            raise ValidationError(f"bench.state_scale must have length {n}")
    else:
        raw = _get_number(section, "bench", "state_scale", 1.0, minimum=0.0,
                          strict_min=True)
        scale = [raw] * n
    return {
        "repetitions": _get_int(section, "bench", "repetitions", 10_000,
                                minimum=1),
        "state_scale": scale,
    }


def parse_config(path) -> Config:
    """Read, parse and schema-validate a config file (TOML or JSON)."""
    p = Path(path)
    try:
        raw_bytes = p.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read config {p}: {exc}") from exc
    try:
        text = raw_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"config {p} is not valid UTF-8: {exc}") from exc
    if p.suffix.lower() == ".json":
        try:
            raw = json.loads(text, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"config {p}: line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
    else:
        try:
            raw = _toml.loads(text)
        except _toml.TOMLDecodeError as exc:
            raise ParseError(f"config {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("config root must be a table")
    for key in raw:
        if key not in ("plant", "controller", "run", "map", "bench"):
            raise ValidationError(f"unknown section [{key}]")

    plant = _validate_plant(_require_table(raw, "plant"))
    n = plant["n"] if plant["kind"] == "integrator_chain" else 2
    controller = _validate_controller(_require_table(raw, "controller"))
    run = _validate_run(dict(raw.get("run", {})), n)
    map_cfg = None
    if "map" in raw:
        if not isinstance(raw["map"], dict):
            raise ValidationError("[map] must be a table")
        map_cfg = _validate_map(dict(raw["map"]), n, run["steps"])
    bench = _validate_bench(dict(raw.get("bench", {})), n)
    return Config(plant=plant, controller=controller, run=run, map=map_cfg,
                  bench=bench)


def build_plant(plant_cfg: dict) -> model_mod.PlantModel:
    kind = plant_cfg["kind"]
    if kind == "integrator_chain":
        return model_mod.integrator_chain(
            plant_cfg["n"], plant_cfg["ts"], plant_cfg["u_max"]
        )
    if kind == "buck_boost":
        params = model_mod.BuckBoostParams(
            v_in=plant_cfg["v_in"],
            inductance=plant_cfg["inductance"],
            capacitance=plant_cfg["capacitance"],
            r_load=plant_cfg["r_load"],
            ts=plant_cfg["ts"],
            duty_ref=plant_cfg["duty_ref"],
        )
        return model_mod.buck_boost(params)
    params = model_mod.ActuatorParams(
        mass=plant_cfg["mass"],
        damping=plant_cfg["damping"],
        spring=plant_cfg["spring"],
        force_gain=plant_cfg["force_gain"],
        ts=plant_cfg["ts"],
        u_max=plant_cfg["u_max"],
    )
    return model_mod.actuator(params)


def build_scenario(config: Config) -> tuple[Scenario, dict]:
    """Construct the runnable scenario and the fully resolved config echo."""
    plant = build_plant(config.plant)
    ctrl_cfg = dict(config.controller)
    run_cfg = dict(config.run)

    x0 = np.asarray(run_cfg["x0"], dtype=float)
    q_weight = ctrl_cfg["q_weight"] or [1.0] * plant.n
    r_weight = ctrl_cfg["r_weight"] or [1.0] * plant.m
    if len(q_weight) != plant.n:
        raise ValidationError(f"controller.q_weight must have length {plant.n}")
    if len(r_weight) != plant.m:
        raise ValidationError(f"controller.r_weight must have length {plant.m}")
    Q = np.diag(q_weight)
    R = np.diag(r_weight)

    A, B = plant.linearize(np.zeros(plant.n), np.zeros(plant.m))
    # Slow-sampled plants contract at 1 - O(ts) per step, so the fixed-point
    # iteration can legitimately need far more than its documented default.
    candidate = clf_mod.synthesize_dare(A, B, Q, R, max_iter=500_000)

    rho = ctrl_cfg["rho"]
    if rho is None:
        rho = clf_mod.default_rho(A, B, candidate, R, seed=run_cfg["seed"])
    scale = ctrl_cfg["cone_scale"]
    if scale is None:
        v0 = candidate.evaluate(x0)
        scale = v0 if v0 > 0.0 else 1.0
    cone = clf_mod.ConeParams(rho=rho, scale=scale)

    if ctrl_cfg["kind"] == "flexible":
        alpha = ctrl_cfg["alpha"]
        if alpha is None:
            alpha = default_alpha(R)
        controller = FlexibleController(
            clf=candidate,
            cone=cone,
            R_u=R,
            alpha=alpha,
            envelope=EnvelopeSchedule(
                delta=ctrl_cfg["delta"], gamma=ctrl_cfg["gamma"]
            ),
        )
        ctrl_cfg.update(alpha=alpha)
    else:
        controller = ClassicalController(clf=candidate, cone=cone, R_u=R)
    ctrl_cfg.update(rho=rho, cone_scale=scale, q_weight=list(q_weight),
                    r_weight=list(r_weight))

    scenario = Scenario(
        model=plant,
        controller=controller,
        x0=x0,
        steps=run_cfg["steps"],
        ts=config.plant["ts"],
        convergence_tol=run_cfg["convergence_tol"],
        seed=run_cfg["seed"],
    )
    resolved = Config(
        plant=dict(config.plant),
        controller=ctrl_cfg,
        run=run_cfg,
        map=dict(config.map) if config.map is not None else None,
        bench=dict(config.bench),
    )
    return scenario, resolved.to_dict()


def build_grid(config: Config) -> GridSpec:
    if config.map is None:
        raise ValidationError("config has no [map] section")
    return GridSpec(
        lo=np.asarray(config.map["lo"], dtype=float),
        hi=np.asarray(config.map["hi"], dtype=float),
        counts=np.asarray(config.map["counts"], dtype=int),
    )
