"""Scenario configuration: loading, validation and normalization.

Configs are TOML (``.toml``) or JSON (``.json``). :func:`normalize` fills
every default so that the normalized mapping fully determines a run; its
hash is what reports echo. See ``docs/config.md`` for the schema.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ThermoflowError
from .systems import (
    ClassicalIdealGasTP,
    ClassicalRigidGas,
    QuadraticToy,
    QuantumRigidGas,
    State,
)

BOLTZMANN_SI = 1.380649e-23

UNIT_PRESETS = {
    "reduced": {"kb": 1.0, "n0kb": 1.0},
    "si": {"kb": BOLTZMANN_SI, "n0kb": 1.0},
}

SYSTEM_PARAMS = {
    "ideal-gas-tp": {"c": 1.5},
    "boson-rigid": {"kappa": 1.0, "a": 0.5},
    "fermion-rigid": {"kappa": 1.0, "a": 0.5},
    "classical-rigid": {"c": 1.5, "prefactor": 1.0},
    "toy-quadratic": {"a11": 1.0, "a12": 0.0, "a22": 1.0, "center": [1.0, 0.0]},
}

LINES = ("isobar", "iso-mu", "isotherm")
METHODS = ("analytic", "ode")
RATE_KINDS = ("constant", "sinusoid")


class ConfigError(ThermoflowError):
    """Invalid or unreadable configuration; the message names the field or line."""


def load(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    if path.suffix == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    else:
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a table")
    return raw


# -- field helpers --------------------------------------------------------------


def _real(value, name, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{name}': expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"field '{name}': must be finite")
    if positive and value <= 0:
        raise ConfigError(f"field '{name}': must be positive")
    if nonneg and value < 0:
        raise ConfigError(f"field '{name}': must be non-negative")
    return value


def _int(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"field '{name}': expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"field '{name}': must be >= {minimum}")
    return int(value)


def _pair(value, name):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"field '{name}': expected a pair [T, second coordinate]")
    return [_real(value[0], f"{name}[0]"), _real(value[1], f"{name}[1]")]


def _table(raw, name, required=False):
    value = raw.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing table '{name}'")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"field '{name}': expected a table")
    return value


def _reject_unknown(table, allowed, prefix):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"field '{prefix}.{key}': unknown key")


# -- normalization --------------------------------------------------------------


def normalize(raw: dict, units: str | None = None, grid: int | None = None, horizon: float | None = None) -> dict:
    """Validated config with every default filled; command-line overrides applied."""
    _reject_unknown(raw, {"system", "units", "target", "initial", "relaxation", "schedule", "audit", "output"}, "config")

    system = _table(raw, "system", required=True)
    kind = system.get("kind")
    if kind not in SYSTEM_PARAMS:
        raise ConfigError(f"field 'system.kind': must be one of {sorted(SYSTEM_PARAMS)}, got {kind!r}")
    _reject_unknown(system, set(SYSTEM_PARAMS[kind]) | {"kind"}, "system")
    sys_out = {"kind": kind}
    for key, default in SYSTEM_PARAMS[kind].items():
        value = system.get(key, default)
        if key == "center":
            sys_out[key] = _pair(value, "system.center")
        else:
            sys_out[key] = _real(value, f"system.{key}", positive=key not in ("a12",))

    unit_tbl = _table(raw, "units")
    _reject_unknown(unit_tbl, {"preset", "kb", "n0kb"}, "units")
    preset = units or unit_tbl.get("preset", "reduced")
    if preset not in UNIT_PRESETS:
        raise ConfigError(f"field 'units.preset': must be one of {sorted(UNIT_PRESETS)}, got {preset!r}")
    units_out = {"preset": preset}
    for key, default in UNIT_PRESETS[preset].items():
        units_out[key] = _real(unit_tbl.get(key, default), f"units.{key}", positive=True)

    if "target" not in raw:
        raise ConfigError("missing field 'target'")
    target = _pair(raw["target"], "target")

    init = _table(raw, "initial", required=True)
    _reject_unknown(init, {"states", "equidistant"}, "initial")
    if ("states" in init) == ("equidistant" in init):
        raise ConfigError("field 'initial': give exactly one of 'states' or 'equidistant'")
    if "states" in init:
        states = init["states"]
        if not isinstance(states, list) or not 1 <= len(states) <= 2:
            raise ConfigError("field 'initial.states': expected one or two [T, second] pairs")
        init_out = {"states": [_pair(s, f"initial.states[{i}]") for i, s in enumerate(states)]}
    else:
        eq = init["equidistant"]
        if not isinstance(eq, dict):
            raise ConfigError("field 'initial.equidistant': expected a table")
        _reject_unknown(eq, {"given", "line", "value", "bracket"}, "initial.equidistant")
        line = eq.get("line")
        if line not in LINES:
            raise ConfigError(f"field 'initial.equidistant.line': must be one of {list(LINES)}, got {line!r}")
        if "bracket" not in eq:
            raise ConfigError("missing field 'initial.equidistant.bracket'")
        bracket = _pair(eq["bracket"], "initial.equidistant.bracket")
        if not bracket[0] < bracket[1]:
            raise ConfigError("field 'initial.equidistant.bracket': must be increasing")
        eq_out = {"given": _pair(eq.get("given"), "initial.equidistant.given"), "line": line, "bracket": bracket}
        if line == "isotherm":
            eq_out["value"] = _real(eq.get("value"), "initial.equidistant.value", positive=True)
        init_out = {"equidistant": eq_out}

    relax = _table(raw, "relaxation")
    _reject_unknown(relax, {"lambda", "horizon", "grid_points", "method"}, "relaxation")
    lam = _real(relax.get("lambda", 1.0), "relaxation.lambda", positive=True)
    hz = horizon if horizon is not None else relax.get("horizon", 20.0 / lam)
    gp = grid if grid is not None else relax.get("grid_points", 10001)
    method = relax.get("method", "analytic")
    if method not in METHODS:
        raise ConfigError(f"field 'relaxation.method': must be one of {list(METHODS)}, got {method!r}")
    relax_out = {
        "lambda": lam,
        "horizon": _real(hz, "relaxation.horizon", positive=True),
        "grid_points": _int(gp, "relaxation.grid_points", 3),
        "method": method,
    }

    out = {
        "system": sys_out,
        "units": units_out,
        "target": target,
        "initial": init_out,
        "relaxation": relax_out,
    }

    sched = _table(raw, "schedule")
    if sched:
        _reject_unknown(sched, {"rate", "amplitude", "omega", "target_end"}, "schedule")
        rate = sched.get("rate", "constant")
        if rate not in RATE_KINDS:
            raise ConfigError(f"field 'schedule.rate': must be one of {list(RATE_KINDS)}, got {rate!r}")
        sched_out = {"rate": rate, "target_end": _pair(sched.get("target_end", target), "schedule.target_end")}
        if rate == "sinusoid":
            amp = _real(sched.get("amplitude", 0.5), "schedule.amplitude", nonneg=True)
            if amp >= 1:
                raise ConfigError("field 'schedule.amplitude': must be < 1 so the rate stays positive")
            sched_out["amplitude"] = amp
            sched_out["omega"] = _real(sched.get("omega", 1.0), "schedule.omega", positive=True)
        out["schedule"] = sched_out

    audit = _table(raw, "audit")
    _reject_unknown(audit, {"taus"}, "audit")
    taus = audit.get("taus", [0.1 / lam, 1.0 / lam, 5.0 / lam, 20.0 / lam])
    if not isinstance(taus, list) or not taus:
        raise ConfigError("field 'audit.taus': expected a non-empty list")
    out["audit"] = {"taus": [_real(t, f"audit.taus[{i}]", positive=True) for i, t in enumerate(taus)]}
    return out


def output_dir(raw: dict) -> str | None:
    tbl = _table(raw, "output")
    _reject_unknown(tbl, {"dir"}, "output")
    value = tbl.get("dir")
    if value is not None and not isinstance(value, str):
        raise ConfigError("field 'output.dir': expected a string")
    return value


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# -- building objects -----------------------------------------------------------


def build_system(cfg: dict):
    s = cfg["system"]
    u = cfg["units"]
    kind = s["kind"]
    if kind == "ideal-gas-tp":
        return ClassicalIdealGasTP(c=s["c"], n0kb=u["n0kb"])
    if kind in ("boson-rigid", "fermion-rigid"):
        return QuantumRigidGas(kind.split("-")[0], kappa=s["kappa"], a=s["a"], kb=u["kb"])
    if kind == "classical-rigid":
        return ClassicalRigidGas(c=s["c"], prefactor=s["prefactor"], kb=u["kb"])
    return QuadraticToy(s["a11"], s["a12"], s["a22"], tuple(s["center"]))


def make_state(kind: str, pair) -> State:
    """Config pairs carry pressure for the ideal gas and the chart coordinate otherwise."""
    T, second = pair
    if kind == "ideal-gas-tp":
        return State.tp(T, second)
    return State(T, second)
