"""Run configuration: a TOML file with ``[regime]``, ``[claims]``, ``[simulation]`` and ``[grids]``.

Example::

    output_dir = "out"

    [regime]
    a0 = 1.0
    a1 = 2.0
    sigma0 = 1.0
    sigma1 = 1.0
    lambda01 = 1.0
    lambda10 = 1.0

    [claims]
    c = 1.2
    alpha1 = 1.0
    alpha2 = 0.0
    F1 = { family = "exponential", rate = 1.0 }

    [simulation]
    seed = 12345
    n_paths = 100000
    initial_regimes = [0, 1]

    [grids]
    u = [10, 20, 50, 100]

Unknown keys anywhere are rejected. A ``manifest.json`` written by a previous
run is also accepted in place of the TOML file.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .model import ClaimModel, Constant, Exponential, LogNormal, ModelSpec, Pareto, RegimeParams
from .pathsim import SimConfig

_FAMILIES = {
    "exponential": (Exponential, ("rate",)),
    "pareto": (Pareto, ("scale", "shape")),
    "constant": (Constant, ("value",)),
    "lognormal": (LogNormal, ("mu", "sigma")),
}

_SIM_DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "n_paths": 10_000,
    "n_cycles_max": 10_000,
    "grid_step": None,
    "trunc_eps": 1e-12,
    "workers": 1,
    "initial_regimes": [0, 1],
    "n_cycles": 100_000,
}
_GRID_DEFAULTS: dict[str, Any] = {
    "u": None,
    "q": None,
    "hill_k": None,
    "u_min_quantile": 0.99,
    "per_decade": 20,
}
_REGIME_KEYS = ("a0", "a1", "sigma0", "sigma1", "lambda01", "lambda10")
_CLAIM_KEYS = ("c", "alpha1", "alpha2", "F1", "F2")
_TOP_KEYS = {"output_dir", "regime", "claims", "simulation", "grids"}


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    sim: SimConfig
    initial_regimes: tuple[int, ...]
    n_cycles: int
    output_dir: Path
    u_grid: Optional[tuple[float, ...]]
    q_grid: Optional[tuple[float, ...]]
    hill_k: Optional[int]
    u_min_quantile: float
    per_decade: int
    resolved: dict  # plain-data form of everything above, defaults filled in


def _reject_unknown(section: str, data: dict, allowed) -> None:
    extra = sorted(set(data) - set(allowed))
    if extra:
        where = f"[{section}]" if section else "top level"
        raise ConfigError(f"unknown key(s) at {where}: {', '.join(extra)}")


def _number(section: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"[{section}] {key} must be finite")
    return value


def _integer(section: str, key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
    return value


def _number_list(section: str, key: str, value: Any) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"[{section}] {key} must be a non-empty list of numbers")
    return tuple(_number(section, key, v) for v in value)


def _claim_dist(key: str, data: Any) -> dict:
    if not isinstance(data, dict) or "family" not in data:
        raise ConfigError(f"[claims] {key} must be a table with a 'family' key")
    family = str(data["family"]).lower()
    if family not in _FAMILIES:
        raise ConfigError(f"[claims] {key}: unknown family {data['family']!r}; "
                          f"expected one of {', '.join(_FAMILIES)}")
    _, params = _FAMILIES[family]
    _reject_unknown(f"claims.{key}", data, ("family",) + params)
    missing = [p for p in params if p not in data]
    if missing:
        raise ConfigError(f"[claims] {key}: missing {', '.join(missing)}")
    out = {"family": family}
    out.update({p: _number("claims", f"{key}.{p}", data[p]) for p in params})
    return out


def _build_dist(d: Optional[dict]):
    if d is None:
        return None
    cls, params = _FAMILIES[d["family"]]
    return cls(*(d[p] for p in params))


def resolve(raw: dict) -> dict:
    """Validate a raw mapping and fill in defaults, returning plain data."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a table")
    _reject_unknown("", raw, _TOP_KEYS)
    for section in ("regime", "claims"):
        if section not in raw or not isinstance(raw[section], dict):
            raise ConfigError(f"missing [{section}] section")

    reg = raw["regime"]
    _reject_unknown("regime", reg, _REGIME_KEYS)
    missing = [k for k in _REGIME_KEYS if k not in reg]
    if missing:
        raise ConfigError(f"[regime] missing {', '.join(missing)}")
    regime = {k: _number("regime", k, reg[k]) for k in _REGIME_KEYS}

    cl = raw["claims"]
    _reject_unknown("claims", cl, _CLAIM_KEYS)
    if "c" not in cl:
        raise ConfigError("[claims] missing c")
    claims = {
        "c": _number("claims", "c", cl["c"]),
        "alpha1": _number("claims", "alpha1", cl.get("alpha1", 0.0)),
        "alpha2": _number("claims", "alpha2", cl.get("alpha2", 0.0)),
        "F1": _claim_dist("F1", cl["F1"]) if cl.get("F1") is not None else None,
        "F2": _claim_dist("F2", cl["F2"]) if cl.get("F2") is not None else None,
    }

    sim_raw = raw.get("simulation", {})
    _reject_unknown("simulation", sim_raw, _SIM_DEFAULTS)
    sim = dict(_SIM_DEFAULTS)
    sim.update(sim_raw)
    for key in ("seed", "n_paths", "n_cycles_max", "workers", "n_cycles"):
        sim[key] = _integer("simulation", key, sim[key])
    sim["trunc_eps"] = _number("simulation", "trunc_eps", sim["trunc_eps"])
    if sim["grid_step"] is not None:
        sim["grid_step"] = _number("simulation", "grid_step", sim["grid_step"])
    regimes = sim["initial_regimes"]
    if not isinstance(regimes, list) or not regimes or any(r not in (0, 1) or isinstance(r, bool) for r in regimes):
        raise ConfigError("[simulation] initial_regimes must be a non-empty list drawn from {0, 1}")
    sim["initial_regimes"] = sorted(set(regimes))

    grids_raw = raw.get("grids", {})
    _reject_unknown("grids", grids_raw, _GRID_DEFAULTS)
    grids = dict(_GRID_DEFAULTS)
    grids.update(grids_raw)
    for key in ("u", "q"):
        if grids[key] is not None:
            grids[key] = list(_number_list("grids", key, grids[key]))
    if grids["hill_k"] is not None:
        grids["hill_k"] = _integer("grids", "hill_k", grids["hill_k"])
    grids["u_min_quantile"] = _number("grids", "u_min_quantile", grids["u_min_quantile"])
    grids["per_decade"] = _integer("grids", "per_decade", grids["per_decade"])

    output_dir = raw.get("output_dir", "ruintail-out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir must be a string")
    return {
        "output_dir": output_dir,
        "regime": regime,
        "claims": claims,
        "simulation": sim,
        "grids": grids,
    }


def build(resolved: dict) -> RunConfig:
    """Construct typed objects from a resolved mapping."""
    try:
        regimes = RegimeParams(**resolved["regime"])
        c = resolved["claims"]
        claims = ClaimModel(c=c["c"], alpha1=c["alpha1"], alpha2=c["alpha2"],
                            F1=_build_dist(c["F1"]), F2=_build_dist(c["F2"]))
        s = resolved["simulation"]
        sim = SimConfig(
            n_paths=s["n_paths"],
            n_cycles_max=s["n_cycles_max"],
            grid_step=s["grid_step"],
            trunc_eps=s["trunc_eps"],
            workers=s["workers"],
            seed=s["seed"],
        )
        model = ModelSpec(regimes, claims, s["initial_regimes"][0])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    g = resolved["grids"]
    if s["n_cycles"] < 2:
        raise ConfigError("[simulation] n_cycles must be >= 2")
    return RunConfig(
        model=model,
        sim=sim,
        initial_regimes=tuple(s["initial_regimes"]),
        n_cycles=s["n_cycles"],
        output_dir=Path(resolved["output_dir"]),
        u_grid=None if g["u"] is None else tuple(g["u"]),
        q_grid=None if g["q"] is None else tuple(g["q"]),
        hill_k=g["hill_k"],
        u_min_quantile=g["u_min_quantile"],
        per_decade=g["per_decade"],
        resolved=resolved,
    )


def read_raw(path: Path, command: Optional[str] = None) -> dict:
    """Read a TOML config, or the config recorded in a run manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if "runs" in data:
            runs = data["runs"]
            if command is None or command not in runs:
                if len(runs) != 1:
                    raise ConfigError(f"{path}: manifest holds runs {sorted(runs)}; no entry for {command!r}")
                command = next(iter(runs))
            return runs[command]["config"]
        return data
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load(path: Path, command: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Read, apply CLI overrides (``{"simulation": {...}, "output_dir": ...}``) and build."""
    raw = read_raw(path, command)
    resolved = resolve(raw)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict):
            resolved[key].update(value)
        else:
            resolved[key] = value
    resolved = resolve(resolved)
    return build(resolved)
