"""Experiment configuration schema (YAML, ``schema_version: 1``).

A config is a mapping with these sections::

    schema_version: 1
    name: fig2c
    description: free text
    model:
      preset: strong_short_range | intermediate | device_like | integrability_sweep | file
      n_qubits: 14
      params: {...}            # preset keyword arguments, MHz
      coupling_file: path      # preset "file" only; onsite_file optional
      potential: {kind: resonant | linear | disorder, W: 6, delta_z: 14, g_bar: -2}
      sweep: {g: [0, 0.05]}    # preset "integrability_sweep" only
    state: {family: neel | ferromagnetic, thetas: [pi/2, pi/4]}
    subsystem: [0, 1, 2]
    grid: {t_end: 300, step: 1, t_start: 0}
    observables: [ea_vn, ea_r2, ee, imbalance, q_function, level_stats]
    q_function: {times: [0, 62.5], n_theta: 64, n_phi: 128}
    level_stats: {W: [1, 2, 8, 32], realizations: 10, seed: 0, preset: device_like, params: {...}}
    noise: {device: true, relaxation: true, dt: 0.15, M: 100, seed: 0}
    ensemble: {realizations: 100, seed: 1, subsets: [6]}
    analysis: {dwell: 20}
    method: auto
    output: {formats: [csv, json], directory: results/fig2c}

Angles may be numbers or strings such as ``"pi/4"`` or ``"3*pi/4"``.
Validation never runs any physics.
"""
from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

SCHEMA_VERSION = 1
PRESETS = ("strong_short_range", "intermediate", "device_like", "integrability_sweep", "file")
OBSERVABLES = ("ea_vn", "ea_r2", "ee", "imbalance", "q_function", "level_stats")
FAMILIES = ("neel", "ferromagnetic")
POTENTIALS = ("resonant", "linear", "disorder")
METHODS = ("auto", "eig", "chebyshev", "krylov")
FORMATS = ("csv", "json")
# dense per-sector diagonalization above N=14 needs more memory than a workstation has
MAX_QUBITS_DENSE = 14
MAX_QUBITS = 16

TOP_KEYS = {
    "schema_version", "name", "description", "model", "state", "subsystem", "grid",
    "observables", "q_function", "level_stats", "noise", "ensemble", "analysis", "method", "output",
}

_ANGLE = re.compile(r"^\s*(?:(?P<num>[0-9.]+)\s*\*?\s*)?pi\s*(?:/\s*(?P<den>[0-9.]+))?\s*$")


class ConfigError(ValueError):
    """Schema violations, one ``"field.path: message"`` entry per problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


def parse_angle(value) -> float:
    if isinstance(value, bool):
        raise ValueError(f"not an angle: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    m = _ANGLE.match(str(value))
    if not m:
        raise ValueError(f"cannot parse angle {value!r}; use a number or 'a*pi/b'")
    num = float(m.group("num")) if m.group("num") else 1.0
    den = float(m.group("den")) if m.group("den") else 1.0
    return num * math.pi / den


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, normalized config.  ``data`` holds plain YAML-compatible values."""

    data: dict
    source: str | None = None

    @property
    def name(self) -> str:
        return self.data["name"]

    @property
    def n_qubits(self) -> int:
        return self.data["model"]["n_qubits"]

    @property
    def thetas(self) -> list:
        return self.data["state"]["thetas"]

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check_model(m, errors, base_dir):
    if not isinstance(m, dict):
        errors.append("model: must be a mapping")
        return
    preset = m.get("preset")
    if preset not in PRESETS:
        errors.append(f"model.preset: unknown preset {preset!r}; expected one of {PRESETS}")
    n = m.get("n_qubits", 14)
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        errors.append(f"model.n_qubits: must be an integer >= 2, got {n!r}")
    elif n > MAX_QUBITS:
        errors.append(f"model.n_qubits: resource bound exceeded, N={n} > {MAX_QUBITS}")
    m["n_qubits"] = n
    params = m.setdefault("params", {})
    if not isinstance(params, dict):
        errors.append("model.params: must be a mapping")
    else:
        for k, v in params.items():
            if not _is_num(v):
                errors.append(f"model.params.{k}: must be a finite number, got {v!r}")
    if preset == "file":
        path = m.get("coupling_file")
        if not path:
            errors.append("model.coupling_file: required for preset 'file'")
        else:
            p = Path(path)
            if not p.is_absolute() and base_dir is not None:
                p = base_dir / p
            if not p.exists():
                errors.append(f"model.coupling_file: no such file {str(p)!r}")
            m["coupling_file"] = str(p)
        if m.get("onsite_file"):
            p = Path(m["onsite_file"])
            if not p.is_absolute() and base_dir is not None:
                p = base_dir / p
            m["onsite_file"] = str(p)
    if preset == "integrability_sweep":
        g = (m.get("sweep") or {}).get("g")
        if not isinstance(g, list) or not g:
            errors.append("model.sweep.g: required non-empty list for preset 'integrability_sweep'")
        else:
            for i, v in enumerate(g):
                if not _is_num(v) or not 0 <= v <= 1:
                    errors.append(f"model.sweep.g[{i}]: must lie in [0, 1], got {v!r}")
    elif "sweep" in m:
        errors.append("model.sweep: only allowed with preset 'integrability_sweep'")
    pot = m.setdefault("potential", {"kind": "resonant"})
    if not isinstance(pot, dict) or pot.get("kind", "resonant") not in POTENTIALS:
        errors.append(f"model.potential.kind: expected one of {POTENTIALS}")
    else:
        pot.setdefault("kind", "resonant")
        for k in ("W", "delta_z", "g_bar"):
            if k in pot and not _is_num(pot[k]):
                errors.append(f"model.potential.{k}: must be a finite number")
        if _is_num(pot.get("delta_z", 0)) and pot.get("delta_z", 0) < 0:
            errors.append("model.potential.delta_z: must be >= 0")


def _check_state(s, errors):
    if not isinstance(s, dict):
        errors.append("state: must be a mapping")
        return
    if s.get("family") not in FAMILIES:
        errors.append(f"state.family: expected one of {FAMILIES}, got {s.get('family')!r}")
    thetas = s.get("thetas")
    if not isinstance(thetas, list) or not thetas:
        errors.append("state.thetas: required non-empty list")
        return
    parsed = []
    for i, v in enumerate(thetas):
        try:
            th = parse_angle(v)
        except ValueError as exc:
            errors.append(f"state.thetas[{i}]: {exc}")
            continue
        if not 0.0 <= th <= math.pi + 1e-12:
            errors.append(f"state.thetas[{i}]: theta={th:.6g} outside [0, pi]")
        parsed.append(min(th, math.pi))
    s["thetas"] = parsed


def _check_grid(g, errors):
    if not isinstance(g, dict):
        errors.append("grid: must be a mapping")
        return
    t_end, step, t0 = g.get("t_end"), g.get("step", 1.0), g.setdefault("t_start", 0.0)
    if not _is_num(t_end) or t_end <= 0:
        errors.append(f"grid.t_end: must be a positive number, got {t_end!r}")
    if not _is_num(step) or step <= 0:
        errors.append(f"grid.step: must be a positive number, got {step!r}")
    g["step"] = step
    if not _is_num(t0) or t0 < 0:
        errors.append("grid.t_start: must be >= 0")
    elif _is_num(t_end) and t_end <= t0:
        errors.append("grid.t_end: must exceed grid.t_start")


def validate(raw, base_dir=None) -> ExperimentConfig:
    """Check ``raw`` against the schema; returns a normalized config or raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: config must be a mapping"])
    data = copy.deepcopy(raw)
    errors = []
    for k in sorted(set(data) - TOP_KEYS):
        errors.append(f"{k}: unknown field")
    if data.get("schema_version") != SCHEMA_VERSION:
        errors.append(f"schema_version: expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    if not isinstance(data.get("name"), str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", data.get("name", "")):
        errors.append("name: required, letters/digits/_.- only")
    data.setdefault("description", "")
    _check_model(data.get("model"), errors, base_dir)
    _check_state(data.get("state"), errors)
    _check_grid(data.get("grid"), errors)

    n = data["model"]["n_qubits"] if isinstance(data.get("model"), dict) else 14
    sub = data.setdefault("subsystem", [0, 1, 2])
    if not isinstance(sub, list) or not sub or not all(isinstance(q, int) and not isinstance(q, bool) for q in sub):
        errors.append("subsystem: must be a non-empty list of qubit indices")
    elif len(set(sub)) != len(sub) or any(not 0 <= q < n for q in sub if isinstance(n, int)):
        errors.append(f"subsystem: indices must be distinct and within [0, {n})")

    obs = data.setdefault("observables", ["ea_vn"])
    if not isinstance(obs, list) or not obs:
        errors.append("observables: must be a non-empty list")
    else:
        for i, o in enumerate(obs):
            if o not in OBSERVABLES:
                errors.append(f"observables[{i}]: unknown observable {o!r}; expected one of {OBSERVABLES}")
        if "q_function" in obs:
            q = data.setdefault("q_function", {})
            times = q.get("times")
            if not isinstance(times, list) or not times or not all(_is_num(t) and t >= 0 for t in times):
                errors.append("q_function.times: required list of nonnegative times (ns)")
            q.setdefault("n_theta", 64)
            q.setdefault("n_phi", 128)
        if "level_stats" in obs:
            ls = data.setdefault("level_stats", {})
            if not isinstance(ls.get("W"), list) or not ls.get("W") or not all(_is_num(w) for w in ls["W"]):
                errors.append("level_stats.W: required list of linear-potential strengths (MHz)")
            ls.setdefault("realizations", 1)
            ls.setdefault("seed", 0)
            if not isinstance(ls["realizations"], int) or ls["realizations"] < 1:
                errors.append("level_stats.realizations: must be a positive integer")
            if ls.get("preset", "intermediate") not in PRESETS[:3]:
                errors.append(f"level_stats.preset: expected one of {PRESETS[:3]}")
            if not isinstance(ls.get("params", {}), dict):
                errors.append("level_stats.params: must be a mapping")

    ens = data.setdefault("ensemble", {"realizations": 1, "seed": 0})
    if not isinstance(ens, dict):
        errors.append("ensemble: must be a mapping")
    else:
        ens.setdefault("realizations", 1)
        ens.setdefault("seed", 0)
        ens.setdefault("subsets", [])
        r = ens["realizations"]
        if not isinstance(r, int) or isinstance(r, bool) or r < 1:
            errors.append(f"ensemble.realizations: must be a positive integer, got {r!r}")
        elif isinstance(data.get("model"), dict) and data["model"].get("potential", {}).get("kind") != "disorder" and r > 1:
            errors.append("ensemble.realizations: > 1 requires a disorder potential")
        if not isinstance(ens["seed"], int):
            errors.append("ensemble.seed: must be an integer")
        for i, k in enumerate(ens["subsets"]):
            if not isinstance(k, int) or not 1 <= k <= (r if isinstance(r, int) else 0):
                errors.append(f"ensemble.subsets[{i}]: must be an integer in [1, realizations]")

    noise = data.get("noise")
    if noise is not None:
        if not isinstance(noise, dict):
            errors.append("noise: must be a mapping")
        else:
            if not noise.get("device") and not ("t1" in noise and "t2star" in noise):
                errors.append("noise: give device: true or both t1 and t2star lists (us)")
            noise.setdefault("relaxation", True)
            noise.setdefault("dt", 0.15)
            noise.setdefault("M", 100)
            noise.setdefault("seed", 0)
            if not _is_num(noise["dt"]) or noise["dt"] <= 0:
                errors.append("noise.dt: must be positive (ns)")
            if not isinstance(noise["M"], int) or noise["M"] < 1:
                errors.append("noise.M: must be a positive integer")
            if "q_function" in (obs or []) or "level_stats" in (obs or []):
                errors.append("noise: only EA, EE and imbalance curves support trajectory averaging")

    an = data.setdefault("analysis", {})
    an.setdefault("dwell", 20.0)
    if not _is_num(an["dwell"]) or an["dwell"] < 0:
        errors.append("analysis.dwell: must be a nonnegative number (ns)")

    method = data.setdefault("method", "auto")
    if method not in METHODS:
        errors.append(f"method: expected one of {METHODS}, got {method!r}")
    elif method == "eig" and isinstance(n, int) and n > MAX_QUBITS_DENSE:
        errors.append(f"method: resource bound exceeded, dense method limited to N <= {MAX_QUBITS_DENSE}, got N={n}")

    out = data.setdefault("output", {})
    out.setdefault("formats", ["csv", "json"])
    if not isinstance(out["formats"], list) or any(f not in FORMATS for f in out["formats"]):
        errors.append(f"output.formats: subset of {FORMATS}")
    if "directory" in out and not isinstance(out["directory"], str):
        errors.append("output.directory: must be a path string")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(data)


def bundled_configs() -> dict:
    """Map of bundled config name to path."""
    root = resources.files("qmpemba.expcli") / "configs"
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda x: x.name) if p.name.endswith(".yaml")}


def resolve_config_path(name_or_path) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = bundled_configs()
    if str(name_or_path) in bundled:
        return bundled[str(name_or_path)]
    raise FileNotFoundError(f"no config file or bundled config named {name_or_path!r}")


def load_config(name_or_path) -> ExperimentConfig:
    path = resolve_config_path(name_or_path)
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    cfg = validate(raw, base_dir=path.parent)
    return ExperimentConfig(cfg.data, str(path))
