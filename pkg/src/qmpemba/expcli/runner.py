"""Execute a validated experiment config and write its result bundle.

Layout of the output directory::

    curves/<obs>[_g<g>]_th<i>_r<rrr>.csv     one file per (theta, realization)
    summaries/<obs>[_g<g>]_th<i>_mean[_first<k>].csv   ensemble means (realizations > 1)
    reports/crossover[_g<g>]_<obs>.json      crossover report for the first two thetas
    q_function/q_th<i>_t<j>.csv              Husimi function, long format
    level_stats.csv                          mean spacing ratio against W
    summary.json                             all crossover verdicts
    manifest.json                            config, hashes, seeds, code version

Nothing time-dependent is written, so reruns and different thread counts
give byte-identical files.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..analysis import CRITERION_NOTE, detect_crossover, ensemble_average
from ..decoherence import NoiseSpec, TrajectoryConfig, trajectory_average
from ..evolution import Propagator, TimeGrid
from ..model import (
    HamiltonianSpec,
    PotentialProfile,
    integrability_sweep_spec,
    linear_potential,
    load_spec,
    preset_device_like,
    preset_intermediate,
    preset_strong_short_range,
)
from ..observables import (
    EACurve,
    entanglement_asymmetry,
    imbalance,
    partial_trace,
    q_function,
    q_function_grid,
    spacing_ratio_stats,
    sector_spectrum,
    von_neumann_entropy,
)
from ..states import TiltedStateSpec
from .config import ExperimentConfig

log = logging.getLogger(__name__)

CURVE_OBSERVABLES = ("ea_vn", "ea_r2", "ee", "imbalance")
EA_KINDS = {"ea_vn": "von_neumann", "ea_r2": "renyi2"}


def _fmt(x: float) -> str:
    return repr(float(x))


def base_spec(cfg: ExperimentConfig, g: float | None = None, coupling_seed: int | None = None) -> HamiltonianSpec:
    """Coupling matrix of the config with zero on-site potential."""
    m = cfg["model"]
    n = m["n_qubits"]
    p = dict(m.get("params", {}))
    preset = m["preset"]
    if preset == "strong_short_range":
        return preset_strong_short_range(p.get("g_n", -5.0), p.get("g_l", -0.5), n)
    if preset == "intermediate":
        return preset_intermediate(p.get("g_bar", -2.0), n)
    if preset == "device_like":
        seed = int(p.get("seed", 0)) if coupling_seed is None else coupling_seed
        return preset_device_like(p.get("g_bar", -2.0), n, p.get("spread", 0.4), seed)
    if preset == "integrability_sweep":
        return integrability_sweep_spec(g, p.get("g_n", -5.0), n)
    spec = load_spec(m["coupling_file"], m.get("onsite_file"))
    if spec.n_qubits != n:
        raise ValueError(f"model.coupling_file: has {spec.n_qubits} qubits, config says {n}")
    return spec


def onsite(cfg: ExperimentConfig, realization: int) -> np.ndarray:
    pot = cfg["model"]["potential"]
    profile = PotentialProfile(
        kind=pot["kind"],
        W=pot.get("W", 0.0),
        delta_z=pot.get("delta_z", 0.0),
        g_bar=pot.get("g_bar", -2.0),
        seed=cfg["ensemble"]["seed"],
    )
    return profile.onsite(cfg.n_qubits, realization)


def model_spec(cfg: ExperimentConfig, g=None, realization: int = 0) -> HamiltonianSpec:
    spec = base_spec(cfg, g)
    h = onsite(cfg, realization)
    if cfg["model"]["potential"]["kind"] == "resonant" and cfg["model"]["preset"] == "file":
        h = spec.onsite
    return spec.with_onsite(h)


def _grid(cfg) -> np.ndarray:
    g = cfg["grid"]
    return TimeGrid.from_step(g["t_end"], g["step"], g["t_start"]).times


def _observables_from_states(psi_t, subsystem, wanted):
    """Dict ``obs -> (T,)`` for a batch of snapshots."""
    out = {}
    rho = partial_trace(psi_t, subsystem)
    for name in wanted:
        if name in EA_KINDS:
            out[name] = entanglement_asymmetry(rho, EA_KINDS[name])
        elif name == "ee":
            out[name] = von_neumann_entropy(rho)
        elif name == "imbalance":
            out[name] = imbalance(psi_t)
    return out


def _simulate(cfg: ExperimentConfig, g, realization: int, times, psis):
    """Curves for every theta at one (sweep point, realization): ``{obs: [(mean, err), ...]}``."""
    spec = model_spec(cfg, g, realization)
    wanted = [o for o in cfg["observables"] if o in CURVE_OBSERVABLES]
    sub = cfg["subsystem"]
    result = {o: [] for o in wanted}
    noise = cfg.get("noise")
    if noise is None:
        out = Propagator(spec, cfg["method"]).evolve(psis, times)
        for k in range(psis.shape[1]):
            obs = _observables_from_states(out[:, :, k], sub, wanted)
            for o in wanted:
                result[o].append((obs[o], None))
        return result

    if noise.get("device"):
        nspec = NoiseSpec.device(cfg.n_qubits, noise["relaxation"])
    else:
        nspec = NoiseSpec(noise["t1"], noise["t2star"], noise["relaxation"])
    tcfg = TrajectoryConfig(noise["dt"], noise["M"], noise["seed"] + realization)

    def extractor(path):
        obs = _observables_from_states(path, sub, wanted)
        return np.stack([obs[o] for o in wanted], axis=1)

    for k in range(psis.shape[1]):
        avg = trajectory_average(psis[:, k], spec, nspec, tcfg, times, extractor)
        for j, o in enumerate(wanted):
            result[o].append((avg.mean[:, j].real, avg.stderr[:, j]))
    return result


class _Writer:
    """Single writer for all output files; tracks paths for the manifest."""

    def __init__(self, root: Path, formats=("csv", "json")):
        self.root = root
        self.files = []
        self.formats = tuple(formats)
        self.curves = {}

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(rel)
        return p

    def curve(self, rel, times, values, err=None):
        err = np.zeros_like(values) if err is None else err
        if "json" in self.formats:
            self.curves[rel] = {"t_ns": list(map(float, times)), "value": list(map(float, values)), "stderr": list(map(float, err))}
        if "csv" not in self.formats:
            return
        with open(self.path(rel), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t_ns,value,stderr\n")
            for row in zip(times, values, err):
                fh.write(",".join(_fmt(x) for x in row) + "\n")

    def json(self, rel, obj):
        with open(self.path(rel), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def table(self, rel, header, rows):
        with open(self.path(rel), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(x) if not isinstance(x, (int, np.integer)) else str(int(x)) for x in row) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(cfg.data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _level_stats(cfg, threads):
    ls = cfg["level_stats"]
    n = cfg.n_qubits
    data = dict(cfg.data)
    data["model"] = dict(cfg["model"], preset=ls.get("preset", cfg["model"]["preset"]), params=ls.get("params", cfg["model"]["params"]))
    lcfg = ExperimentConfig(data)

    def one(task):
        W, r = task
        spec = base_spec(lcfg, coupling_seed=ls["seed"] + r).with_onsite(linear_potential(W, n))
        return spacing_ratio_stats(sector_spectrum(spec))

    tasks = [(W, r) for W in ls["W"] for r in range(ls["realizations"])]
    results = _pmap(one, tasks, threads)
    rows = []
    for i, W in enumerate(ls["W"]):
        chunk = results[i * ls["realizations"] : (i + 1) * ls["realizations"]]
        vals = np.array([s.mean for s in chunk])
        err = vals.std(ddof=1) / np.sqrt(vals.size) if vals.size > 1 else 0.0
        rows.append((W, vals.mean(), err, vals.size, int(sum(s.n_dropped for s in chunk))))
    return rows


def _pmap(fn, tasks, threads):
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _tag(g):
    return "" if g is None else f"_g{g:g}"


def run(cfg: ExperimentConfig, out_dir, threads: int = 1) -> dict:
    """Run ``cfg`` and write the bundle into ``out_dir``; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    w = _Writer(out, cfg["output"]["formats"])
    times = _grid(cfg)
    n = cfg.n_qubits
    thetas = cfg.thetas
    family = cfg["state"]["family"]
    psis = np.stack([TiltedStateSpec(family, th, n).prepare() for th in thetas], axis=1)
    sweep = cfg["model"].get("sweep", {}).get("g") if cfg["model"]["preset"] == "integrability_sweep" else None
    points = sweep if sweep is not None else [None]
    n_real = cfg["ensemble"]["realizations"]
    dwell = cfg["analysis"]["dwell"]
    summary = {"criterion": CRITERION_NOTE, "dwell_ns": dwell, "crossovers": {}}

    curve_obs = [o for o in cfg["observables"] if o in CURVE_OBSERVABLES]
    if curve_obs:
        tasks = [(g, r) for g in points for r in range(n_real)]
        results = _pmap(lambda t: _simulate(cfg, t[0], t[1], times, psis), tasks, threads)
        by_point = {}
        for (g, r), res in zip(tasks, results):
            by_point.setdefault(g, []).append(res)
        for g in points:
            reals = by_point[g]
            for o in curve_obs:
                means = []
                for i, th in enumerate(thetas):
                    curves = []
                    for r, res in enumerate(reals):
                        vals, err = res[o][i]
                        w.curve(f"curves/{o}{_tag(g)}_th{i}_r{r:03d}.csv", times, vals, err)
                        curves.append(EACurve(times, vals, o, {"theta": th}, err))
                    if n_real > 1:
                        mean = ensemble_average(curves)
                        w.curve(f"summaries/{o}{_tag(g)}_th{i}_mean.csv", times, mean.values, mean.stderr)
                        for k in cfg["ensemble"]["subsets"]:
                            sub = ensemble_average(curves[:k])
                            w.curve(f"summaries/{o}{_tag(g)}_th{i}_mean_first{k}.csv", times, sub.values, sub.stderr)
                    else:
                        mean = curves[0]
                    means.append(mean)
                if o in EA_KINDS and len(thetas) >= 2:
                    rep = detect_crossover(means[0], means[1], dwell).to_dict()
                    rep.update(observable=o, theta_a=thetas[0], theta_b=thetas[1], g=g)
                    w.json(f"reports/crossover{_tag(g)}_{o}.json", rep)
                    summary["crossovers"][f"{o}{_tag(g)}"] = rep["verdict"]

    if "q_function" in cfg["observables"]:
        q = cfg["q_function"]
        qt = np.array(sorted(q["times"]), dtype=float)
        spec = model_spec(cfg, points[0], 0)
        snaps = Propagator(spec, cfg["method"]).evolve(psis, qt)
        theta_g, phi_g = q_function_grid(q["n_theta"], q["n_phi"])
        tt, pp = np.meshgrid(theta_g, phi_g, indexing="ij")
        for i in range(len(thetas)):
            for j, t in enumerate(qt):
                Q = q_function(partial_trace(snaps[j, :, i], cfg["subsystem"]), q["n_theta"], q["n_phi"])
                rows = zip(tt.ravel(), pp.ravel(), Q.ravel())
                w.table(f"q_function/q_th{i}_t{j}.csv", ("theta", "phi", "q"), rows)
        summary["q_function_times_ns"] = qt.tolist()

    if "level_stats" in cfg["observables"]:
        rows = _level_stats(cfg, threads)
        w.table("level_stats.csv", ("W_mhz", "r_mean", "r_stderr", "n_realizations", "n_dropped"), rows)
        summary["level_stats"] = {"W": [r[0] for r in rows], "r_mean": [float(r[1]) for r in rows]}

    if w.curves:
        w.json("curves.json", w.curves)
    w.json("summary.json", summary)
    manifest = {
        "name": cfg.name,
        "schema_version": cfg["schema_version"],
        "code_version": __version__,
        "config": cfg.data,
        "config_sha256": config_hash(cfg),
        "seeds": {
            "ensemble": cfg["ensemble"]["seed"],
            "noise": None if cfg.get("noise") is None else cfg["noise"]["seed"],
            "level_stats": cfg.get("level_stats", {}).get("seed"),
        },
        "files": {rel: _sha256(out / rel) for rel in sorted(w.files)},
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("wrote %d files to %s", len(w.files) + 1, out)
    return manifest
