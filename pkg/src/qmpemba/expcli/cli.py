"""Command line: ``qmpemba {run,validate,list,coupling-calc}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from ..coupling import SWEEP_COLUMNS, CircuitParams, CouplerParams, bare_couplings, dressed_frequencies, effective_coupling, sweep_omega_r
from .config import ConfigError, ExperimentConfig, bundled_configs, load_config, validate
from .runner import run

OUT_ENV = "QMPEMBA_OUT"
DEFAULT_OUT_ROOT = "results"


def _output_dir(cfg: ExperimentConfig, out: str | None) -> Path:
    if out:
        return Path(out)
    if cfg["output"].get("directory"):
        return Path(cfg["output"]["directory"])
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT_ROOT)) / cfg.name


def _apply_seed_override(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is None:
        return cfg
    data = json.loads(json.dumps(cfg.data))
    data["ensemble"]["seed"] = seed
    if data.get("noise") is not None:
        data["noise"]["seed"] = seed
    if "level_stats" in data:
        data["level_stats"]["seed"] = seed
    return ExperimentConfig(validate(data).data, cfg.source)


def cmd_run(args) -> int:
    cfg = _apply_seed_override(load_config(args.config), args.seed_override)
    out = _output_dir(cfg, args.out)
    manifest = run(cfg, out, threads=args.threads)
    print(f"{cfg.name}: {len(manifest['files'])} files written to {out}")
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    for key, verdict in sorted(summary["crossovers"].items()):
        print(f"  {key}: {verdict}")
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"{args.config}: {len(exc.errors)} error(s)")
        for e in exc.errors:
            print(f"  {e}")
        return 1
    print(f"{cfg.name}: ok")
    return 0


def cmd_list(args) -> int:
    for name, path in bundled_configs().items():
        with open(path, encoding="utf-8") as fh:
            desc = (yaml.safe_load(fh) or {}).get("description", "")
        print(f"{name:10s} {' '.join(str(desc).split())}")
    return 0


def load_circuit(path) -> tuple[CircuitParams, dict]:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    raw = dict(raw or {})
    sweep = raw.pop("sweep", None)
    coupler = raw.pop("coupler", None)
    if coupler is not None:
        raw["coupler"] = CouplerParams(**coupler)
    return CircuitParams(**raw), sweep


def cmd_coupling(args) -> int:
    params, sweep = load_circuit(args.config)
    b = bare_couplings(params)
    w1, w2 = dressed_frequencies(params)
    result = {
        "g1r_ghz": b.g1r,
        "g2r_ghz": b.g2r,
        "g12_ghz": b.g12,
        "eta": b.eta,
        "g1c_ghz": b.g1c,
        "g2c_ghz": b.g2c,
        "g_eff_mhz": effective_coupling(params),
        "omega1_dressed_ghz": w1,
        "omega2_dressed_ghz": w2,
    }
    print(json.dumps(result, indent=2, sort_keys=True))
    if sweep is not None:
        values = np.linspace(sweep["start"], sweep["stop"], int(sweep["num"]))
        table = sweep_omega_r(params, values)
        out = Path(args.out) if args.out else Path("coupling_sweep.csv")
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(SWEEP_COLUMNS) + "\n")
            for row in table:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        print(f"sweep over omega_r written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmpemba", description="Quantum Mpemba experiment runner")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True, help="config file or bundled config name")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name> or ./{DEFAULT_OUT_ROOT}/<name>)")
    r.add_argument("--threads", type=int, default=1, help="worker threads for realizations and sweep points")
    r.add_argument("--seed-override", type=int, default=None, help="replace every seed in the config")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config against the schema without running it")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list", help="list bundled configs")
    ls.set_defaults(func=cmd_list)

    c = sub.add_parser("coupling-calc", help="effective coupling from circuit parameters (YAML)")
    c.add_argument("--config", required=True)
    c.add_argument("--out", help="CSV path for the optional omega_r sweep")
    c.set_defaults(func=cmd_coupling)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
