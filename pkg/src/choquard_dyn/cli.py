"""Command line entry point ``choquard-dyn``.

Configs are sectioned key/value text files::

    seed = 7

    [problem]
    N = 3
    gamma = 2
    p = 3

    [grid]
    L = 12
    n = 64

Exit codes: 0 ok, 2 solver or config failure, 3 evolution did not reach its
horizon, 4 verification failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChoquardError, ConfigError
from .evolution import EvolutionConfig, Termination, evolve, write_trajectory
from .model import ProblemParams, galilean_boost
from .spectral import Field

log = logging.getLogger("choquard_dyn")

EXIT_OK, EXIT_SOLVER, EXIT_EVOLUTION, EXIT_VERIFY = 0, 2, 3, 4

SCHEMA: dict[str, dict[str, type]] = {
    "": {"seed": int},
    "problem": {"N": int, "gamma": float, "p": float},
    "grid": {"L": float, "n": int},
    "groundstate": {"method": str, "tol": float, "max_iter": int, "r_max": float, "h_r": float,
                    "starts": int},
    "evolution": {"dt0": float, "T": float, "dt_floor": float, "blowup_factor": float,
                  "snapshot_every": int, "sample_every": int, "conservation_guard": float,
                  "leak_tol": float, "init": str, "lambda": float, "amplitude": float,
                  "width": float, "boost": list, "halve_dt": bool},
    "classify": {"lambdas": list, "scatter_tol": float, "z_factor": float},
}
_TOP = "__top__"


@dataclass
class RunConfig:
    values: dict[str, dict]
    text_hash: str
    seed: int = 0

    def section(self, name: str) -> dict:
        return self.values.get(name, {})

    @property
    def params(self) -> ProblemParams:
        pr, gr = self.section("problem"), self.section("grid")
        for key in ("N", "gamma", "p"):
            if key not in pr:
                raise ConfigError(f"[problem] is missing {key}")
        return ProblemParams(pr["N"], pr["gamma"], pr["p"], gr.get("L", 16.0), gr.get("n", 64))

    def evolution_config(self) -> EvolutionConfig:
        ev = self.section("evolution")
        keys = ("dt0", "T", "dt_floor", "blowup_factor", "snapshot_every", "sample_every",
                "conservation_guard", "leak_tol")
        kw = {k: ev[k] for k in keys if k in ev}
        if ev.get("halve_dt"):
            kw["dt0"] = kw.get("dt0", EvolutionConfig.dt0) / 2.0
        return EvolutionConfig(**kw)


def _convert(kind: type, raw: str, where: str):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind is list:
            return [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    cp.optionxform = str
    try:
        cp.read_string(f"[{_TOP}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    values: dict[str, dict] = {}
    for sec in cp.sections():
        name = "" if sec == _TOP else sec
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        out = {}
        for key, raw in cp.items(sec):
            if key not in SCHEMA[name]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            out[key] = _convert(SCHEMA[name][key], raw, f"[{sec}] {key}")
        if out:
            values[name] = out
    seed = values.get("", {}).get("seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    canonical = json.dumps(values, sort_keys=True)
    cfg = RunConfig(values, hashlib.sha256(canonical.encode()).hexdigest(), seed)
    cfg.params  # validates the physical fields
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------------------
# Builders


def _ground(cfg: RunConfig, params: ProblemParams):
    from .groundstate import petviashvili_solve, shooting_ground_state

    gs_cfg = cfg.section("groundstate")
    method = gs_cfg.get("method", "petviashvili")
    out = []
    if method in ("shooting", "both"):
        kw = {k: gs_cfg[k] for k in ("r_max",) if k in gs_cfg}
        if "h_r" in gs_cfg:
            kw["h"] = gs_cfg["h_r"]
        if params.gamma != 2.0 or params.p != 2.0:
            raise ConfigError("shooting applies to gamma = 2, p = 2 only")
        out.append(shooting_ground_state(params.N, L=params.L, n=params.n, **kw))
    if method in ("petviashvili", "both"):
        kw = {k: gs_cfg[k] for k in ("tol", "max_iter") if k in gs_cfg}
        out.append(petviashvili_solve(params, **kw))
    if not out:
        raise ConfigError(f"unknown ground-state method {method!r}")
    return out


def build_initial(cfg: RunConfig, params: ProblemParams) -> tuple[Field, object | None]:
    """Initial datum from the [evolution] family plus the ground-state constants
    when a ground state was computed (or is cheap to compute)."""
    from .groundstate import petviashvili_solve, sharp_constant

    ev = cfg.section("evolution")
    grid = params.grid
    init = ev.get("init", "gaussian")
    gsc = None
    if init == "gaussian":
        amp, width = ev.get("amplitude", 1.0), ev.get("width", 1.0)
        u0 = Field(grid, (amp * np.exp(-grid.r2 / (2.0 * width**2))).astype(complex))
    elif init == "lambda_q":
        gs = petviashvili_solve(params, **{k: v for k, v in cfg.section("groundstate").items()
                                           if k in ("tol", "max_iter")})
        gsc = sharp_constant(gs)
        u0 = gs.profile * ev.get("lambda", 1.0)
    else:
        raise ConfigError(f"unknown init family {init!r}")
    if "boost" in ev:
        u0 = galilean_boost(u0, np.resize(np.array(ev["boost"]), params.N), 0.0)
    return u0, gsc


def _constants(params: ProblemParams, gsc):
    if gsc is not None:
        return gsc
    from .groundstate import petviashvili_solve, sharp_constant
    return sharp_constant(petviashvili_solve(params))


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload: dict) -> Path:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
    tmp.replace(path)
    return path


# ---------------------------------------------------------------------------
# Commands


def cmd_ground(cfg: RunConfig, out: Path) -> int:
    from .groundstate import sharp_constant, write_archive

    params = cfg.params
    files = {}
    summary = []
    for gs in _ground(cfg, params):
        arch = write_archive(gs, out, stem=f"ground_{gs.method}")
        files.update({p.name: _file_hash(p) for p in arch.values()})
        C = sharp_constant(gs)
        print(f"{gs.method}: massQ={gs.massQ:.12g} C_GN={C.C_GN:.12g} residual={gs.residual:.3e} "
              f"pohozaev_ratio={gs.pohozaev_ratio_residual:.3e} pohozaev_sum={gs.pohozaev_sum_residual:.3e}")
        summary.append({**gs.summary(), **C.as_dict()})
    _write_json(out / "ground_manifest.json",
                {"command": "ground", "config_hash": cfg.text_hash, "config": cfg.values,
                 "results": summary, "files": files})
    return EXIT_OK


def cmd_evolve(cfg: RunConfig, out: Path, allow_blowup: bool = False) -> int:
    params = cfg.params
    conf = cfg.evolution_config()
    u0, gsc = build_initial(cfg, params)
    traj = evolve(params, u0, conf)
    manifest = write_trajectory(traj, out, "trajectory", gsc=gsc, config_hash=cfg.text_hash,
                                extra={"command": "evolve", "drifts": traj.drifts()})
    print(f"termination={traj.termination.value} t={traj.t_stop:.6g} steps={traj.steps} "
          f"manifest={manifest.name}")
    if traj.termination is Termination.HORIZON:
        return EXIT_OK
    if traj.termination is Termination.BLOWUP and allow_blowup:
        return EXIT_OK
    return EXIT_EVOLUTION


def _scatter_kw(cfg: RunConfig) -> dict:
    c = cfg.section("classify")
    kw = {}
    if "scatter_tol" in c:
        kw["rel_tol"] = c["scatter_tol"]
    if "z_factor" in c:
        kw["z_factor"] = c["z_factor"]
    return kw


def cmd_classify(cfg: RunConfig, out: Path) -> int:
    from .classify import run_and_compare

    params = cfg.params
    u0, gsc = build_initial(cfg, params)
    gsc = _constants(params, gsc)
    verdict, traj = run_and_compare(params, u0, gsc, cfg.evolution_config(), **_scatter_kw(cfg))
    write_trajectory(traj, out, "classify_trajectory", gsc=gsc, config_hash=cfg.text_hash,
                     extra={"command": "classify", "verdict": verdict.to_dict()})
    print(f"predicted={verdict.predicted.value} observed={verdict.observed.value} "
          f"agreement={verdict.agreement_label} ME={verdict.ME:.6g} G={verdict.G:.6g}")
    return EXIT_OK


def _sweep_one(args):
    from .classify import run_and_compare, sweep_row

    lam, params, q_values, gsc, conf, skw = args
    u0 = Field(params.grid, lam * q_values)
    verdict, _ = run_and_compare(params, u0, gsc, conf, **skw)
    return sweep_row(lam, verdict), verdict.to_dict()


def worker_width(requested: int) -> int:
    cap = os.environ.get("CHOQUARD_DYN_THREADS")
    width = max(1, requested)
    if cap:
        try:
            width = min(width, max(1, int(cap)))
        except ValueError:
            raise ConfigError("CHOQUARD_DYN_THREADS must be an integer")
    return width


def cmd_sweep(cfg: RunConfig, out: Path, workers: int = 1) -> int:
    from .classify import write_sweep_csv
    from .groundstate import petviashvili_solve, sharp_constant

    params = cfg.params
    lambdas = cfg.section("classify").get("lambdas", [])
    rows, details = [], []
    if lambdas:
        gs = petviashvili_solve(params)
        gsc = sharp_constant(gs)
        jobs = [(lam, params, gs.profile.values, gsc, cfg.evolution_config(), _scatter_kw(cfg))
                for lam in lambdas]
        width = worker_width(workers)
        if width == 1:
            results = [_sweep_one(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=width) as pool:
                results = list(pool.map(_sweep_one, jobs))
        rows = [r for r, _ in results]
        details = [d for _, d in results]
    path = write_sweep_csv(out / "sweep.csv", rows)
    _write_json(out / "sweep_manifest.json",
                {"command": "sweep", "config_hash": cfg.text_hash, "config": cfg.values,
                 "verdicts": details, "files": {path.name: _file_hash(path)}})
    for r in rows:
        print(",".join(r))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    from .verify import run_suite

    report = run_suite(cfg)
    path = _write_json(out / "verify_report.json",
                       {"command": "verify", "config_hash": cfg.text_hash, "checks": report})
    _write_json(out / "verify_manifest.json",
                {"config_hash": cfg.text_hash, "files": {path.name: _file_hash(path)}})
    failed = [c for c in report if not c["passed"]]
    for c in report:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['detail']}")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = ("ground", "evolve", "classify", "sweep", "verify")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="choquard-dyn", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=".")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--allow-blowup", action="store_true")
    ap.add_argument("--dry-run", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command in ("evolve", "classify"):
            cfg.evolution_config()
        if args.dry_run:
            print(f"config ok: {cfg.text_hash}")
            return EXIT_OK
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "ground":
            return cmd_ground(cfg, out)
        if args.command == "evolve":
            return cmd_evolve(cfg, out, args.allow_blowup)
        if args.command == "classify":
            return cmd_classify(cfg, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.workers)
        return cmd_verify(cfg, out)
    except ChoquardError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_EVOLUTION if args.command == "evolve" and not isinstance(exc, ConfigError) else EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
