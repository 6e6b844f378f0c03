"""Command-line entry point: ``quatrmt {density,borderline,holo,mc-verify,selftest}``.

Configuration comes from one JSON file (``--config``) with flag overrides.
Every artifact embeds the resolved configuration and the package version,
and is byte-identical across reruns of the same configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import run_all
from .errors import ConfigError, DomainError, QuatRMTError
from .grid import CURVE_TOL, borderline, default_bbox, density, solve_grid, trace_borderline
from .montecarlo import DEFAULT_BUDGET, SampleConfig, run_comparison, wishart_calibration
from .solver import holomorphic_along
from .transforms import ensemble_from_json

COMMANDS = ("density", "borderline", "holo", "mc-verify", "selftest")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SELFTEST = 0, 1, 2, 3
DEFAULT_OUT = {"density": "density.csv", "borderline": "borderline.json", "holo": "holo.csv",
               "mc-verify": "mc_report.json", "selftest": None}
MC_PAD = 1.0
CALIBRATION_LIMIT = 0.02


@dataclass
class RunConfig:
    command: str
    ensemble_h: dict = field(default_factory=lambda: {"kind": "semicircle", "r": 1.0})
    ensemble_hp: dict = field(default_factory=lambda: {"kind": "semicircle", "r": 1.0})
    bbox: list | None = None
    nx: int = 201
    ny: int = 201
    out: str | None = None
    seed: int = 0
    n: int = 1024
    n_samples: int = 20
    workers: int | None = None
    tol: float = CURVE_TOL
    solver: str = "general"
    richardson: bool = False
    contour: list | None = None
    only: list | None = None

    @classmethod
    def fields(cls) -> set[str]:
        return set(cls.__dataclass_fields__)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        self.ensH = ensemble_from_json(self.ensemble_h)
        self.ensHp = ensemble_from_json(self.ensemble_hp)
        # canonical echo of the ensembles
        self.ensemble_h, self.ensemble_hp = self.ensH.to_json(), self.ensHp.to_json()
        if self.bbox is not None:
            if len(self.bbox) != 4 or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in self.bbox):
                raise ConfigError(f"bbox needs four finite numbers, got {self.bbox!r}")
            self.bbox = [float(v) for v in self.bbox]
            x0, x1, y0, y1 = self.bbox
            if not (x1 > x0 and y1 > y0):
                raise ConfigError(f"bbox must satisfy x0 < x1 and y0 < y1, got {self.bbox!r}")
        for name in ("nx", "ny", "seed", "n", "n_samples"):
            if not isinstance(getattr(self, name), int) or isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be an integer")
        if self.nx < 8 or self.ny < 8:
            raise ConfigError("grid needs at least 8 points per axis")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.workers is None:
            self.workers = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError("tol must be positive")
        self.tol = float(self.tol)
        if self.solver not in ("general", "gue"):
            raise ConfigError(f"solver must be 'general' or 'gue', got {self.solver!r}")
        if self.contour is not None:
            pts = np.asarray(self.contour, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1 or not np.all(np.isfinite(pts)):
                raise ConfigError("contour must be a list of [x, y] pairs")
        if self.only is not None:
            if not all(isinstance(k, int) and 1 <= k <= 10 for k in self.only):
                raise ConfigError("only must list criterion numbers 1..10")
        if self.out is None:
            self.out = DEFAULT_OUT[self.command]

    def resolved_bbox(self, pad: float = 3.0) -> list[float]:
        if self.bbox is None:
            self.bbox = [float(v) for v in default_bbox(self.ensH, self.ensHp, pad)]
        return self.bbox

    def echo(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _pair(text: str, kind, n: int, name: str) -> list:
    parts = text.split(",")
    if len(parts) != n:
        raise ConfigError(f"--{name} expects {n} comma-separated values, got {text!r}")
    try:
        return [kind(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"--{name}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quatrmt", description="Spectral density and borderline of H + iH' for free Hermitian H, H'.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--out", help="output path")
    p.add_argument("--bbox", help="x0,x1,y0,y1")
    p.add_argument("--grid", help="NX,NY")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="matrix size for mc-verify")
    p.add_argument("--samples", type=int, help="number of sampled matrices for mc-verify")
    p.add_argument("--workers", type=int)
    p.add_argument("--tol", type=float, help="borderline vertex tolerance on |C|")
    p.add_argument("--only", help="selftest: comma-separated criterion numbers")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _join_values(argv: list[str]) -> list[str]:
    """Glue ``--bbox -2,2,-2,2`` into one token so argparse does not read ``-2,...`` as a flag."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--bbox", "--grid"):
            out.append(f"{tok}={next(it, '')}")
        else:
            out.append(tok)
    return out


def load_config(argv: list[str]) -> RunConfig:
    args = build_parser().parse_args(_join_values(argv))
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - RunConfig.fields()
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    if data.get("command", args.command) != args.command:
        raise ConfigError(f"config is for {data['command']!r}, command line asks for {args.command!r}")
    data["command"] = args.command
    if args.out is not None:
        data["out"] = args.out
    if args.bbox is not None:
        data["bbox"] = _pair(args.bbox, float, 4, "bbox")
    if args.grid is not None:
        data["nx"], data["ny"] = _pair(args.grid, int, 2, "grid")
    for flag, key in (("seed", "seed"), ("n", "n"), ("samples", "n_samples"), ("workers", "workers"), ("tol", "tol")):
        if getattr(args, flag) is not None:
            data[key] = getattr(args, flag)
    if args.only is not None:
        data["only"] = _pair(args.only, int, len(args.only.split(",")), "only")
    cfg = RunConfig(**data)
    cfg.validate()
    return cfg


# --- writers --------------------------------------------------------------------


def _header(cfg: RunConfig) -> dict:
    return {"config": cfg.echo(), "version": __version__}


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def _write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_json_safe(payload), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _fmt(v: float) -> str:
    return format(float(v) + 0.0, ".17g")  # no "-0"


# --- commands -------------------------------------------------------------------


def cmd_density(cfg: RunConfig) -> int:
    grid = solve_grid(cfg.ensH, cfg.ensHp, tuple(cfg.resolved_bbox()), cfg.nx, cfg.ny,
                      solver=cfg.solver, workers=cfg.workers)
    grid = density(grid, richardson=cfg.richardson)
    curve = trace_borderline(grid, cfg.solver, tol=cfg.tol)
    out = Path(cfg.out)
    _write_text(out, grid.to_csv(_header(cfg)))
    inside = grid.branch == 0
    summary = {
        **_header(cfg),
        "mass": grid.mass(),
        "mass_cut_cells": grid.mass(curve),
        "rho_min": float(np.min(grid.rho)),
        "rho_max": float(np.max(grid.rho)),
        "rho_imag_max": grid.rho_imag_max,
        "cells_inside": int(np.sum(inside)),
        "borderline_curves": len(curve.polylines),
        "csv": out.name,
    }
    _write_json(out.with_suffix(".summary.json"), summary)
    return EXIT_OK


def cmd_borderline(cfg: RunConfig) -> int:
    curve = borderline(cfg.ensH, cfg.ensHp, tuple(cfg.bbox) if cfg.bbox else None, (cfg.nx, cfg.ny),
                       solver=cfg.solver, workers=cfg.workers, tol=cfg.tol)
    cfg.bbox = [float(v) for v in curve.bbox]
    _write_json(Path(cfg.out), {**_header(cfg), **curve.to_json()})
    return EXIT_OK


def cmd_holo(cfg: RunConfig) -> int:
    lines = []
    h = _header(cfg)
    for key in sorted(h):
        lines.append(f"# {key}: {json.dumps(_json_safe(h[key]), sort_keys=True)}")
    if cfg.contour is not None:
        pts = np.asarray(cfg.contour, dtype=float)
        G = holomorphic_along(cfg.ensH, cfg.ensHp, pts[:, 0] + 1j * pts[:, 1])
        lines.append("x,y,re_g,im_g")
        lines += [f"{_fmt(x)},{_fmt(y)},{_fmt(g.real)},{_fmt(g.imag)}" for (x, y), g in zip(pts, G)]
    else:
        grid = solve_grid(cfg.ensH, cfg.ensHp, tuple(cfg.resolved_bbox()), cfg.nx, cfg.ny,
                          solver=cfg.solver, workers=cfg.workers)
        lines.append("x,y,re_g,im_g,branch")
        for iy in range(grid.ny):
            for ix in range(grid.nx):
                g = grid.G[iy, ix] if grid.branch[iy, ix] == 1 else complex(math.nan, math.nan)
                branch = "Holomorphic" if grid.branch[iy, ix] == 1 else ("NonHolomorphic" if grid.branch[iy, ix] == 0 else "Outside")
                lines.append(f"{_fmt(grid.x[ix])},{_fmt(grid.y[iy])},{_fmt(g.real)},{_fmt(g.imag)},{branch}")
    _write_text(Path(cfg.out), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_mc_verify(cfg: RunConfig) -> int:
    sample_cfg = SampleConfig(cfg.n, cfg.n_samples, cfg.seed, cfg.ensH, cfg.ensHp, DEFAULT_BUDGET)
    grid = solve_grid(cfg.ensH, cfg.ensHp, tuple(cfg.resolved_bbox(MC_PAD)), cfg.nx, cfg.ny,
                      solver=cfg.solver, workers=cfg.workers, holomorphic=False)
    grid = density(grid, richardson=cfg.richardson)
    report = run_comparison(sample_cfg, grid, workers=cfg.workers,
                            curve=trace_borderline(grid, cfg.solver, tol=cfg.tol))
    _write_json(Path(cfg.out), {**_header(cfg), "report": report.to_json()})
    return EXIT_OK


def calibration_line() -> tuple[bool, str, dict]:
    """Sampler calibration for the Wishart-like law (part of the self-test)."""
    from .transforms import WishartLike

    rec = wishart_calibration(WishartLike(1.0, 1.0))
    ok = rec["max_rel_err"] < CALIBRATION_LIMIT
    line = f"[{'PASS' if ok else 'FAIL'}]  - Wishart sampler calibration: max_rel_err={rec['max_rel_err']:.3g}"
    return ok, line, rec


def cmd_selftest(cfg: RunConfig) -> int:
    results = run_all(cfg.only, workers=cfg.workers, echo=lambda s: print(s, flush=True))
    cal_ok, cal_line, cal = calibration_line()
    print(cal_line, flush=True)
    passed = all(r.passed for r in results) and cal_ok
    print(f"selftest: {sum(r.passed for r in results) + cal_ok}/{len(results) + 1} passed", flush=True)
    if cfg.out:
        criteria = []
        for r in results:
            rec = r.to_json()
            # wall-clock figures would break byte-identical reruns
            rec.pop("seconds")
            rec["metrics"].pop("runtime_s", None)
            criteria.append(rec)
        _write_json(Path(cfg.out), {**_header(cfg), "passed": passed, "criteria": criteria, "calibration": cal})
    return EXIT_OK if passed else EXIT_SELFTEST


HANDLERS = {"density": cmd_density, "borderline": cmd_borderline, "holo": cmd_holo,
            "mc-verify": cmd_mc_verify, "selftest": cmd_selftest}


def _fail(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = load_config(argv)
    except (ConfigError, DomainError, TypeError, ValueError) as exc:
        return _fail(exc, EXIT_CONFIG)
    try:
        return HANDLERS[cfg.command](cfg)
    except (ConfigError, DomainError) as exc:
        return _fail(exc, EXIT_CONFIG)
    except (QuatRMTError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(exc, EXIT_NUMERIC)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
