"""Command-line entry point: scenario runs, the property suite and the constant sweep.

Exit codes: 0 on success, 2 when the verdict or a property fails, 1 on error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .entropy import QuadratureSettings, write_csv
from .errors import ConfigInvalid, IoError, RelentError
from .gronwall import Envelope, check_series, default_eps, delta_star
from .scenarios import DEFAULTS, NAMES, make_scenario, simulate

log = logging.getLogger("relent")

PHYSICAL = ("rho_plus", "rho_minus", "mu_plus", "mu_minus", "sigma")


@dataclass
class RunConfig:
    name: str = "rotation"
    params: dict = field(default_factory=dict)
    t0: float = 0.0
    t1: float = 1.0
    dt: float = 1e-3
    seed: int = 0
    grid: int = 256
    tolerances: dict = field(default_factory=dict)
    delta: float | None = None
    eps: float | None = None
    report_every: int = 1
    snapshot_every: int = 0
    quadrature: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        bad = set(d) - known
        if bad:
            raise ConfigInvalid(f"unknown config keys: {sorted(bad)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if self.name not in NAMES:
            raise ConfigInvalid(f"unknown scenario {self.name!r}")
        p = {**DEFAULTS, **self.params}
        for k in PHYSICAL:
            if not float(p[k]) > 0:
                raise ConfigInvalid(f"{k} must be positive, got {p[k]}")
        if not self.dt > 0 or not self.t1 > self.t0:
            raise ConfigInvalid("need dt > 0 and t1 > t0")
        if self.delta is not None and not self.delta > 0:
            raise ConfigInvalid("delta must be positive")
        if self.eps is not None and not self.eps > 0:
            raise ConfigInvalid("eps must be positive")
        if self.grid < 8 or self.report_every < 1:
            raise ConfigInvalid("grid must be >= 8 and report_every >= 1")


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc


def prepare_out(out) -> str:
    try:
        os.makedirs(out, exist_ok=True)
        probe = os.path.join(out, ".write-test")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise IoError(f"output directory {out} is not writable: {exc}") from exc
    return out


def run(cfg: RunConfig, out: str) -> int:
    scn = make_scenario(cfg.name, cfg.params, cfg.seed, cfg.t0, cfg.t1, cfg.dt,
                        tol=DEFAULT.updated(cfg.tolerances))
    settings = QuadratureSettings(**{**cfg.quadrature, "box": scn.box})
    res = simulate(scn, settings, report_every=cfg.report_every, grid_n=cfg.grid,
                   snapshot_every=cfg.snapshot_every)
    series = np.array([[r.t, r.total] for r in res.reports])
    E0 = float(series[0, 1])
    eps = cfg.eps if cfg.eps is not None else default_eps(E0)
    dstar = delta_star(series, E0, eps)
    delta = cfg.delta if cfg.delta is not None else (dstar or 1.0)
    env = Envelope(E0, eps, delta)
    verdict = check_series(series, env)
    write_csv(os.path.join(out, "entropy.csv"),
              [(r, float(env.squared(r.t))) for r in res.reports])
    if res.snapshots:
        fields_dir = os.path.join(out, "fields")
        os.makedirs(fields_dir, exist_ok=True)
        for k, w in enumerate(res.snapshots):
            w.export(os.path.join(fields_dir, f"w_{k:05d}"))
    report = {**verdict.to_dict(), "delta_star": dstar, "delta": delta, "eps": eps, "E0": E0,
              "scenario": cfg.name, "seed": cfg.seed,
              "max_residuals": {k: float(v) for k, v in res.max_residuals.items()},
              "monitored": res.monitored}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    log.info("verdict %s, delta_star %.4g", "PASS" if verdict.passed else "FAIL", dstar)
    return 0 if verdict.passed else 2


def check(name_filter=None, zeta_fault=False, seed=0, stream=sys.stdout) -> int:
    from .checks import run_checks
    from .profiles import ZETA, Perturbed

    zeta = Perturbed(ZETA, 0.1) if zeta_fault else None
    results = run_checks(name_filter, zeta, seed)
    for r in results:
        stream.write(json.dumps({"module": r.module, "check": r.name, "pass": r.passed,
                                 "value": r.value, "tol": r.tol}) + "\n")
    return 0 if all(r.passed for r in results) else 2


def sweep(out: str, grid=512) -> int:
    from .checks import monitored_sweep, spread

    rows = monitored_sweep(grid_n=grid)
    spreads = {k: spread(rows, k) for k in ("height", "w", "grad_w")}
    ok = all(v <= 3.0 for v in spreads.values())
    with open(os.path.join(out, "sweep.json"), "w") as fh:
        json.dump({"rows": rows, "spread": spreads, "pass": ok}, fh, indent=2)
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relent", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="scenario config (JSON)")
    ap.add_argument("--out", default="relent-out", help="output directory")
    ap.add_argument("--mode", choices=("run", "check", "sweep"), default="run")
    ap.add_argument("--grid", type=int, help="compensation grid size N (N x N)")
    ap.add_argument("--delta", type=float, help="envelope time scale")
    ap.add_argument("--eps", type=float, help="envelope offset")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--filter", help="run only checks of this module or name")
    ap.add_argument("--inject-zeta-fault", action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.mode == "check":
            return check(args.filter, args.inject_zeta_fault, args.seed or 0)
        out = prepare_out(args.out)
        if args.mode == "sweep":
            return sweep(out, args.grid or 512)
        d = load_config(args.config)
        for key in ("grid", "delta", "eps", "seed"):
            if getattr(args, key) is not None:
                d[key] = getattr(args, key)
        return run(RunConfig.from_dict(d), out)
    except RelentError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
