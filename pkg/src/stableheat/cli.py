"""Configuration-driven entry point.

Flat key-value config files with section dots (``mc.paths=200000``), per-key
overrides via ``--set``, subcommands for the estimators and suites, and
deterministic report emission.  Exit codes: 0 pass, 1 fail, 2 inconclusive,
3 error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import _streams, verify
from .duhamel import conservativeness_check, fit_c4, free_kernel, series_term
from .geometry import parse_domain
from .kato import parse_drift, scale_amplitude
from .mc_engine import PathConfig, green_occupation, kernel_kde_grid, simulate_killed, write_path_records
from .stable_core import make_law

__all__ = ["ExperimentConfig", "parse_config", "run", "sweep", "main"]

_DEFAULT_OUT = os.environ.get("STABLEHEAT_OUT", "out")


@dataclass
class ExperimentConfig:
    alpha: float = 1.5
    dim: int = 2
    drift: str = "zero"
    domain: str = "ball:1"
    suite: str = ""
    op: str = ""
    seed: int = 20240801
    out: str = _DEFAULT_OUT
    gate_b0: bool = True
    grid_t: tuple = (0.05, 0.1, 0.2, 0.4, 0.7, 1.0)
    grid_lambdas: tuple = (0.5, 2.0)
    grid_radii: tuple = (0.05, 0.1, 0.2, 0.4)
    grid_x: tuple = ()
    grid_y: tuple = ()
    mc_paths: int = 50000
    mc_dt: float = 0.0
    mc_steps: int = 2048
    mc_workers: int = 1
    mc_antithetic: bool = False
    mc_horizon: float = 0.0
    tol_spread_cap: float = 50.0
    tol_spearman: float = 0.9
    tol_large_time_cap: float = 10.0
    bhp_r: float = 0.3
    n_triples: int = 100000
    t: float = 0.25
    x: tuple = ()
    y: tuple = ()
    k: int = 1

    def validate(self) -> "ExperimentConfig":
        if not (1.0 < self.alpha < 2.0):
            raise ValueError("alpha must lie in (1,2)")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.suite and self.op:
            raise ValueError("set either suite or op, not both")
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            key = _FIELD_TO_KEY[f.name]
            if isinstance(v, tuple):
                v = ",".join(repr(float(u)) for u in v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


_FIELD_TO_KEY = {
    "alpha": "alpha", "dim": "dim", "drift": "drift", "domain": "domain",
    "suite": "suite", "op": "op", "seed": "seed", "out": "out",
    "gate_b0": "gate_b0",
    "grid_t": "grid.t", "grid_lambdas": "grid.lambdas", "grid_radii": "grid.radii",
    "grid_x": "grid.x", "grid_y": "grid.y",
    "mc_paths": "mc.paths", "mc_dt": "mc.dt", "mc_steps": "mc.steps",
    "mc_workers": "mc.workers", "mc_antithetic": "mc.antithetic",
    "mc_horizon": "mc.horizon",
    "tol_spread_cap": "tol.spread_cap", "tol_spearman": "tol.spearman",
    "tol_large_time_cap": "tol.large_time_cap",
    "bhp_r": "bhp.r", "n_triples": "n_triples",
    "t": "t", "x": "x", "y": "y", "k": "k",
}
_KEY_TO_FIELD = {v: k for k, v in _FIELD_TO_KEY.items()}


def _coerce(field_name: str, raw: str):
    proto = ExperimentConfig.__dataclass_fields__[field_name].default
    raw = raw.strip()
    if isinstance(proto, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean {raw!r} for {field_name}")
    if isinstance(proto, int):
        return int(raw)
    if isinstance(proto, float):
        return float(raw)
    if isinstance(proto, tuple):
        if not raw:
            return ()
        return tuple(float(s) for s in raw.split(","))
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse the key-value format; unknown keys rejected with location info."""
    cfg = ExperimentConfig()
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _KEY_TO_FIELD:
            raise ValueError(f"line {ln}: unknown key {key!r}")
        fname = _KEY_TO_FIELD[key]
        try:
            setattr(cfg, fname, _coerce(fname, raw))
        except ValueError as e:
            raise ValueError(f"line {ln}, key {key!r}: {e}") from None
    return cfg.validate()


def _path_config(cfg: ExperimentConfig, horizon: float) -> PathConfig:
    dt = cfg.mc_dt if cfg.mc_dt > 0 else horizon / cfg.mc_steps
    steps = int(np.ceil(horizon / dt + 1e-9))
    return PathConfig(dt=dt, max_steps=steps, seed=cfg.seed,
                      workers=cfg.mc_workers, antithetic=cfg.mc_antithetic)


def _emit(out_root: str, name: str, payload: dict, cells: list) -> dict:
    rep = verify.SuiteReport(name, payload.get("theorem_ref", "n/a"),
                             payload.get("config", {}),
                             statistics=payload.get("statistics", {}),
                             verdict=payload.get("verdict", "pass"), cells=cells)
    return verify.write_report(rep, out_root)


def _run_suite(cfg: ExperimentConfig):
    law = make_law(cfg.alpha, cfg.dim)
    dom = parse_domain(cfg.domain, cfg.dim)
    b = parse_drift(cfg.drift, cfg.dim)
    name = cfg.suite
    if name not in verify.SUITES:
        raise KeyError(
            f"unknown suite {name!r}; valid: {', '.join(sorted(verify.SUITES))}"
        )
    horizon = cfg.mc_horizon if cfg.mc_horizon > 0 else max(
        max(cfg.grid_t, default=1.0), 8.0 * (dom.diameter / 2.0) ** cfg.alpha
    )
    pc = _path_config(cfg, horizon)
    if name == "heat-two-sided":
        rep = verify.suite_heat_two_sided(
            b, dom, law, cfg.grid_t, pc, n_paths=cfg.mc_paths,
            spread_cap=cfg.tol_spread_cap, spearman_min=cfg.tol_spearman)
    elif name == "green-two-sided":
        rep = verify.suite_green_two_sided(
            b, dom, law, pc, n_paths=cfg.mc_paths, spread_cap=cfg.tol_spread_cap)
    elif name == "small-ball-factor2":
        rep = verify.suite_small_ball_factor2(b, law, cfg.grid_radii, pc)
    elif name == "three-g":
        rep = verify.suite_three_g(dom, law, cfg.n_triples, pc)
    elif name == "bhp":
        rng = _streams.stream(cfg.seed, _streams.TAG_PROBES, 99)
        z = dom.boundary_points(1, rng)[0]
        rep = verify.suite_bhp(b, dom, law, z, cfg.bhp_r, pc, n_paths=cfg.mc_paths)
    elif name == "large-time":
        rep = verify.suite_large_time(b, dom, law, pc, n_paths=cfg.mc_paths,
                                      spread_cap=cfg.tol_large_time_cap)
    elif name == "scaling":
        rep = verify.suite_scaling(b, dom, law, cfg.grid_lambdas, pc,
                                   n_paths=cfg.mc_paths, t_grid=cfg.grid_t[:3])
    elif name == "splitting-diagnostics":
        rep = verify.suite_splitting_diagnostics(b, law, pc, t=cfg.t,
                                                 n_paths=cfg.mc_paths)
    else:  # pragma: no cover - guarded above
        raise KeyError(name)
    rep.config["resolved"] = {k: getattr(cfg, k) for k in ("alpha", "dim", "drift",
                                                           "domain", "seed")}
    return rep


def _run_op(cfg: ExperimentConfig):
    law = make_law(cfg.alpha, cfg.dim)
    b = parse_drift(cfg.drift, cfg.dim)
    rng = _streams.stream(cfg.seed, _streams.TAG_SERIES, 42)
    x = np.asarray(cfg.x if cfg.x else np.zeros(cfg.dim), dtype=float)
    y = np.asarray(cfg.y if cfg.y else np.r_[1.0, np.zeros(cfg.dim - 1)], dtype=float)
    cells = []
    stats = {}
    if cfg.op == "free-kernel":
        fk = free_kernel(b, law, cfg.t, x, y, rng)
        stats = dict(value=fk.value, stderr=fk.stderr, bound=fk.truncation_bound,
                     method=fk.method)
        cells = [dict(t=cfg.t, x=list(x), y=list(y), estimate=fk.value,
                      stderr=fk.stderr)]
    elif cfg.op == "series":
        c4, flagged = fit_c4(b, law, (cfg.t,), rng)
        for k in range(cfg.k + 1):
            tk = series_term(b, law, cfg.t, x, y, k, rng)
            cells.append(dict(k=k, estimate=tk.value, stderr=tk.stderr))
        stats = dict(fitted_c4=c4, degenerate=flagged)
    elif cfg.op == "conservativeness":
        mass, se = conservativeness_check(b, law, cfg.t, x, rng)
        stats = dict(mass=mass, stderr=se)
        cells = [dict(t=cfg.t, estimate=mass, stderr=se)]
    elif cfg.op == "simulate":
        dom = parse_domain(cfg.domain, cfg.dim)
        horizon = cfg.mc_horizon if cfg.mc_horizon > 0 else cfg.t
        pc = _path_config(cfg, horizon)
        recs = simulate_killed(b, law, dom, x, horizon, pc, n_paths=cfg.mc_paths)
        out = os.path.join(cfg.out, "paths.csv")
        os.makedirs(cfg.out, exist_ok=True)
        write_path_records(recs, out, x0=x)
        taus = np.array([r.tau for r in np.atleast_1d(recs)])
        stats = dict(mean_exit=float(taus.mean()), paths=out)
    elif cfg.op == "domain-kernel":
        dom = parse_domain(cfg.domain, cfg.dim)
        pc = _path_config(cfg, max(cfg.grid_t))
        ests = kernel_kde_grid(b, law, dom, list(cfg.grid_t), x, y[None, :],
                               pc, cfg.mc_paths)
        for t in sorted(ests):
            e = ests[t][0]
            cells.append(dict(t=t, estimate=e.value, stderr=e.stderr))
    elif cfg.op == "green":
        dom = parse_domain(cfg.domain, cfg.dim)
        horizon = cfg.mc_horizon if cfg.mc_horizon > 0 else 10.0 * (dom.diameter / 2.0) ** cfg.alpha
        pc = _path_config(cfg, horizon)
        ests, refine, censored = green_occupation(b, law, dom, x, y[None, :],
                                                  pc, cfg.mc_paths)
        cells = [dict(estimate=ests[0].value, stderr=ests[0].stderr,
                      refine=refine[0], censored=censored)]
        stats = dict(value=ests[0].value, stderr=ests[0].stderr)
    else:
        raise KeyError(
            f"unknown op {cfg.op!r}; valid: free-kernel, series, conservativeness, "
            "simulate, domain-kernel, green"
        )
    return stats, cells


_EXIT = {"pass": 0, "fail": 1, "inconclusive": 2}


def run(cfg: ExperimentConfig) -> tuple[int, dict]:
    """Dispatch a config; returns (exit status, artifact paths)."""
    try:
        if cfg.suite:
            if cfg.gate_b0 and cfg.drift != "zero":
                import dataclasses

                gate = dataclasses.replace(cfg, drift="zero", gate_b0=False)
                status, _ = run(gate)
                if status != 0:
                    return status, {}
            rep = _run_suite(cfg)
            paths = verify.write_report(rep, cfg.out)
            return _EXIT[rep.verdict], paths
        if cfg.op:
            stats, cells = _run_op(cfg)
            paths = _emit(cfg.out, cfg.op, dict(statistics=stats, config=dict(
                alpha=cfg.alpha, dim=cfg.dim, drift=cfg.drift, seed=cfg.seed)), cells)
            return 0, paths
        raise ValueError("config must set suite=<name> or op=<name>")
    except Exception as exc:  # noqa: BLE001 - mapped to exit status per contract
        sys.stderr.write(f"error: {exc}\n")
        return 3, {"error": str(exc)}


def sweep(cfg: ExperimentConfig, axis: str, values) -> tuple[int, list]:
    """Run the base config across values of one axis, aggregating verdicts."""
    import dataclasses

    if axis not in ("alpha", "drift-amplitude", "radius", "lambda", "t"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ValueError("empty sweep value list")
    rows = []
    worst = 0
    for v in values:
        v = float(v)
        sub = dataclasses.replace(cfg)
        if axis == "alpha":
            sub.alpha = v
        elif axis == "drift-amplitude":
            base = parse_drift(cfg.drift, cfg.dim)
            if base.magnitude_bound in (None, 0.0):
                raise ValueError("drift-amplitude sweep needs a bounded nonzero drift")
            factor = v / base.magnitude_bound
            sub.drift = scale_amplitude(base, factor).descriptor
        elif axis == "radius":
            sub.grid_radii = (v,)
        elif axis == "lambda":
            sub.grid_lambdas = (v,)
        elif axis == "t":
            sub.t = v
            sub.grid_t = (v,)
        status, paths = run(sub)
        worst = max(worst, status if status != 2 else 0)
        row = dict(axis=axis, value=v, status=status, **paths)
        if status == 2:
            row["note"] = "inconclusive"
        rows.append(row)
    return worst, rows


def _apply_overrides(cfg: ExperimentConfig, pairs) -> ExperimentConfig:
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in _KEY_TO_FIELD:
            raise ValueError(f"unknown key {key!r}")
        setattr(cfg, _KEY_TO_FIELD[key], _coerce(_KEY_TO_FIELD[key], raw))
    return cfg.validate()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stableheat",
        description="drifted stable heat kernels: estimators and verification suites",
    )
    parser.add_argument("--config", help="key-value config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key")
    sub = parser.add_subparsers(dest="command")
    for name in ("free-kernel", "series", "conservativeness", "simulate",
                 "domain-kernel", "green"):
        sub.add_parser(name)
    vp = sub.add_parser("verify")
    vp.add_argument("suite", choices=sorted(verify.SUITES))
    sp = sub.add_parser("sweep")
    sp.add_argument("axis")
    sp.add_argument("values", help="comma-separated values")
    args = parser.parse_args(argv)

    try:
        cfg = ExperimentConfig()
        if args.config:
            with open(args.config) as fh:
                cfg = parse_config(fh.read())
        cfg = _apply_overrides(cfg, args.set)
        if args.command == "verify":
            cfg.suite = args.suite
            cfg.op = ""
        elif args.command == "sweep":
            status, rows = sweep(cfg, args.axis,
                                 [float(s) for s in args.values.split(",") if s])
            os.makedirs(cfg.out, exist_ok=True)
            path = os.path.join(cfg.out, "sweep.json")
            with open(path, "w") as fh:
                json.dump(rows, fh, indent=1, sort_keys=True)
            print(path)
            return status
        elif args.command:
            cfg.op = args.command
            cfg.suite = ""
        cfg.validate()
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(f"error: {exc}\n")
        return 3

    status, paths = run(cfg)
    for k, v in paths.items():
        print(f"{k}: {v}")
    return status


if __name__ == "__main__":
    sys.exit(main())
