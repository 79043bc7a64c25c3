"""Command-line entry points.

Subcommands: geometry, estimates, simulate-nsf, simulate-ob, compare, sweep.
Configs are JSON; outputs are CSV/JSON reports plus raw field dumps in the
shared binary format.  Exit codes: 0 success, 2 configuration problem,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import estimates
from .errors import HoleflowError, SolverError
from .geometry import ScalingParams, build_perforation
from .grids import Grid
from .harness import SweepConfig, sweep
from .nsf import NSFConfig, run_nsf
from .ob import OBConfig, run_ob
from .relenergy import gradient_energy, gronwall_certificate, rei_residual, \
    slack_budget
from .thermo import ThermoParams, linearization
from .traj import load_trajectory, nsf_trajectory, ob_trajectory, save_trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {p}: {exc}") from exc


class ConfigError(Exception):
    pass


def _outdir(ns) -> Path:
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_geometry(ns) -> int:
    raw = _load_config(ns.config)
    sc = ScalingParams(**raw["scaling"])
    L = raw.get("L", 1.0)
    geom = build_perforation(sc, L, placement_mode=raw.get("placement", "lattice"),
                             seed=raw.get("seed", 0))
    out = _outdir(ns)
    geom.export_json(out / "geometry.json")
    n = raw.get("resolution", 128)
    geom.export_mask(out / "mask.raw", Grid((n,) * sc.d, L / n))
    print(f"N = {geom.N} holes, radius {geom.hole_radius:.6g}, "
          f"mask {n}^{sc.d} -> {out}")
    return EXIT_OK


def cmd_estimates(ns) -> int:
    (g1, g2, g3), flags = estimates.gamma_exponents(ns.m, ns.alpha)
    ok = "OK" if all(flags) else "violated"
    print(f"gamma1={g1:.6g} gamma2={g2:.6g} gamma3={g3:.6g} positivity {ok}")
    out = Path(ns.out) if ns.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    if ns.grid:
        if out is None:
            raise ConfigError("--grid needs --out")
        ms = np.linspace(ns.m_range[0], ns.m_range[1], 10)
        alphas = np.linspace(ns.alpha_range[0], ns.alpha_range[1], 10)
        with open(out / "gamma_map.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "alpha", "gamma1", "gamma2", "gamma3", "all_positive"])
            for m in ms:
                for a in alphas:
                    (x1, x2, x3), fl = estimates.gamma_exponents(float(m), float(a))
                    w.writerow([repr(float(m)), repr(float(a)), repr(x1), repr(x2),
                                repr(x3), int(all(fl))])
        print(f"gamma map -> {out / 'gamma_map.csv'}")
    if ns.sweep:
        if out is None:
            raise ConfigError("--sweep needs --out")
        fits, rows = estimates.residual_sweep(ns.sweep_epsilons)
        estimates.write_residual_csv(out / "residual_terms.csv", rows)
        for term in estimates.RESIDUAL_TERMS:
            f = fits[term]
            print(f"{term}: decay exponent {f.exponent:+.3f} (r2={f.r2:.3f})")
        print(f"residual terms -> {out / 'residual_terms.csv'}")
    return EXIT_OK


def cmd_simulate_nsf(ns) -> int:
    raw = _load_config(ns.config)
    sc = ScalingParams(**raw["scaling"])
    th = ThermoParams(**raw.get("thermo", {}))
    keys = ("L", "resolution", "cfl", "eta_pen", "final_time", "g0",
            "amp_theta", "amp_u", "n_samples", "seed")
    cfg = NSFConfig(scaling=sc, thermo=th,
                    **{k: raw[k] for k in keys if k in raw})
    geom = None
    if raw.get("holes", True):
        geom = build_perforation(sc, cfg.L, placement_mode=raw.get("placement", "lattice"),
                                 seed=raw.get("seed", 0))
    out = _outdir(ns)
    try:
        result = run_nsf(cfg, geom)
    except SolverError as exc:
        if exc.state is not None:  # leave the failing fields on disk for autopsy
            from .grids import save_raw
            grid = cfg.grid()
            save_raw(out / "failed_rho.raw", exc.state.rho, grid.spacing, grid.origin)
            save_raw(out / "failed_theta.raw", exc.state.theta, grid.spacing, grid.origin)
            print(f"state dump at t={exc.state.t:.6g} -> {out}", file=sys.stderr)
        raise
    traj = nsf_trajectory(result, sc.mach, th.theta_bar)
    save_trajectory(out, traj, extra_manifest={
        "diagnostics": result.diagnostics,
        "config": raw,
        "N_holes": 0 if geom is None else geom.N,
    })
    print(f"{len(traj.times)} samples -> {out}; "
          f"mass drift {abs(result.diagnostics['mass'][-1] - result.diagnostics['mass'][0]):.3e}, "
          f"min entropy production {min(result.diagnostics['entropy_production']):.3e}")
    return EXIT_OK


def cmd_simulate_ob(ns) -> int:
    raw = _load_config(ns.config)
    keys = ("rho_bar", "theta_bar", "A", "c_p", "mu", "kappa", "L", "resolution",
            "d", "final_time", "g0", "cfl", "rk2", "n_samples", "manufactured")
    cfg = OBConfig(**{k: raw[k] for k in keys if k in raw})
    result = run_ob(cfg)
    out = _outdir(ns)
    traj = ob_trajectory(result)
    save_trajectory(out, traj, extra_manifest={
        "diagnostics": result.diagnostics, "config": raw})
    print(f"{len(traj.times)} samples -> {out}; "
          f"max divergence {max(result.diagnostics['max_div']):.3e}")
    return EXIT_OK


def cmd_compare(ns) -> int:
    weak = load_trajectory(ns.weak)
    strong = load_trajectory(ns.strong)
    raw = _load_config(ns.config) if ns.config else {}
    th = ThermoParams(**raw.get("thermo", {}))
    co = linearization(th)
    from .thermo import transport
    mu, _, kappa = transport(th.theta_bar, th)
    rep = rei_residual(weak, strong, co, float(mu), float(kappa),
                       th.rho_bar, th.theta_bar)
    slack = slack_budget(weak.grid, gradient_energy=gradient_energy(weak))
    cert = gronwall_certificate(rep.times, rep.E_series, rep.c_series, slack)
    verdict = "PASS" if cert.certificate else "FAIL"
    print(f"certificate {verdict}: margin {cert.margin:.3e} at slack {cert.slack:.3e}; "
          f"max residual {max(rep.residuals):.3e}")
    if ns.out:
        out = _outdir(ns)
        cert.to_json(out / "certificate.json")
        with open(out / "rei_residual.json", "w") as fh:
            json.dump({"times": rep.times, "residuals": rep.residuals,
                       "defect_mass": rep.defect_mass}, fh, indent=1)
        print(f"reports -> {out}")
    return EXIT_OK if cert.certificate else EXIT_NUMERICAL


def cmd_sweep(ns) -> int:
    raw = _load_config(ns.config)
    cfg = SweepConfig.from_dict(raw)
    report = sweep(cfg)
    out = _outdir(ns)
    report.to_csv(out / "sweep.csv")
    report.to_json(out / "sweep.json")
    for row in report.rows:
        print(f"eps={row['epsilon']}: status={row['status']} "
              f"velocity_gap={row['velocity_gap']} temperature_gap={row['temperature_gap']}")
    print(f"monotonicity: {report.monotonicity}")
    print(f"reports -> {out}")
    if any(r["status"] != "ok" for r in report.rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holeflow",
                                description="perforated-domain low-Mach laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geometry", help="build a perforation and dump mask + JSON")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_geometry)

    e = sub.add_parser("estimates", help="decay exponents and remainder-term sweeps")
    e.add_argument("--m", type=float, required=True)
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--grid", action="store_true", help="emit a 10x10 gamma map CSV")
    e.add_argument("--m-range", nargs=2, type=float, default=(3.2, 6.0))
    e.add_argument("--alpha-range", nargs=2, type=float, default=(2.5, 5.5))
    e.add_argument("--sweep", action="store_true",
                   help="run the synthetic remainder-term sweep")
    e.add_argument("--sweep-epsilons", nargs="+", type=float,
                   default=(0.5, 0.35, 0.25, 0.18))
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimates)

    n = sub.add_parser("simulate-nsf", help="run the compressible solver")
    n.add_argument("--config", required=True)
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_simulate_nsf)

    o = sub.add_parser("simulate-ob", help="run the incompressible buoyancy solver")
    o.add_argument("--config", required=True)
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_simulate_ob)

    c = sub.add_parser("compare", help="relative-energy certificate of two runs")
    c.add_argument("--weak", required=True)
    c.add_argument("--strong", required=True)
    c.add_argument("--config", help="thermo parameters for the coefficients")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="end-to-end eps sweep with reports")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HoleflowError as exc:
        # solver breakdowns, unattainable fits/resolutions, bad perforations
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
