"""Acceptance gate: one test per criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; every tolerance below is fixed here, not calibrated elsewhere.
"""

import time

import numpy as np
import pytest

from holeflow import estimates as es
from holeflow import geometry as ge
from holeflow import harness, nsf, ob
from holeflow import operators as op
from holeflow import relenergy as re_
from holeflow import thermo as th
from holeflow.grids import Grid, GridField, mac_from_stream
from holeflow.thermo import ThermoParams, linearization
from holeflow.traj import ob_trajectory


def report(name, **facts):
    detail = " ".join(f"{k}={v}" for k, v in facts.items())
    print(f"[PASS] {name}: {detail}")


def test_c01_thermo_hypothesis_suite():
    t0 = time.time()
    Z = np.logspace(-3, 3, 500)
    P, dP, _, _ = th.eval_P(Z, with_S=False)
    assert th.eval_P(0.0, with_S=False)[0] == 0.0
    assert np.all(dP > 0)
    ratio = (5.0 / 3.0 * P - dP * Z) / Z
    worst_ratio = float(np.max(np.abs(ratio - 2.0 / 3.0)))
    assert worst_ratio <= 1e-12

    params = ThermoParams(a_rad=1e-3)
    grid = np.linspace(0.1, 10.0, 32)
    worst = 0.0
    for rho in grid:
        for theta in grid:
            h1 = 1e-6 * max(1.0, theta)
            ds_dt = (float(th.entropy(rho, theta + h1, params))
                     - float(th.entropy(rho, theta - h1, params))) / (2 * h1)
            de_dt = (float(th.internal_energy(rho, theta + h1, params))
                     - float(th.internal_energy(rho, theta - h1, params))) / (2 * h1)
            rel = abs(theta * ds_dt - de_dt) / max(1.0, abs(de_dt))
            worst = max(worst, rel)
            h2 = 1e-6 * max(1.0, rho)
            ds_dr = (float(th.entropy(rho + h2, theta, params))
                     - float(th.entropy(rho - h2, theta, params))) / (2 * h2)
            de_dr = (float(th.internal_energy(rho + h2, theta, params))
                     - float(th.internal_energy(rho - h2, theta, params))) / (2 * h2)
            rhs = de_dr - float(th.pressure(rho, theta, params)) / rho ** 2
            worst = max(worst, abs(theta * ds_dr - rhs) / max(1.0, abs(rhs)))
    assert worst < 1e-8
    elapsed = time.time() - t0
    assert elapsed < 1.0
    report("thermo hypothesis suite", ratio_err=f"{worst_ratio:.2e}",
           gibbs_err=f"{worst:.2e}", runtime=f"{elapsed:.2f}s")


def test_c02_linearization_values():
    t0 = time.time()
    co = linearization(ThermoParams(a_rad=0.0))  # raises if FD deviates > 1e-7
    assert co.A == pytest.approx(0.375, abs=1e-12)
    assert co.c_p == pytest.approx(1.875, abs=1e-12)
    elapsed = time.time() - t0
    assert elapsed < 1.0
    report("linearization values", A=co.A, c_p=co.c_p, runtime=f"{elapsed:.2f}s")


def test_c03_gamma_calculator():
    t0 = time.time()
    (g1, g2, g3), flags = es.gamma_exponents(4.0, 3.5)
    assert abs(g1 - 0.0882353) < 1e-6
    assert abs(g2 - 3.75) < 1e-6
    assert abs(g3 - 0.25) < 1e-6
    assert all(flags)
    for m in np.linspace(0.5, 8.0, 10):
        for alpha in np.linspace(0.5, 7.5, 10):
            _, fl = es.gamma_exponents(float(m), float(alpha))
            assert all(fl) == (3.0 < alpha < m)
    elapsed = time.time() - t0
    assert elapsed < 1.0
    report("gamma calculator", gammas=(round(g1, 7), g2, g3),
           runtime=f"{elapsed:.2f}s")


def test_c04_cutoff_scaling():
    t0 = time.time()
    alpha = 3.2
    eps = [2.0 ** (-k) for k in range(1, 5)]
    grads = [ge.theory_cutoff_norms(e, alpha, 2.0, d=3)[1] for e in eps]
    slope = float(np.polyfit(np.log(eps), np.log(grads), 1)[0])
    target = 3.0 * (alpha - 1.0) / 2.0 - alpha
    assert abs(slope - target) < 0.1
    elapsed = time.time() - t0
    assert elapsed < 10.0
    report("cutoff gradient scaling", fitted=f"{slope:.4f}",
           target=f"{target:.4f}", runtime=f"{elapsed:.2f}s")


def test_c05_operator_suite():
    t0 = time.time()
    geom = ge.build_perforation(ge.ScalingParams(0.4, 2.2, 3.0, d=2), 1.0)
    h_req = ge.required_cutoff_spacing(geom.scaling)
    n = int(np.ceil(1.0 / h_req / 32.0) * 32)
    grid = Grid((n, n), 1.0 / n)
    PX, PY = grid.corner_mesh()
    psi = np.sin(2 * np.pi * PX) * np.sin(2 * np.pi * PY) / (2.0 * np.pi)
    R = op.restrict(mac_from_stream(psi, grid), geom)
    div = float(np.max(np.abs(R.divergence())))
    assert div < 1e-12
    mask = geom.classify(grid) == 1
    u, v = R.faces
    hole_max = max(np.max(np.abs(u[:-1][mask])), np.max(np.abs(u[1:][mask])),
                   np.max(np.abs(v[:, :-1][mask])), np.max(np.abs(v[:, 1:][mask])))
    assert hole_max == 0.0

    cgrid = Grid((256, 256), 1.0 / 256)
    cmask = geom.classify(cgrid) == 1
    const_err = float(np.max(np.abs(
        op.extend(GridField(cgrid, np.full(cgrid.dims, 7.0)), cmask).data - 7.0)))
    X, _ = cgrid.center_mesh()
    lin = 3.0 * X + 0.5
    lin_err = float(np.max(np.abs(
        op.extend(GridField(cgrid, np.where(cmask, 0.0, lin)), cmask).data - lin)))
    assert const_err < 1e-10 and lin_err < 1e-10

    ratios = []
    for eps in (0.45, 0.38, 0.3, 0.24):
        g = ge.build_perforation(ge.ScalingParams(eps, 2.2, 3.0, d=2), 1.0)
        m = g.classify(cgrid) == 1
        Xc, Yc = cgrid.center_mesh()
        f = np.sin(2 * np.pi * Xc) * np.cos(np.pi * Yc) + 0.5
        fld = GridField(cgrid, np.where(m, 0.0, f))
        ratios.append(op.extension_norm_ratio(fld, op.extend(fld, m), m))
    assert max(ratios) / min(ratios) < 3.0
    elapsed = time.time() - t0
    assert elapsed < 60.0
    report("operator suite", div=f"{div:.2e}", hole_max=hole_max,
           ext_err=f"{max(const_err, lin_err):.2e}",
           ratio_spread=f"{max(ratios) / min(ratios):.3f}",
           runtime=f"{elapsed:.1f}s")


def test_c06_defect_proxy_identities():
    t0 = time.time()
    rng = np.random.default_rng(123)
    grid = Grid((32, 32), 1.0 / 32)
    worst_eig = 0.0
    worst_trace = 0.0
    for _ in range(100):
        u = rng.normal(size=(32, 32, 2))
        p = re_.defect_proxies(u, grid, delta=4.0 / 32)
        worst_eig = min(worst_eig, p.min_eigenvalue())
        tr = np.trace(p.R_field, axis1=-2, axis2=-1)
        worst_trace = max(worst_trace, float(np.max(np.abs(tr - 2.0 * p.E_field))))
    assert worst_eig >= -1e-12
    assert worst_trace == 0.0
    elapsed = time.time() - t0
    assert elapsed < 5.0
    report("defect proxy identities", eig_floor=f"{worst_eig:.2e}",
           trace_gap=worst_trace, runtime=f"{elapsed:.1f}s")


def test_c07_ob_manufactured_convergence():
    t0 = time.time()
    study = ob.convergence_study([64, 128, 256],
                                 ob.OBConfig(final_time=0.5, manufactured=True,
                                             g0=1.0))
    for o in study["orders_u"] + study["orders_theta"]:
        assert 1.7 <= o <= 2.3

    cfg = ob.OBConfig(resolution=64, final_time=0.4, g0=0.0, n_samples=17)
    grid = cfg.grid()
    PX, PY = grid.corner_mesh()
    U0 = mac_from_stream(0.3 * np.sin(np.pi * PX) ** 2 * np.sin(np.pi * PY) ** 2, grid)
    X, Y = grid.center_mesh()
    res = ob.run_ob(cfg, U0=U0, Theta0=0.3 * np.cos(np.pi * X) * np.cos(np.pi * Y))
    E = res.diagnostics["energy"]
    assert all(E[i + 1] <= E[i] + 1e-14 for i in range(len(E) - 1))
    elapsed = time.time() - t0
    assert elapsed < 300.0
    report("incompressible manufactured convergence",
           orders_u=[round(o, 3) for o in study["orders_u"]],
           orders_theta=[round(o, 3) for o in study["orders_theta"]],
           energy_monotone=True, runtime=f"{elapsed:.0f}s")


def test_c08_nsf_invariants():
    t0 = time.time()
    sc = ge.ScalingParams(0.4, 2.0, 1.0, d=2)
    thermo = ThermoParams(mu0=0.01, eta0=0.0, kappa0=0.01, a_rad=1e-3)
    geom = ge.build_perforation(sc, 4.0)
    cfg = nsf.NSFConfig(scaling=sc, thermo=thermo, L=4.0, resolution=128,
                        final_time=0.25, g0=1.0, amp_theta=0.1, amp_u=0.1,
                        n_samples=6)
    res = nsf.run_nsf(cfg, geom)
    mass = res.diagnostics["mass"]
    mass_drift = abs(mass[-1] - mass[0]) / abs(mass[0])
    assert mass_drift <= 1e-12
    entropy_min = min(res.diagnostics["entropy_production"])
    assert entropy_min >= -1e-14
    hole_speed = max(res.diagnostics["max_hole_speed"])
    assert hole_speed <= 1e-6

    fp_cfg = nsf.NSFConfig(scaling=sc, thermo=thermo, L=1.0, resolution=64,
                           final_time=0.05, g0=0.0, amp_theta=0.0, amp_u=0.0,
                           n_samples=3)
    fp = nsf.run_nsf(fp_cfg)
    st = fp.states[-1]
    assert np.max(np.abs(st.rho - thermo.rho_bar)) == 0.0
    assert np.max(np.abs(st.theta - thermo.theta_bar)) == 0.0
    assert st.u.max_abs() == 0.0
    elapsed = time.time() - t0
    assert elapsed < 120.0
    report("compressible invariants", mass_drift=f"{mass_drift:.2e}",
           entropy_min=f"{entropy_min:.2e}", hole_speed=f"{hole_speed:.2e}",
           fixed_point="exact", runtime=f"{elapsed:.0f}s")


def test_c09_weak_strong_certificate():
    t0 = time.time()
    cfg = ob.OBConfig(resolution=128, final_time=0.4, manufactured=True, g0=1.0)
    res = ob.run_ob(cfg)
    weak = ob_trajectory(res)
    exact = [ob.manufactured_exact(t, cfg) for t in weak.times]
    strong = re_.Trajectory(weak.grid, list(weak.times),
                            [U.to_cell_vector() for U, _ in exact],
                            [T for _, T in exact])
    co = linearization(ThermoParams(a_rad=0.0))
    rep = re_.rei_residual(weak, strong, co, cfg.mu, cfg.kappa)
    slack = re_.slack_budget(weak.grid, gradient_energy=re_.gradient_energy(weak))
    cert = re_.gronwall_certificate(rep.times, rep.E_series, rep.c_series, slack)
    assert cert.certificate
    assert cert.margin > 0.0
    # identical data: E(0) = 0 reproduces E == 0 within slack along the run
    assert rep.E_series[0] == 0.0
    assert max(rep.E_series) <= slack
    elapsed = time.time() - t0
    assert elapsed < 300.0
    report("weak-strong certificate", margin=f"{cert.margin:.3e}",
           slack=f"{cert.slack:.3e}", E_max=f"{max(rep.E_series):.3e}",
           runtime=f"{elapsed:.0f}s")


def test_c10_end_to_end_sweep():
    t0 = time.time()
    cfg = harness.SweepConfig(epsilons=[0.5, 0.4, 0.3], resolution=256)
    rep = harness.sweep(cfg)
    assert all(r["status"] == "ok" for r in rep.rows)
    assert rep.monotonicity["velocity_gap_decreasing"]
    assert rep.monotonicity["temperature_gap_decreasing"]
    assert rep.monotonicity["boussinesq_residual_decreasing"]
    for row in rep.rows:
        assert row["measure_res_max"] == 0.0
        assert row["measure_holes"] == pytest.approx(
            row["measure_holes_analytic"], rel=0.02)
    elapsed = time.time() - t0
    assert elapsed < 600.0
    report("end-to-end sweep",
           velocity_gaps=[round(r["velocity_gap"], 5) for r in rep.rows],
           temperature_gaps=[round(r["temperature_gap"], 5) for r in rep.rows],
           boussinesq=[round(r["boussinesq_residual"], 5) for r in rep.rows],
           runtime=f"{elapsed:.0f}s")


def test_c11_estimates_track():
    t0 = time.time()
    fits, _ = es.residual_sweep([0.5, 0.35, 0.25, 0.18])
    for term, fitres in fits.items():
        # decay bounded away from flat: exponent of value ~ eps^p with p > 0.05
        # (equivalently, slope < -0.05 against ln(1/eps))
        assert fitres.exponent > 0.05, term
        assert fitres.r2 > 0.8, term
    elapsed = time.time() - t0
    assert elapsed < 120.0
    report("estimates track",
           exponents={t_: round(f.exponent, 2) for t_, f in fits.items()},
           min_r2=round(min(f.r2 for f in fits.values()), 3),
           runtime=f"{elapsed:.0f}s")
