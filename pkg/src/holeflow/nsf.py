"""Finite-volume solver for the scaled compressible heat-conducting system.

Continuity, momentum, and internal energy balance on [0, L]^d with the
pressure gradient amplified by Ma^-2 = eps^{-2m} and the potential force by
Ma^-1 = eps^{-m}:

    d_t rho + div(rho u) = 0
    d_t(rho u) + div(rho u x u) + eps^{-2m} grad p = div S + eps^{-m} rho grad G
    d_t(rho e) + div(rho e u) + div q = Q

Layout: rho, theta at cell centers, velocity on staggered faces.  Scalar
transport uses central fluxes with Rusanov dissipation at the scaled
acoustic speed; momentum advection is central with velocity-scale upwinding;
the pressure gradient is a plain face difference (no odd-even mode on the
staggered mesh).  Obstacles are enforced two ways: faces touching a hole
cell carry no scalar flux (walls for mass/heat), and the implicit Brinkman
drag u <- u / (1 + dt chi / eta_pen) pins the velocity there.

The heat source Q is the exact complement of the discrete kinetic-energy
change net of the work done by the potential force, so the total energy

    integral( eps^{2m}/2 rho |u|^2 + rho e - eps^m rho G )

is conserved to round-off on wall-only domains: numerical dissipation of
kinetic energy reappears as heat instead of leaking.  The entropy production
rate (1/theta)[eps^{2m} S : grad u + kappa |grad theta|^2 / theta] is a sum
of squares and is reported as a nonnegative diagnostic at every sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .geometry import PerforatedGeometry, ScalingParams
from .grids import Grid, MACField, axslice, mac_from_stream, midpoint_avg, \
    pad_mirror, pad_noslip
from .operators import ess_res_split
from .thermo import ThermoParams, internal_energy, pressure, \
    pressure_derivatives, sound_speed_sq, transport

MAX_DT_RETRIES = 12


@dataclass
class NSFConfig:
    scaling: ScalingParams
    thermo: ThermoParams
    L: float = 1.0
    resolution: int = 128
    cfl: float = 0.4
    eta_pen: float = 1e-8
    final_time: float = 0.25
    g0: float = 1.0                 # amplitude of the zero-mean potential G = g0 (x1 - L/2)/L
    amp_theta: float = 0.1          # first-order temperature perturbation amplitude
    amp_u: float = 0.1              # initial velocity amplitude
    n_samples: int = 11
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ValueError("CFL must lie in (0, 1)")
        if self.eta_pen <= 0 or self.final_time <= 0:
            raise ValueError("eta_pen and final_time must be positive")

    def grid(self) -> Grid:
        d = self.scaling.d
        return Grid((self.resolution,) * d, self.L / self.resolution)


@dataclass
class NSFState:
    rho: np.ndarray            # cells
    u: MACField                # staggered velocity
    theta: np.ndarray          # cells
    t: float = 0.0
    step: int = 0

    def copy(self) -> "NSFState":
        return NSFState(self.rho.copy(), self.u.copy(), self.theta.copy(),
                        self.t, self.step)


def potential(grid: Grid, g0: float, L: float) -> np.ndarray:
    """G = g0 (x1 - L/2)/L, discretely zero-mean by symmetry (mean subtracted anyway)."""
    x = grid.center_mesh()[0]
    G = g0 * (x - 0.5 * L) / L
    return G - float(np.mean(G))


def init_well_prepared(config: NSFConfig, geom: PerforatedGeometry | None = None) -> NSFState:
    """Initial data with the static pressure balance built in.

    theta1 is a zero-mean cosine bump compatible with insulated walls; the
    density perturbation is slaved to it through
    dp_drho rho1 + dp_dtheta theta1 = rho_bar G, so the balance holds to
    round-off.  The initial velocity is a small solenoidal field vanishing on
    walls, flattened to vanish on the obstacles when holes are present;
    three-dimensional runs start from rest.
    """
    grid = config.grid()
    th = config.thermo
    mesh = grid.center_mesh()
    L = config.L

    theta1 = config.amp_theta * np.cos(np.pi * mesh[0] / L) * np.cos(np.pi * mesh[1] / L)
    theta1 -= float(np.mean(theta1))
    G = potential(grid, config.g0, L)
    dp_drho, dp_dtheta = pressure_derivatives(th.rho_bar, th.theta_bar, th)
    rho1 = (th.rho_bar * G - float(dp_dtheta) * theta1) / float(dp_drho)

    fluid = np.ones(grid.dims, dtype=bool)
    if geom is not None and geom.N > 0:
        fluid = geom.classify(grid) != 1

    mach = config.scaling.mach
    rho = th.rho_bar + mach * np.where(fluid, rho1, 0.0)
    theta = th.theta_bar + mach * np.where(fluid, theta1, 0.0)

    u = None
    if grid.d == 2 and config.amp_u != 0.0:
        PX, PY = grid.corner_mesh()
        psi = np.sin(np.pi * PX / L) ** 2 * np.sin(np.pi * PY / L) ** 2
        fld = mac_from_stream(psi, grid)
        scale = fld.max_abs()
        fld = mac_from_stream(psi * (config.amp_u / scale), grid)
        if geom is not None and geom.N > 0:
            from .operators import vanish_on_holes
            fld = vanish_on_holes(fld, geom)
        u = fld
    if u is None:
        u = MACField(grid, [np.zeros(grid.face_shape(a)) for a in range(grid.d)])
    return NSFState(rho, u, theta, 0.0, 0)


# ---------------------------------------------------------------------------
# staggered helpers
# ---------------------------------------------------------------------------

def _open_faces(fluid: np.ndarray, grid: Grid) -> list[np.ndarray]:
    """1.0 on faces with fluid on both sides; wall and hole faces are closed."""
    out = []
    for a in range(grid.d):
        o = np.zeros(grid.face_shape(a))
        both = axslice(fluid, a, slice(None, -1)) & axslice(fluid, a, slice(1, None))
        axslice(o, a, slice(1, -1))[...] = both.astype(float)
        out.append(o)
    return out


def _penalized_faces(fluid: np.ndarray, grid: Grid) -> list[np.ndarray]:
    """1.0 on faces touching at least one hole cell (Brinkman mask)."""
    out = []
    hole = ~fluid
    for a in range(grid.d):
        chi = np.zeros(grid.face_shape(a))
        lo = axslice(chi, a, slice(None, -1))
        hi = axslice(chi, a, slice(1, None))
        lo[...] = np.maximum(lo, hole.astype(float))
        hi[...] = np.maximum(hi, hole.astype(float))
        out.append(chi)
    return out


def velocity_gradient_cells(u: MACField) -> np.ndarray:
    """d_j u_i at cell centers: exact face differences on the diagonal,
    central differences of face averages off it; shape dims + (d, d)."""
    grid = u.grid
    h = grid.spacing
    d = grid.d
    out = np.empty(grid.dims + (d, d))
    centered = u.to_cell_vector()
    for i in range(d):
        for j in range(d):
            if i == j:
                out[..., i, j] = np.diff(u.faces[i], axis=i) / h
            else:
                out[..., i, j] = np.gradient(centered[..., i], h, axis=j, edge_order=1)
    return out


# ---------------------------------------------------------------------------
# core update
# ---------------------------------------------------------------------------

class NSFSolver:
    """Holds the static per-run data (grid, masks, potential, reference scales)."""

    def __init__(self, config: NSFConfig, geom: PerforatedGeometry | None = None):
        self.config = config
        self.scaling = config.scaling
        self.thermo = config.thermo
        self.grid = config.grid()
        self.geom = geom
        if geom is not None and geom.N > 0:
            self.hole_mask = geom.classify(self.grid) == 1
        else:
            self.hole_mask = np.zeros(self.grid.dims, dtype=bool)
        self.fluid = ~self.hole_mask
        self.open = _open_faces(self.fluid, self.grid)
        self.chi = _penalized_faces(self.fluid, self.grid)
        self.G = potential(self.grid, config.g0, config.L)
        self.gradG = np.zeros(self.grid.d)
        self.gradG[0] = config.g0 / config.L
        self.c_ref = float(np.sqrt(sound_speed_sq(
            self.thermo.rho_bar, self.thermo.theta_bar, self.thermo)))
        self.inv_mach = self.scaling.epsilon ** (-self.scaling.m)

    # -- time step control ---------------------------------------------------

    def acoustic_dt(self, state: NSFState) -> float:
        h = self.grid.spacing
        speed = state.u.max_abs() + self.c_ref * self.inv_mach
        dt = self.config.cfl * h / speed
        # dissipation-number cap: the Rusanov diffusion of the sharpest mode
        # must relax monotonically under forward Euler ((2 d lambda / h) dt <= 0.9),
        # or its overshoot couples to the acoustic phase and rings up a
        # checkerboard; this binds before the advective CFL whenever
        # cfl > 0.45/d
        dt = min(dt, 0.45 * h / (self.grid.d * speed))
        # explicit diffusion guard; active only for stiff transport coefficients
        th_max = float(np.max(state.theta[self.fluid])) if self.fluid.any() else 1.0
        rho_min = float(np.min(state.rho[self.fluid])) if self.fluid.any() else 1.0
        mu, eta, kappa = transport(th_max, self.thermo)
        d_mom = (2.0 * mu + eta) / rho_min
        d_heat = kappa / (1.5 * rho_min)
        d_max = max(float(d_mom), float(d_heat), 1e-300)
        return min(dt, 0.9 * h * h / (4.0 * d_max))

    def kinetic_energy_cells(self, rho: np.ndarray, u: MACField) -> np.ndarray:
        vel2 = np.zeros(self.grid.dims)
        for a in range(self.grid.d):
            vel2 += midpoint_avg(u.faces[a], a) ** 2
        return 0.5 * self.scaling.mach ** 2 * rho * vel2

    def total_energy(self, state: NSFState) -> float:
        e = internal_energy(np.maximum(state.rho, 1e-300), state.theta, self.thermo)
        dens = (self.kinetic_energy_cells(state.rho, state.u)
                + state.rho * e - self.scaling.mach * state.rho * self.G)
        return float(np.sum(dens)) * self.grid.cell_volume

    def entropy_production_rate(self, state: NSFState) -> float:
        """integral over fluid cells of (1/theta)[eps^{2m} S:grad u + kappa |grad theta|^2/theta]."""
        from .thermo import viscous_dissipation
        gu = velocity_gradient_cells(state.u)
        diss = viscous_dissipation(state.theta, gu, self.thermo)
        h = self.grid.spacing
        grad2 = np.zeros(self.grid.dims)
        for a in range(self.grid.d):
            df = np.diff(state.theta, axis=a) / h
            face = np.zeros(self.grid.face_shape(a))
            axslice(face, a, slice(1, -1))[...] = df
            face *= self.open[a]
            grad2 += midpoint_avg(face ** 2, a)
        _, _, kappa = transport(state.theta, self.thermo)
        integrand = (self.scaling.mach ** 2 * diss + kappa * grad2 / state.theta) / state.theta
        return float(np.sum(integrand[self.fluid])) * self.grid.cell_volume

    # -- single step ----------------------------------------------------------

    def step(self, state: NSFState, dt: float) -> NSFState:
        grid, h, d = self.grid, self.grid.spacing, self.grid.d
        sc, th = self.scaling, self.thermo
        rho, theta = state.rho, state.theta
        u = state.u.faces

        p = pressure(rho, theta, th)
        cs2 = sound_speed_sq(rho, theta, th)
        rho_e = rho * internal_energy(rho, theta, th)
        mu_c, eta_c, kappa_c = transport(theta, th)

        # Rusanov speed on faces: local flow speed plus scaled sound speed
        lam = []
        for a in range(d):
            cs = np.zeros(grid.face_shape(a))
            axslice(cs, a, slice(1, -1))[...] = np.sqrt(midpoint_avg(cs2, a))
            lam.append((np.abs(u[a]) + cs * self.inv_mach) * self.open[a])

        def scalar_flux(q: np.ndarray, a: int) -> np.ndarray:
            f = np.zeros(grid.face_shape(a))
            interior = axslice(f, a, slice(1, -1))
            q_lo = axslice(q, a, slice(None, -1))
            q_hi = axslice(q, a, slice(1, None))
            uf = axslice(u[a], a, slice(1, -1))
            lam_i = axslice(lam[a], a, slice(1, -1))
            interior[...] = uf * 0.5 * (q_lo + q_hi) - 0.5 * lam_i * (q_hi - q_lo)
            return f * self.open[a]

        def div_faces(fluxes: list[np.ndarray]) -> np.ndarray:
            out = np.zeros(grid.dims)
            for a in range(d):
                out += np.diff(fluxes[a], axis=a) / h
            return out

        # continuity
        mass_flux = [scalar_flux(rho, a) for a in range(d)]
        rho_new = rho - dt * div_faces(mass_flux)

        # momentum, face by face
        div_u = np.zeros(grid.dims)
        for a in range(d):
            div_u += np.diff(u[a], axis=a) / h

        new_faces = []
        for a in range(d):
            avg_f = midpoint_avg(rho, a)
            face_shape = grid.face_shape(a)
            mom = np.zeros(face_shape)
            axslice(mom, a, slice(1, -1))[...] = avg_f * axslice(u[a], a, slice(1, -1))

            tend = np.zeros(face_shape)
            interior = axslice(tend, a, slice(1, -1))

            # advection: diagonal flux at cells, cross fluxes at edges;
            # upwinding at the material speed only -- the acoustic mode is
            # stabilized through the scalar dissipation and the step-size cap,
            # and an acoustic-scale momentum diffusion (~ c h / Ma) would bury
            # the physical viscosity
            ubar_a = midpoint_avg(u[a], a)                      # cells
            flux_aa = rho * ubar_a ** 2 \
                - 0.5 * rho * np.abs(ubar_a) * np.diff(u[a], axis=a)
            interior -= np.diff(flux_aa, axis=a) / h

            for b in range(d):
                if b == a:
                    continue
                ua_e = midpoint_avg(pad_noslip(u[a], b), b)        # edges: u_a averaged along b
                ub_e = midpoint_avg(pad_noslip(u[b], a), a)        # edges: u_b averaged along a
                rho_e_edges = midpoint_avg(pad_mirror(rho, b), b)
                rho_e_edges = midpoint_avg(pad_mirror(rho_e_edges, a), a)
                # no numerical flux through walls: dissipation only on interior edges
                lam_e = np.abs(ub_e)
                axslice(lam_e, b, slice(0, 1))[...] = 0.0
                axslice(lam_e, b, slice(-1, None))[...] = 0.0
                dua_b = np.diff(pad_noslip(u[a], b), axis=b) / h
                flux_ab = rho_e_edges * (ub_e * ua_e - 0.5 * lam_e * dua_b * h)
                tend += np.diff(flux_ab, axis=b) / h * (-1.0)

            # pressure gradient (scaled) and potential force
            interior -= self.inv_mach ** 2 * np.diff(p, axis=a) / h
            if self.gradG[a] != 0.0:
                interior += self.inv_mach * avg_f * self.gradG[a]

            # viscous stress divergence
            s_aa = (2.0 * mu_c * np.diff(u[a], axis=a) / h
                    - (2.0 / 3.0) * mu_c * div_u + eta_c * div_u)
            interior += np.diff(s_aa, axis=a) / h
            for b in range(d):
                if b == a:
                    continue
                mu_e = midpoint_avg(pad_mirror(mu_c, b), b)
                mu_e = midpoint_avg(pad_mirror(mu_e, a), a)
                dua_b = np.diff(pad_noslip(u[a], b), axis=b) / h
                dub_a = np.diff(pad_noslip(u[b], a), axis=a) / h
                s_ab = mu_e * (dua_b + dub_a)
                tend += np.diff(s_ab, axis=b) / h

            mom_new = mom + dt * tend
            rho_f_new = midpoint_avg(rho_new, a)   # interior faces only
            u_new = np.zeros(face_shape)
            axslice(u_new, a, slice(1, -1))[...] = (
                axslice(mom_new, a, slice(1, -1)) / rho_f_new)
            u_new /= 1.0 + dt * self.chi[a] / self.config.eta_pen
            new_faces.append(u_new)

        u_new_field = MACField(grid, new_faces)

        # internal energy with the exact kinetic-energy complement
        ke_old = self.kinetic_energy_cells(rho, state.u)
        ke_new = self.kinetic_energy_cells(rho_new, u_new_field)
        work_G = sc.mach * self.G * (rho_new - rho) / dt
        q_heat = -(ke_new - ke_old) / dt + work_G

        energy_flux = [scalar_flux(rho_e, a) for a in range(d)]
        heat_flux = []
        for a in range(d):
            f = np.zeros(grid.face_shape(a))
            kap_f = midpoint_avg(kappa_c, a)
            axslice(f, a, slice(1, -1))[...] = -kap_f * np.diff(theta, axis=a) / h
            heat_flux.append(f * self.open[a])
        rho_e_new = rho_e - dt * div_faces(energy_flux) - dt * div_faces(heat_flux) \
            + dt * q_heat

        if np.any(rho_new[self.fluid] <= 0.0):
            raise SolverError("density positivity lost", state=state)
        theta_new = invert_temperature(rho_new, rho_e_new / rho_new, th, theta)
        if np.any(theta_new[self.fluid] <= 0.0):
            raise SolverError("temperature positivity lost", state=state)

        return NSFState(rho_new, u_new_field, theta_new, state.t + dt, state.step + 1)


def invert_temperature(rho: np.ndarray, e: np.ndarray, params: ThermoParams,
                       theta_guess: np.ndarray) -> np.ndarray:
    """Solve e(rho, theta) = e for theta.

    Closed form without radiation; a few warm-started Newton iterations
    otherwise (de/dtheta >= 3/2 keeps it monotone).
    """
    base = (2.0 / 3.0) * e - np.cbrt(rho) ** 2
    if params.a_rad == 0.0:
        return base
    theta = np.maximum(theta_guess, 1e-12)
    a = params.a_rad
    for _ in range(30):
        f = 1.5 * theta + a * theta ** 4 / rho - (e - 1.5 * np.cbrt(rho) ** 2)
        df = 1.5 + 4.0 * a * theta ** 3 / rho
        step = f / df
        theta = theta - step
        if float(np.max(np.abs(step))) < 1e-13 * max(1.0, float(np.max(np.abs(theta)))):
            break
    return theta


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

@dataclass
class NSFResult:
    config: NSFConfig
    grid: Grid
    hole_mask: np.ndarray
    times: list[float]
    states: list[NSFState]
    diagnostics: dict[str, list[float]]
    G: np.ndarray | None = None


def run_nsf(config: NSFConfig, geom: PerforatedGeometry | None = None,
            sample_times=None, keep_states: bool = True) -> NSFResult:
    """Advance to the final time, sampling states and conservation diagnostics.

    A step is rejected and retried with half the step size whenever the state
    it produced invalidates the CFL bound it was taken under.
    """
    solver = NSFSolver(config, geom)
    state = init_well_prepared(config, geom)
    if sample_times is None:
        sample_times = np.linspace(0.0, config.final_time, config.n_samples)
    sample_times = [float(t) for t in sample_times]

    diagnostics = {k: [] for k in
                   ("t", "mass", "total_energy", "entropy_production",
                    "measure_res", "max_hole_speed", "min_rho", "min_theta")}
    times, states = [], []

    def record(st: NSFState):
        times.append(st.t)
        if keep_states:
            states.append(st.copy())
        split = ess_res_split(st.rho, st.theta, solver.hole_mask, config.thermo,
                              solver.grid.cell_volume)
        diagnostics["t"].append(st.t)
        diagnostics["mass"].append(float(np.sum(st.rho)) * solver.grid.cell_volume)
        diagnostics["total_energy"].append(solver.total_energy(st))
        diagnostics["entropy_production"].append(solver.entropy_production_rate(st))
        diagnostics["measure_res"].append(split.measure_res)
        diagnostics["max_hole_speed"].append(max_hole_speed(st, solver.hole_mask))
        diagnostics["min_rho"].append(float(np.min(st.rho[solver.fluid])))
        diagnostics["min_theta"].append(float(np.min(st.theta[solver.fluid])))

    next_sample = 0
    if sample_times and abs(sample_times[0] - 0.0) < 1e-14:
        record(state)
        next_sample = 1

    t_end = config.final_time
    while state.t < t_end - 1e-12:
        dt = 0.95 * solver.acoustic_dt(state)
        target = sample_times[next_sample] if next_sample < len(sample_times) else t_end
        dt = min(dt, target - state.t, t_end - state.t)
        for attempt in range(MAX_DT_RETRIES):
            new_state = solver.step(state, dt)
            if dt <= solver.acoustic_dt(new_state) * (1.0 + 1e-12):
                break
            dt *= 0.5  # CFL bound invalidated by the new state: reject and halve
        else:
            raise SolverError("time step collapsed", state=state)
        state = new_state
        while (next_sample < len(sample_times)
               and state.t >= sample_times[next_sample] - 1e-12):
            record(state)
            next_sample += 1

    if not times or abs(times[-1] - state.t) > 1e-12:
        record(state)
    return NSFResult(config, solver.grid, solver.hole_mask, times, states,
                     diagnostics, solver.G)


def max_hole_speed(state: NSFState, hole_mask: np.ndarray) -> float:
    if not np.any(hole_mask):
        return 0.0
    vel = state.u.to_cell_vector()
    speed = np.sqrt(np.sum(vel ** 2, axis=-1))
    return float(np.max(speed[hole_mask]))
