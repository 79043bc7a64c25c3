"""Relative energy, defect proxies, and the weak-strong certificate.

The distance functional between a candidate pair (u, theta1) and a reference
pair (U, Theta) is

    E(u, theta1 | U, Theta)
      = 1/2 integral( rho_bar |u - U|^2 + (rho_bar/theta_bar) c_p |theta1 - Theta|^2 ).

Defect fields stand in for the measure-valued limits of u x u and |u|^2/2:
a top-hat coarse-graining at scale delta gives

    R = rho_bar ( <u x u> - <u> x <u> ),   E_def = trace(R) / 2,

which is positive semidefinite cellwise (covariance structure) and satisfies
the trace compatibility identity with constant exactly 2 by construction.

The certificate integrates the stability inequality: with rate
c(t) = C0 (||grad U||_inf + ||grad Theta||_inf) the candidate passes when

    E(tau) <= (E(0) + slack) exp( int_0^tau c dt ) + slack   for all samples,

slack being ten times the solver tolerance budget (iterative tolerances plus
an h^2 prefactor) so that discrete inequalities are judged honestly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import AlignmentError, ResolutionError, ShapeError
from .grids import Grid, cell_vector_gradient
from .thermo import LinearizationCoeffs

GRONWALL_C0 = 1.0  # absorption constant of the three quadratic estimates


# ---------------------------------------------------------------------------
# relative energy
# ---------------------------------------------------------------------------

def relative_energy(u: np.ndarray, theta1: np.ndarray, U: np.ndarray,
                    Theta: np.ndarray, coeffs: LinearizationCoeffs, grid: Grid,
                    rho_bar: float = 1.0, theta_bar: float = 1.0) -> float:
    """Midpoint-rule value of the relative energy functional; >= 0, and 0 only
    for cellwise agreement."""
    if u.shape != U.shape or theta1.shape != Theta.shape \
            or u.shape[:-1] != theta1.shape:
        raise ShapeError("relative energy needs fields on a common grid")
    du2 = np.sum((u - U) ** 2, axis=-1)
    dt2 = (theta1 - Theta) ** 2
    dens = 0.5 * (rho_bar * du2 + (rho_bar / theta_bar) * coeffs.c_p * dt2)
    return float(np.sum(dens)) * grid.cell_volume


# ---------------------------------------------------------------------------
# defect proxies
# ---------------------------------------------------------------------------

@dataclass
class DefectProxies:
    R_field: np.ndarray     # dims + (d, d), PSD cellwise
    E_field: np.ndarray     # dims, = trace(R)/2 exactly
    delta: float

    def total_mass(self, grid: Grid) -> float:
        return float(np.sum(self.E_field)) * grid.cell_volume

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.R_field)))


def defect_proxies(u: np.ndarray, grid: Grid, delta: float,
                   rho_bar: float = 1.0) -> DefectProxies:
    """Coarse-graining defects of a cell-centered velocity at scale delta >= 2h.

    A weak-limit gap has no pointwise meaning at one finite resolution, so the
    sub-delta covariance of u serves as its computable proxy; it carries the
    same structure the stability argument uses (symmetry, positivity, trace
    twice the energy defect).
    """
    if delta < 2.0 * grid.spacing:
        raise ResolutionError("coarse-graining scale below two cells",
                              required_h=delta / 2.0)
    d = u.shape[-1]
    size = max(2, int(round(delta / grid.spacing)))
    mean = np.empty_like(u)
    for i in range(d):
        mean[..., i] = ndimage.uniform_filter(u[..., i], size=size, mode="nearest")
    R = np.empty(u.shape[:-1] + (d, d))
    for i in range(d):
        for j in range(i, d):
            m2 = ndimage.uniform_filter(u[..., i] * u[..., j], size=size, mode="nearest")
            R[..., i, j] = rho_bar * (m2 - mean[..., i] * mean[..., j])
            R[..., j, i] = R[..., i, j]
    E = 0.5 * np.trace(R, axis1=-2, axis2=-1)
    return DefectProxies(R, E, float(delta))


# ---------------------------------------------------------------------------
# trajectories and the stability-inequality residual
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Time samples of a (velocity, temperature-perturbation) pair at cell
    centers; the common currency of the weak-strong comparisons."""

    grid: Grid
    times: list[float]
    velocity: list[np.ndarray]      # dims + (d,)
    temperature: list[np.ndarray]   # dims
    pressure: list[np.ndarray] | None = None
    kind: str = "ob"

    def __post_init__(self):
        n = len(self.times)
        if len(self.velocity) != n or len(self.temperature) != n:
            raise AlignmentError("sample count mismatch within trajectory")


def check_aligned(weak: Trajectory, strong: Trajectory, tol: float = 1e-9):
    if weak.grid.dims != strong.grid.dims or \
            abs(weak.grid.spacing - strong.grid.spacing) > 1e-14:
        raise ShapeError("trajectories live on different grids")
    if len(weak.times) != len(strong.times) or any(
            abs(a - b) > tol for a, b in zip(weak.times, strong.times)):
        raise AlignmentError("trajectories sampled at different times")


def _sym_grad_sq(vec: np.ndarray, h: float) -> np.ndarray:
    g = cell_vector_gradient(vec, h)
    sym = 0.5 * (g + np.swapaxes(g, -1, -2))
    return np.sum(sym * sym, axis=(-2, -1))


def gronwall_rate(U: np.ndarray, Theta: np.ndarray, h: float,
                  c0: float = GRONWALL_C0) -> float:
    """c(t) = C0 (||grad U||_inf + ||grad Theta||_inf) of the reference fields."""
    gU = cell_vector_gradient(U, h)
    gT = np.stack(np.gradient(Theta, h, edge_order=1)
                  if Theta.ndim > 1 else [np.gradient(Theta, h)], axis=-1)
    return c0 * (float(np.max(np.abs(gU))) + float(np.max(np.abs(gT))))


def slack_budget(grid: Grid, solver_tols: float = 2e-10,
                 gradient_energy: float = 0.0, delta_ratio: float = 4.0) -> float:
    """Ten times the tolerance budget: iterative solves plus an h^2 prefactor.

    The prefactor carries the coarse-graining bias of the defect proxies: a
    top-hat window of delta = delta_ratio * h over a smooth field produces a
    deterministic defect mass of about (delta^2/24) * integral |grad u|^2,
    which is an instrument systematic, shrinks as h^2, and must not be billed
    to the trajectories being compared.  Pass the peak gradient energy of the
    candidate trajectory to include it.
    """
    prefactor = 1.0 + delta_ratio ** 2 / 24.0 * gradient_energy
    return 10.0 * (solver_tols + grid.spacing ** 2 * prefactor)


def gradient_energy(traj: "Trajectory") -> float:
    """max over samples of integral |grad u|^2, for the slack budget."""
    h = traj.grid.spacing
    vol = traj.grid.cell_volume
    return max(float(np.sum(cell_vector_gradient(v, h) ** 2)) * vol
               for v in traj.velocity)


@dataclass
class REIReport:
    times: list[float]
    E_series: list[float]
    c_series: list[float]
    residuals: list[float]
    defect_mass: list[float]


def rei_residual(weak: Trajectory, strong: Trajectory,
                 coeffs: LinearizationCoeffs, mu: float, kappa: float,
                 rho_bar: float = 1.0, theta_bar: float = 1.0,
                 delta: float | None = None) -> REIReport:
    """Signed residual of the stability inequality at each sample time.

    residual(tau) = E(tau) - E(0) + defect_mass(tau)
                    + 2 mu int ||sym grad (u-U)||^2 + (kappa/theta_bar) int ||grad(theta1-Theta)||^2
                    + rho_bar int [(u-U) x (u-U)] : grad U
                    + (rho_bar c_p / theta_bar) int (theta1-Theta) grad Theta . (u-U)
                    + int grad U : dR

    A compliant pair keeps it below the numerical slack; the reference
    pressure never enters (it pairs with a mean-zero divergence).
    """
    check_aligned(weak, strong)
    grid = weak.grid
    h = grid.spacing
    vol = grid.cell_volume
    if delta is None:
        delta = 4.0 * h

    times = weak.times
    E_series, c_series, defects = [], [], []
    disc = []   # instantaneous dissipation + coupling integrands (time-integrated below)
    for k in range(len(times)):
        du = weak.velocity[k] - strong.velocity[k]
        dT = weak.temperature[k] - strong.temperature[k]
        E_series.append(relative_energy(weak.velocity[k], weak.temperature[k],
                                        strong.velocity[k], strong.temperature[k],
                                        coeffs, grid, rho_bar, theta_bar))
        c_series.append(gronwall_rate(strong.velocity[k], strong.temperature[k], h))

        proxies = defect_proxies(weak.velocity[k], grid, delta, rho_bar)
        defects.append(proxies.total_mass(grid))

        diss = 2.0 * mu * float(np.sum(_sym_grad_sq(du, h))) * vol
        gdT = cell_vector_gradient(dT[..., None], h)[..., 0, :]
        diss += kappa / theta_bar * float(np.sum(gdT ** 2)) * vol

        gU = cell_vector_gradient(strong.velocity[k], h)
        duu = du[..., :, None] * du[..., None, :]
        cross = rho_bar * float(np.sum(duu * gU)) * vol
        gT = cell_vector_gradient(strong.temperature[k][..., None], h)[..., 0, :]
        cross += (rho_bar * coeffs.c_p / theta_bar) \
            * float(np.sum(dT * np.sum(gT * du, axis=-1))) * vol
        cross += float(np.sum(gU * proxies.R_field)) * vol
        disc.append(diss + cross)

    residuals = []
    for k in range(len(times)):
        integral = float(np.trapezoid(disc[: k + 1], times[: k + 1])) if k else 0.0
        residuals.append(E_series[k] - E_series[0] + defects[k] + integral)
    return REIReport(list(times), E_series, c_series, residuals, defects)


# ---------------------------------------------------------------------------
# Gronwall certificate
# ---------------------------------------------------------------------------

@dataclass
class GronwallReport:
    times: list[float]
    E_series: list[float]
    c_series: list[float]
    bounds: list[float]
    certificate: bool
    margin: float
    slack: float

    def to_json(self, path=None) -> str:
        payload = {
            "samples": [
                {"t": t, "E": e, "c": c, "bound": b, "residual": e - b}
                for t, e, c, b in zip(self.times, self.E_series,
                                      self.c_series, self.bounds)
            ],
            "certificate": bool(self.certificate),
            "margin": self.margin,
            "slack": self.slack,
        }
        text = json.dumps(payload, indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def gronwall_certificate(times, E_series, c_series, slack: float) -> GronwallReport:
    """Exponential-envelope check of the sampled relative energy.

    Pass iff E(tau) <= (E(0) + slack) exp(int_0^tau c) + slack at every
    sample; margin is the worst-case distance to the envelope.  Monotone in
    slack by construction.
    """
    times = [float(t) for t in times]
    E_series = [float(e) for e in E_series]
    c_series = [float(c) for c in c_series]
    if not times or len(times) != len(E_series) or len(times) != len(c_series):
        raise AlignmentError("certificate needs aligned nonempty series")
    bounds = []
    for k in range(len(times)):
        integral = float(np.trapezoid(c_series[: k + 1], times[: k + 1])) if k else 0.0
        bounds.append((E_series[0] + slack) * float(np.exp(integral)) + slack)
    margin = min(b - e for b, e in zip(bounds, E_series))
    return GronwallReport(times, E_series, c_series, bounds,
                          certificate=margin >= 0.0, margin=margin, slack=slack)
