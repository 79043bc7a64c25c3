"""Constitutive family for the compressible heat-conducting fluid.

The molecular pressure is built from a structure function P through

    p(rho, theta) = theta^{5/2} P(rho / theta^{3/2}) + (a/3) theta^4,
    e(rho, theta) = (3/2) (theta^{5/2}/rho) P(rho / theta^{3/2}) + a theta^4 / rho,
    s(rho, theta) = S(rho / theta^{3/2}) + (4a/3) theta^3 / rho,

with S'(Z) = -(3/2) (5/3 P(Z) - P'(Z) Z) / Z^2.  The concrete instance used
here is P(Z) = Z + Z^{5/3}, which gives S(Z) = -ln Z (integration constant
fixed by S(1) = 0) and the closed forms

    p = rho theta + rho^{5/3} + (a/3) theta^4,
    e = (3/2)(theta + rho^{2/3}) + a theta^4 / rho,
    s = ln(theta^{3/2} / rho) + (4a/3) theta^3 / rho.

Transport coefficients grow linearly (mu, eta) and cubically (kappa) in
temperature, saturating their admissible two-sided bounds with equal upper
and lower constants.

All functions accept scalars or numpy arrays and are pure (safe to call from
any number of workers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ThermoDomainError

P_EXPONENT = 5.0 / 3.0


@dataclass(frozen=True)
class ThermoParams:
    """Reference state and constitutive constants.

    rho_bar, theta_bar : reference density and temperature (> 0)
    a_rad              : radiation constant (>= 0)
    mu0, eta0, kappa0  : transport scale constants; mu(theta) = mu0 (1+theta),
                         eta likewise, kappa(theta) = kappa0 (1+theta^3)
    p_inf              : limit of P(Z)/Z^{5/3} for large Z (1 for this family)
    """

    rho_bar: float = 1.0
    theta_bar: float = 1.0
    a_rad: float = 1e-3
    mu0: float = 1.0
    eta0: float = 0.0
    kappa0: float = 1.0
    p_inf: float = 1.0

    def __post_init__(self):
        if self.rho_bar <= 0 or self.theta_bar <= 0:
            raise ThermoDomainError("reference state must be positive")
        if self.a_rad < 0 or self.mu0 <= 0 or self.eta0 < 0 or self.kappa0 <= 0:
            raise ThermoDomainError("transport/radiation constants out of range")
        if self.p_inf <= 0:
            raise ThermoDomainError("p_inf must be positive")


@dataclass(frozen=True)
class LinearizationCoeffs:
    """First-order coefficients of the buoyancy-driven limit system at (rho_bar, theta_bar)."""

    A: float           # buoyancy coefficient, rho_bar * a_th
    c_p: float         # specific heat at constant pressure
    a_th: float        # thermal extension coefficient
    dp_drho: float
    dp_dtheta: float
    de_dtheta: float
    ds_drho: float
    ds_dtheta: float


def _check_positive(rho, theta):
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(rho <= 0) or np.any(theta <= 0):
        raise ThermoDomainError("rho and theta must be positive")
    return rho, theta


def eval_P(Z, with_S: bool = True):
    """Structure function P(Z) = Z + Z^{5/3} and its companions.

    Returns (P, P', S, S'); S and S' are None when ``with_S`` is false and
    raise for Z = 0 otherwise (logarithmic singularity).
    """
    Z = np.asarray(Z, dtype=float)
    if np.any(Z < 0):
        raise ThermoDomainError("Z must be nonnegative")
    P = Z + Z ** P_EXPONENT
    dP = 1.0 + P_EXPONENT * np.cbrt(Z) ** 2
    if not with_S:
        return P, dP, None, None
    if np.any(Z == 0):
        raise ThermoDomainError("S(Z) is singular at Z = 0")
    S = -np.log(Z)
    dS = -1.0 / Z
    return P, dP, S, dS


def pressure(rho, theta, params: ThermoParams):
    rho, theta = _check_positive(rho, theta)
    Z = rho / theta ** 1.5
    P, _, _, _ = eval_P(Z, with_S=False)
    return theta ** 2.5 * P + (params.a_rad / 3.0) * theta ** 4


def internal_energy(rho, theta, params: ThermoParams):
    rho, theta = _check_positive(rho, theta)
    Z = rho / theta ** 1.5
    P, _, _, _ = eval_P(Z, with_S=False)
    return 1.5 * (theta ** 2.5 / rho) * P + params.a_rad * theta ** 4 / rho


def entropy(rho, theta, params: ThermoParams):
    rho, theta = _check_positive(rho, theta)
    Z = rho / theta ** 1.5
    _, _, S, _ = eval_P(Z)
    return S + (4.0 * params.a_rad / 3.0) * theta ** 3 / rho


def pressure_derivatives(rho, theta, params: ThermoParams):
    """(dp/drho, dp/dtheta) from the closed form of the chosen instance."""
    rho, theta = _check_positive(rho, theta)
    dp_drho = theta + P_EXPONENT * np.cbrt(rho) ** 2
    dp_dtheta = rho + (4.0 * params.a_rad / 3.0) * theta ** 3
    return dp_drho, dp_dtheta


def energy_derivatives(rho, theta, params: ThermoParams):
    """(de/drho, de/dtheta) closed forms."""
    rho, theta = _check_positive(rho, theta)
    a = params.a_rad
    de_drho = 1.0 / np.cbrt(rho) - a * theta ** 4 / rho ** 2
    de_dtheta = 1.5 + 4.0 * a * theta ** 3 / rho
    return de_drho, de_dtheta


def entropy_derivatives(rho, theta, params: ThermoParams):
    """(ds/drho, ds/dtheta) closed forms."""
    rho, theta = _check_positive(rho, theta)
    a = params.a_rad
    ds_drho = -1.0 / rho - (4.0 * a / 3.0) * theta ** 3 / rho ** 2
    ds_dtheta = 1.5 / theta + 4.0 * a * theta ** 2 / rho
    return ds_drho, ds_dtheta


def sound_speed_sq(rho, theta, params: ThermoParams):
    """Adiabatic sound speed squared, dp/drho at constant entropy:

        c^2 = dp_drho + theta (dp_dtheta)^2 / (rho^2 de_dtheta),

    the characteristic speed the acoustic dissipation must dominate."""
    dp_drho, dp_dtheta = pressure_derivatives(rho, theta, params)
    _, de_dtheta = energy_derivatives(rho, theta, params)
    return dp_drho + theta * dp_dtheta ** 2 / (np.asarray(rho) ** 2 * de_dtheta)


def transport(theta, params: ThermoParams):
    """(mu, eta, kappa) at temperature theta >= 0."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ThermoDomainError("theta must be nonnegative")
    mu = params.mu0 * (1.0 + theta)
    eta = params.eta0 * (1.0 + theta)
    kappa = params.kappa0 * (1.0 + theta ** 3)
    return mu, eta, kappa


def viscous_stress(theta, grad_u, params: ThermoParams):
    """Newtonian stress mu (grad u + grad u^T - (2/3) div u I) + eta (div u) I.

    ``grad_u`` has shape (..., d, d) with grad_u[..., i, j] = d_j u_i.
    """
    grad_u = np.asarray(grad_u, dtype=float)
    d = grad_u.shape[-1]
    if d not in (2, 3) or grad_u.shape[-2] != d:
        raise ThermoDomainError("grad_u must be a dxd tensor with d in {2, 3}")
    mu, eta, _ = transport(theta, params)
    div = np.trace(grad_u, axis1=-2, axis2=-1)
    sym = grad_u + np.swapaxes(grad_u, -1, -2)
    eye = np.eye(d)
    mu = np.asarray(mu)[..., None, None]
    eta = np.asarray(eta)[..., None, None]
    divI = div[..., None, None] * eye
    return mu * (sym - (2.0 / 3.0) * divI) + eta * divI


def heat_flux(theta, grad_theta, params: ThermoParams):
    """Fourier flux q = -kappa(theta) grad theta."""
    _, _, kappa = transport(theta, params)
    return -np.asarray(kappa)[..., None] * np.asarray(grad_theta, dtype=float)


def viscous_dissipation(theta, grad_u, params: ThermoParams):
    """S(theta, grad u) : grad u, organized as a sum of nonnegative pieces.

    With D~ = grad u + grad u^T - (2/3) div u I,

        S : grad u = mu [ |D~|^2 / 2 + (2(3-d)/9) div^2 ] + eta div^2,

    which is nonnegative in dimensions d <= 3.
    """
    grad_u = np.asarray(grad_u, dtype=float)
    d = grad_u.shape[-1]
    mu, eta, _ = transport(theta, params)
    div = np.trace(grad_u, axis1=-2, axis2=-1)
    sym = grad_u + np.swapaxes(grad_u, -1, -2)
    dev = sym - (2.0 / 3.0) * div[..., None, None] * np.eye(d)
    dev2 = np.sum(dev * dev, axis=(-2, -1))
    return mu * (0.5 * dev2 + (2.0 * (3 - d) / 9.0) * div ** 2) + eta * div ** 2


def helmholtz(rho, theta, params: ThermoParams):
    """H(rho, theta) = rho (e - theta_bar s), the free energy at the reference temperature."""
    rho, theta = _check_positive(rho, theta)
    return rho * (internal_energy(rho, theta, params)
                  - params.theta_bar * entropy(rho, theta, params))


def helmholtz_coercivity(rho, theta, params: ThermoParams):
    """H(rho,theta) - (rho - rho_bar) d_rho H(rho_bar,theta_bar) - H(rho_bar,theta_bar).

    Nonnegative on the essential state-space box, zero at the reference point;
    this is the quadratic-distance functional behind the energy estimates.
    """
    rb, tb = params.rho_bar, params.theta_bar
    e0 = internal_energy(rb, tb, params)
    s0 = entropy(rb, tb, params)
    de_drho, _ = energy_derivatives(rb, tb, params)
    ds_drho, _ = entropy_derivatives(rb, tb, params)
    dH_drho = (e0 - tb * s0) + rb * (de_drho - tb * ds_drho)
    H0 = helmholtz(rb, tb, params)
    return helmholtz(rho, theta, params) - (np.asarray(rho) - rb) * dH_drho - H0


def _central_diff(f, x, scale):
    h = 1e-6 * max(1.0, abs(scale))
    return (f(x + h) - f(x - h)) / (2.0 * h)


def linearization(params: ThermoParams, fd_check: bool = True) -> LinearizationCoeffs:
    """Buoyancy and heat-capacity coefficients of the limit system.

    a_th = (1/rho_bar) (d_theta p / d_rho p), A = rho_bar a_th,
    c_p  = d_theta e + a_th (theta_bar / rho_bar) d_theta p,
    all evaluated at the reference state.  Closed forms are cross-checked
    against central finite differences (rel. err < 1e-7) to catch
    transcription errors.
    """
    rb, tb = params.rho_bar, params.theta_bar
    dp_drho, dp_dtheta = pressure_derivatives(rb, tb, params)
    _, de_dtheta = energy_derivatives(rb, tb, params)
    ds_drho, ds_dtheta = entropy_derivatives(rb, tb, params)
    dp_drho = float(dp_drho)
    dp_dtheta = float(dp_dtheta)
    de_dtheta = float(de_dtheta)

    if fd_check:
        pairs = [
            (dp_drho, _central_diff(lambda r: float(pressure(r, tb, params)), rb, rb)),
            (dp_dtheta, _central_diff(lambda t: float(pressure(rb, t, params)), tb, tb)),
            (de_dtheta, _central_diff(lambda t: float(internal_energy(rb, t, params)), tb, tb)),
            (float(ds_drho), _central_diff(lambda r: float(entropy(r, tb, params)), rb, rb)),
            (float(ds_dtheta), _central_diff(lambda t: float(entropy(rb, t, params)), tb, tb)),
        ]
        for closed, fd in pairs:
            if abs(closed - fd) > 1e-7 * max(1.0, abs(closed)):
                raise ThermoDomainError(
                    f"closed-form derivative {closed!r} disagrees with finite difference {fd!r}")

    a_th = (1.0 / rb) * dp_dtheta / dp_drho
    c_p = de_dtheta + a_th * (tb / rb) * dp_dtheta
    return LinearizationCoeffs(
        A=rb * a_th, c_p=c_p, a_th=a_th,
        dp_drho=dp_drho, dp_dtheta=dp_dtheta, de_dtheta=de_dtheta,
        ds_drho=float(ds_drho), ds_dtheta=float(ds_dtheta),
    )
