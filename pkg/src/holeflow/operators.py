"""Field operators bridging the perforated and homogenized domains.

Three constructions:

* ``extend`` fills hole cells with the discrete harmonic extension of the
  surrounding fluid values (5-/7-point Laplacian, Dirichlet data from the
  adjacent fluid cells, one small SPD solve per hole).  The extension is the
  identity on fluid cells and controls the W^{1,2} norm with a constant that
  an eps-sweep can check for uniformity.

* ``restrict`` maps a divergence-free test field given by a stream function
  to one that vanishes on the obstacles and keeps a discrete divergence of
  exactly zero: near hole n the stream function is flattened to its value at
  the hole center, psi -> psi(x_n) + (1 - phi_n)(psi - psi(x_n)), and the
  output is the perpendicular gradient of the modified stream function.
  Two-dimensional only; the general three-dimensional construction is out of
  scope here, and only the divergence-free branch is ever needed by the
  momentum-equation experiments.

* ``ess_res_split`` and ``perturbation_fields`` classify cells by proximity
  of the state to the reference (strictly inside the half-to-double box) and
  form the first-order perturbation fields, zero-extended for quantities with
  Dirichlet-type data (density, pressure, entropy, conductivity) and
  harmonically extended for the temperature-like ones whose Neumann data
  makes a zero extension break the gradient norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import cg

from .errors import GeometryError, ResolutionError, ShapeError, SolverError, UnsupportedInputError
from .geometry import PerforatedGeometry, cutoff_profile, required_cutoff_spacing
from .grids import Grid, GridField, MACField, mac_from_stream
from .thermo import ThermoParams, pressure, entropy, transport

CG_TOL = 1e-12


# ---------------------------------------------------------------------------
# harmonic extension
# ---------------------------------------------------------------------------

def _hole_components(hole_mask: np.ndarray):
    labels, n = ndimage.label(hole_mask)
    return labels, n


def extend(f: GridField, hole_mask: np.ndarray) -> GridField:
    """Harmonically fill the cells flagged in ``hole_mask``.

    Each connected hole component yields one SPD system (graph Laplacian with
    Dirichlet data from neighboring fluid cells) solved by conjugate
    gradients to a 1e-12 relative residual.  Values on fluid cells are passed
    through untouched.
    """
    if f.data.shape != hole_mask.shape:
        raise ShapeError("field/mask shape mismatch")
    data = f.data.astype(float).copy()
    if not np.any(hole_mask):
        return GridField(f.grid, data)

    dims = hole_mask.shape
    labels, ncomp = _hole_components(hole_mask)
    idx = -np.ones(dims, dtype=np.int64)
    flat_hole = np.flatnonzero(hole_mask)
    idx[hole_mask] = np.arange(flat_hole.size)

    # assemble the global Dirichlet Laplacian over all hole cells at once;
    # components decouple, so one CG solve handles every hole
    rows, cols, vals = [], [], []
    b = np.zeros(flat_hole.size)
    coords = np.argwhere(hole_mask)
    d = len(dims)
    for axis in range(d):
        for step in (-1, 1):
            nb = coords.copy()
            nb[:, axis] += step
            inside = (nb[:, axis] >= 0) & (nb[:, axis] < dims[axis])
            if not np.all(inside):
                raise GeometryError("hole touches the domain boundary; "
                                    "no fluid collar to extend from")
            nb_t = tuple(nb.T)
            nb_is_hole = hole_mask[nb_t]
            me = idx[tuple(coords.T)]
            other = idx[nb_t]
            rows.extend(me[nb_is_hole])
            cols.extend(other[nb_is_hole])
            vals.extend([-1.0] * int(np.count_nonzero(nb_is_hole)))
            fl = ~nb_is_hole
            np.add.at(b, me[fl], data[tuple(nb[fl].T)])
    n = flat_hole.size
    diag = sparse.coo_matrix((np.full(n, 2.0 * d), (np.arange(n), np.arange(n))), shape=(n, n))
    off = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
    A = (diag + off).tocsr()

    x0 = np.full(n, float(np.mean(b)) / (2.0 * d))
    x, info = cg(A, b, x0=x0, rtol=CG_TOL, atol=0.0, maxiter=10 * n + 100)
    if info != 0:
        raise SolverError(f"harmonic fill CG did not converge (info={info})")
    data[hole_mask] = x
    return GridField(f.grid, data)


def w12_norm(data: np.ndarray, h: float, region: np.ndarray | None = None) -> float:
    """Discrete W^{1,2} norm: cell L2 part plus face differences.

    Faces crossing the region boundary are skipped (one-sided treatment at
    mask edges), so no differencing happens across a hole or wall.
    """
    if region is None:
        region = np.ones(data.shape, dtype=bool)
    vol = h ** data.ndim
    total = float(np.sum(data[region] ** 2)) * vol
    for axis in range(data.ndim):
        lo = [slice(None)] * data.ndim
        hi = [slice(None)] * data.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        open_face = region[tuple(lo)] & region[tuple(hi)]
        diff = (data[tuple(hi)] - data[tuple(lo)]) / h
        total += float(np.sum((diff ** 2)[open_face])) * vol
    return np.sqrt(total)


def extension_norm_ratio(f: GridField, extended: GridField, hole_mask: np.ndarray) -> float:
    """||E(f)||_{W^{1,2}(Omega)} / ||f||_{W^{1,2}(Omega_eps)}; tracked per run."""
    h = f.grid.spacing
    num = w12_norm(extended.data, h)
    den = w12_norm(f.data, h, region=~hole_mask)
    return num / den


# ---------------------------------------------------------------------------
# divergence-preserving restriction (d = 2)
# ---------------------------------------------------------------------------

def flatten_stream(psi: np.ndarray, grid: Grid, centers: np.ndarray,
                   r_plat: float, r_outer: float) -> MACField:
    """Flatten a corner stream function to its center value around each hole,
    psi -> psi(x_n) + (1 - phi_n)(psi - psi(x_n)), and take its perp gradient."""
    psi = psi.copy()
    corners = np.stack(grid.corner_mesh(), axis=-1)
    h = grid.spacing
    source = psi.copy()
    for c in np.atleast_2d(centers):
        r = np.linalg.norm(corners - c, axis=-1)
        near = r < r_outer
        if not np.any(near):
            continue
        phi = cutoff_profile(r[near], r_plat, r_outer)
        # stream value at the hole center, bilinear off the corner grid
        ij = np.clip((c - np.asarray(grid.origin)) / h, 0, None)
        i0 = min(int(ij[0]), grid.dims[0] - 1)
        j0 = min(int(ij[1]), grid.dims[1] - 1)
        fx, fy = ij[0] - i0, ij[1] - j0
        psi_c = ((1 - fx) * (1 - fy) * source[i0, j0]
                 + fx * (1 - fy) * source[i0 + 1, j0]
                 + (1 - fx) * fy * source[i0, j0 + 1]
                 + fx * fy * source[i0 + 1, j0 + 1])
        psi[near] = psi[near] - phi * (psi[near] - psi_c)
        # write the plateau as one constant: corner differences there must
        # cancel bitwise, and psi - 1.0*(psi - psi_c) rounds away from psi_c
        psi[r <= r_plat] = psi_c
    return mac_from_stream(psi, grid)


def restrict(field: MACField, geom: PerforatedGeometry,
             plateau_margin: float | None = None) -> MACField:
    """Restriction of a divergence-free field to the perforated domain.

    The input must carry the stream function it was built from (the operator
    is only realized on the divergence-free class).  The output vanishes on
    every cell whose closure sits in an obstacle, coincides with the input
    outside the guard balls, and has staggered divergence zero to round-off.

    The flat region extends one cell diagonal past the obstacle so the hole
    cells' whole face stencils sit on it; refinement studies can pin
    ``plateau_margin`` (an absolute length >= that diagonal) to keep the
    operator fixed while only the quadrature resolution changes.
    """
    grid = field.grid
    if grid.d != 2:
        raise UnsupportedInputError("restriction is implemented in d=2 only")
    if field.stream is None:
        raise UnsupportedInputError(
            "restriction needs the stream function of a divergence-free field")
    h_req = required_cutoff_spacing(geom.scaling)
    if grid.spacing > h_req:
        raise ResolutionError("grid does not resolve the cutoff annulus", h_req)

    h = grid.spacing
    min_margin = np.sqrt(2.0) * h * 1.0001
    if plateau_margin is None:
        plateau_margin = min_margin
    elif plateau_margin < min_margin:
        raise ResolutionError("plateau margin below one cell diagonal", plateau_margin)
    r_plat = geom.hole_radius + plateau_margin
    r_outer = geom.guard_radius
    if r_plat >= r_outer:
        raise ResolutionError("cutoff annulus thinner than the plateau margin",
                              (r_outer - geom.hole_radius) / (np.sqrt(2.0) * 1.0001))
    return flatten_stream(field.stream, grid, geom.centers, r_plat, r_outer)


def vanish_on_holes(field: MACField, geom: PerforatedGeometry) -> MACField:
    """Divergence-free field vanishing on the obstacles, for initial data.

    Same stream flattening as the restriction operator, but with an h-aware
    collar (plateau one cell diagonal past the obstacle, transition over four
    more cells) so it works on solver grids that do not resolve the guard
    annulus.  Falls back to the proper restriction when the grid does.
    """
    grid = field.grid
    if field.stream is None:
        raise UnsupportedInputError("needs a stream function")
    h = grid.spacing
    if h <= required_cutoff_spacing(geom.scaling):
        return restrict(field, geom)
    r_plat = geom.hole_radius + np.sqrt(2.0) * h * 1.0001
    r_outer = max(geom.guard_radius, r_plat + 4.0 * h)
    return flatten_stream(field.stream, grid, geom.centers, r_plat, r_outer)


# ---------------------------------------------------------------------------
# essential / residual / holes decomposition
# ---------------------------------------------------------------------------

@dataclass
class EssResSplit:
    """Partition of the box into essential, residual, and hole cells."""

    ess: np.ndarray
    res: np.ndarray
    holes: np.ndarray
    measure_ess: float
    measure_res: float
    measure_holes: float


def ess_res_split(rho: np.ndarray, theta: np.ndarray, hole_mask: np.ndarray,
                  params: ThermoParams, cell_volume: float) -> EssResSplit:
    """Cells where rho_bar/2 < rho < 2 rho_bar and theta_bar/2 < theta < 2 theta_bar
    (both strict) are essential; remaining fluid cells are residual."""
    fluid = ~hole_mask.astype(bool)
    ess = (fluid
           & (rho > 0.5 * params.rho_bar) & (rho < 2.0 * params.rho_bar)
           & (theta > 0.5 * params.theta_bar) & (theta < 2.0 * params.theta_bar))
    res = fluid & ~ess
    holes = ~fluid
    return EssResSplit(
        ess, res, holes,
        float(np.count_nonzero(ess)) * cell_volume,
        float(np.count_nonzero(res)) * cell_volume,
        float(np.count_nonzero(holes)) * cell_volume,
    )


# ---------------------------------------------------------------------------
# first-order perturbation fields
# ---------------------------------------------------------------------------

@dataclass
class PerturbationFields:
    """First-order fields at scale eps^m.

    rho1, p1, s1, kappa1 are zero on hole cells; theta1 and ell1 carry the
    harmonic extension (a zero extension would not stay in W^{1,2} under the
    Neumann condition for the temperature).
    """

    rho1: GridField
    theta1: GridField
    ell1: GridField
    p1: GridField
    s1: GridField
    kappa1: GridField


def perturbation_fields(rho: np.ndarray, theta: np.ndarray, hole_mask: np.ndarray,
                        grid: Grid, mach: float, params: ThermoParams) -> PerturbationFields:
    """Scale the deviation from the reference state by the Mach number eps^m."""
    if mach <= 0:
        raise ValueError("mach scale must be positive")
    hole_mask = hole_mask.astype(bool)
    fluid = ~hole_mask
    rb, tb = params.rho_bar, params.theta_bar

    def tilde(values_fluid) -> GridField:
        out = np.zeros(grid.dims)
        out[fluid] = values_fluid
        return GridField(grid, out)

    rho_f, theta_f = rho[fluid], theta[fluid]
    rho1 = tilde((rho_f - rb) / mach)
    p1 = tilde((pressure(rho_f, theta_f, params) - float(pressure(rb, tb, params))) / mach)
    s1 = tilde((entropy(rho_f, theta_f, params) - float(entropy(rb, tb, params))) / mach)
    kap = transport(theta_f, params)[2]
    kap0 = transport(np.asarray(tb), params)[2]
    kappa1 = tilde((kap - float(kap0)) / mach)

    theta1_raw = np.zeros(grid.dims)
    theta1_raw[fluid] = (theta_f - tb) / mach
    ell1_raw = np.zeros(grid.dims)
    ell1_raw[fluid] = (np.log(theta_f) - np.log(tb)) / mach
    theta1 = extend(GridField(grid, theta1_raw), hole_mask)
    ell1 = extend(GridField(grid, ell1_raw), hole_mask)

    return PerturbationFields(rho1, theta1, ell1, p1, s1, kappa1)
