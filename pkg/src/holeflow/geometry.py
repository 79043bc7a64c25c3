"""Perforated box domains: hole placement, masks, cutoff fields, scaling laws.

The box [0, L]^d is perforated by balls of radius 0.9 eps^alpha (the
obstacles), each compactly contained in a guard ball of radius eps^alpha.
Guard balls padded to radius eps^alpha + eps/2 are required to be mutually
disjoint and contained in the box, which caps the hole count at
|Omega| / (V_d (eps^alpha + eps/2)^d) with V_d the unit-ball volume.

Around every hole lives a smooth radial cutoff phi_n: identically 1 on the
obstacle, 0 outside the guard ball, quintic (C^2) in the annulus between.
The aggregate field g = 1 - sum_n phi_n and its gradient obey power laws in
eps whose exponents are verified by analytic radial quadrature, never from
rasterized data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .errors import GeometryError, ResolutionError
from .grids import FLUID, GUARD, HOLE, Grid, GridField, save_raw

HOLE_SHAPE_FRACTION = 0.9  # obstacle radius / guard radius


@dataclass(frozen=True)
class ScalingParams:
    """Small parameter and exponents: hole spacing ~ eps, hole size eps^alpha,
    Mach number eps^m, Froude number eps^{m/2}."""

    epsilon: float
    alpha: float
    m: float
    d: int = 3

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise GeometryError("epsilon must lie in (0, 1)")
        if self.alpha <= 0 or self.m <= 0:
            raise GeometryError("alpha and m must be positive")
        if self.d not in (2, 3):
            raise GeometryError("d must be 2 or 3")

    @property
    def mach(self) -> float:
        return self.epsilon ** self.m

    @property
    def froude(self) -> float:
        return self.epsilon ** (self.m / 2.0)

    @property
    def guard_radius(self) -> float:
        return self.epsilon ** self.alpha

    @property
    def hole_radius(self) -> float:
        return HOLE_SHAPE_FRACTION * self.guard_radius

    @property
    def disjoint_radius(self) -> float:
        return self.guard_radius + 0.5 * self.epsilon

    @property
    def theory_regime(self) -> bool:
        """Hypothesis 3 < alpha < m of the asymptotic theory."""
        return 3.0 < self.alpha < self.m


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def unit_sphere_area(d: int) -> float:
    return d * unit_ball_volume(d)


def hole_count_bound(scaling: ScalingParams, L: float) -> int:
    """Largest count compatible with disjoint padded balls filling [0, L]^d."""
    return int(math.floor(L ** scaling.d
                          / (unit_ball_volume(scaling.d) * scaling.disjoint_radius ** scaling.d)))


@dataclass
class PerforatedGeometry:
    """Hole centers plus derived radii and cell classification helpers."""

    scaling: ScalingParams
    L: float
    centers: np.ndarray          # (N, d)
    placement: str = "lattice"
    seed: int = 0
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    @property
    def N(self) -> int:
        return int(self.centers.shape[0])

    @property
    def d(self) -> int:
        return self.scaling.d

    @property
    def hole_radius(self) -> float:
        return self.scaling.hole_radius

    @property
    def guard_radius(self) -> float:
        return self.scaling.guard_radius

    @property
    def disjoint_radius(self) -> float:
        return self.scaling.disjoint_radius

    @property
    def domain_volume(self) -> float:
        return self.L ** self.d

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.centers)
        return self._tree

    def nearest_center_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point (shape (..., d)) to the nearest hole center."""
        if self.N == 0:
            return np.full(points.shape[:-1], np.inf)
        flat = points.reshape(-1, self.d)
        dist, _ = self.tree().query(flat, k=1)
        return dist.reshape(points.shape[:-1])

    def classify(self, grid: Grid) -> np.ndarray:
        """Per-cell mask: FLUID/HOLE/GUARD by the cell-center distance."""
        pts = np.stack(grid.center_mesh(), axis=-1)
        dist = self.nearest_center_distance(pts)
        mask = np.full(grid.dims, FLUID, dtype=np.uint8)
        mask[dist <= self.guard_radius] = GUARD
        mask[dist <= self.hole_radius] = HOLE
        return mask

    def analytic_hole_volume(self) -> float:
        return self.N * unit_ball_volume(self.d) * self.hole_radius ** self.d

    def export_json(self, path) -> None:
        payload = {
            "epsilon": self.scaling.epsilon,
            "alpha": self.scaling.alpha,
            "m": self.scaling.m,
            "d": self.d,
            "L": self.L,
            "N": self.N,
            "hole_radius": self.hole_radius,
            "guard_radius": self.guard_radius,
            "disjoint_radius": self.disjoint_radius,
            "placement": self.placement,
            "seed": self.seed,
            "centers": self.centers.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)

    def export_mask(self, path, grid: Grid) -> None:
        save_raw(path, self.classify(grid), grid.spacing, grid.origin)


def build_perforation(scaling: ScalingParams, L: float = 1.0,
                      placement_mode: str = "lattice", seed: int = 0,
                      target_count: int | None = None,
                      centers: np.ndarray | None = None) -> PerforatedGeometry:
    """Place holes in [0, L]^d.

    Lattice mode tiles a cubic lattice of spacing 2 (eps^alpha + eps/2),
    centered in the box so padded balls stay inside.  Random mode
    rejection-samples centers under the same disjointness constraint (hole
    distribution need not be periodic).  Fixed mode takes explicit centers
    (an admissible non-periodic family: padded balls must be mutually
    disjoint and every guard ball must fit in the box, but the padding may
    poke out).  Two builds with the same seed give identical centers.
    """
    rD = scaling.disjoint_radius
    if placement_mode == "fixed":
        if centers is None:
            raise GeometryError("fixed placement needs explicit centers")
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.shape[1] != scaling.d:
            raise GeometryError("center dimensionality mismatch")
        rg = scaling.guard_radius
        if np.any(centers - rg < 0) or np.any(centers + rg > L):
            raise GeometryError("guard ball sticks out of the box")
        for i in range(centers.shape[0]):
            for j in range(i + 1, centers.shape[0]):
                if np.linalg.norm(centers[i] - centers[j]) < 2.0 * rD:
                    raise GeometryError("padded balls overlap")
        return PerforatedGeometry(scaling, L, centers, "fixed", seed)

    if 2.0 * rD > L:
        raise GeometryError(
            f"no hole fits: disjoint radius {rD:.4g} exceeds half the box size {L / 2:.4g}")

    if placement_mode == "lattice":
        s = 2.0 * rD
        K = int(math.floor((L - 2.0 * rD) / s)) + 1
        margin = 0.5 * (L - ((K - 1) * s + 2.0 * rD))
        axis = margin + rD + s * np.arange(K)
        mesh = np.meshgrid(*([axis] * scaling.d), indexing="ij")
        centers = np.stack([m.ravel() for m in mesh], axis=-1)
        if target_count is not None and target_count < centers.shape[0]:
            centers = centers[:target_count]
    elif placement_mode == "random":
        rng = np.random.default_rng(seed)
        want = target_count if target_count is not None else hole_count_bound(scaling, L)
        accepted: list[np.ndarray] = []
        attempts = 0
        max_attempts = 200 * max(1, want)
        while len(accepted) < want and attempts < max_attempts:
            attempts += 1
            cand = rng.uniform(rD, L - rD, size=scaling.d)
            if all(np.linalg.norm(cand - c) >= 2.0 * rD for c in accepted):
                accepted.append(cand)
        centers = np.array(accepted) if accepted else np.zeros((0, scaling.d))
    else:
        raise GeometryError(f"unknown placement mode {placement_mode!r}")

    return PerforatedGeometry(scaling, L, centers, placement_mode, seed)


# ---------------------------------------------------------------------------
# cutoff profile
# ---------------------------------------------------------------------------

def smoothstep5(t):
    """Quintic 0->1 ramp, C^2 at both ends; value 1/2 at t = 1/2."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 + t * (-15.0 + 6.0 * t))


def smoothstep5_deriv(t):
    t = np.clip(t, 0.0, 1.0)
    return 30.0 * t ** 2 * (1.0 - t) ** 2


def cutoff_profile(r, r_plateau: float, r_outer: float):
    """Radial cutoff: 1 for r <= r_plateau, quintic down to 0 at r_outer."""
    t = (np.asarray(r, dtype=float) - r_plateau) / (r_outer - r_plateau)
    return 1.0 - smoothstep5(t)


def required_cutoff_spacing(scaling: ScalingParams) -> float:
    """Largest grid spacing resolving the guard annulus (four cells across)."""
    return (scaling.guard_radius - scaling.hole_radius) / 4.0


def cutoff_g(geom: PerforatedGeometry, grid: Grid) -> GridField:
    """Aggregate cutoff g = 1 - sum_n phi_n sampled at cell centers.

    g is 1 away from all guard balls, 0 on the obstacles, and transitions
    through a radial quintic on each guard annulus.  Raises when the grid
    does not resolve the annulus.
    """
    h_req = required_cutoff_spacing(geom.scaling)
    if grid.spacing > h_req:
        raise ResolutionError("grid does not resolve the cutoff annulus", h_req)
    pts = np.stack(grid.center_mesh(), axis=-1)
    dist = geom.nearest_center_distance(pts)
    g = 1.0 - cutoff_profile(dist, geom.hole_radius, geom.guard_radius)
    # guard balls are disjoint, so the nearest hole is the only contributor
    return GridField(grid, g)


def _annulus_integral(integrand, r0: float, r1: float, d: int) -> float:
    """integral over the annulus r0 < r < r1 of integrand(t), t the ramp coordinate."""
    w = r1 - r0

    def f(t):
        r = r0 + w * t
        return integrand(t) * r ** (d - 1)

    val, _ = integrate.quad(f, 0.0, 1.0, limit=200)
    return unit_sphere_area(d) * w * val


def single_hole_cutoff_norms(scaling: ScalingParams, p: float) -> tuple[float, float]:
    """(||phi_n||_{L^p}, ||grad phi_n||_{L^p}) for one hole, by radial quadrature."""
    r0, r1 = scaling.hole_radius, scaling.guard_radius
    d = scaling.d
    if math.isinf(p):
        return 1.0, float(np.max(smoothstep5_deriv(np.linspace(0, 1, 2001)))) / (r1 - r0)
    ball = unit_ball_volume(d) * r0 ** d  # phi == 1 on the obstacle
    ann = _annulus_integral(lambda t: (1.0 - smoothstep5(t)) ** p, r0, r1, d)
    norm_phi = (ball + ann) ** (1.0 / p)
    gann = _annulus_integral(lambda t: (smoothstep5_deriv(t) / (r1 - r0)) ** p, r0, r1, d)
    return norm_phi, gann ** (1.0 / p)


def cutoff_norms(geom: PerforatedGeometry, p: float) -> tuple[float, float]:
    """(||1-g||_{L^p}, ||grad g||_{L^p}) over the whole domain, analytic in r.

    Guard balls are disjoint, so p-th powers add across the N holes.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    n1, ng = single_hole_cutoff_norms(geom.scaling, p)
    if math.isinf(p):
        return (1.0 if geom.N else 0.0), (ng if geom.N else 0.0)
    scale = geom.N ** (1.0 / p)
    return scale * n1, scale * ng


def asymptotic_hole_count(scaling: ScalingParams, domain_volume: float = 1.0) -> float:
    """Counting law N(eps) ~ |Omega| / (V_d (eps/2)^d), the small-eps limit of the
    disjointness bound (real-valued; the lattice floor is deliberately dropped so
    that sweeps probe the exponent, not the integer granularity)."""
    return domain_volume / (unit_ball_volume(scaling.d) * (scaling.epsilon / 2.0) ** scaling.d)


def theory_cutoff_norms(epsilon: float, alpha: float, p: float, d: int = 3,
                        domain_volume: float = 1.0) -> tuple[float, float]:
    """Cutoff norms with the asymptotic counting law instead of an achieved count.

    Used by the exponent sweeps in the theory regime, where 3 < alpha and the
    obstacle radius is far below any affordable grid; only slopes of the
    returned values are meaningful.
    """
    scaling = ScalingParams(epsilon=epsilon, alpha=alpha, m=max(alpha + 1.0, 4.0), d=d)
    n1, ng = single_hole_cutoff_norms(scaling, p)
    if math.isinf(p):
        return 1.0, ng
    scale = asymptotic_hole_count(scaling, domain_volume) ** (1.0 / p)
    return scale * n1, scale * ng


@dataclass(frozen=True)
class HoleMeasure:
    analytic: float        # N * |U| * (hole radius)^d
    rasterized: float      # cell-count estimate on the supplied grid (nan without a grid)
    bound_ratio: float     # analytic / eps^{d (alpha - 1)}


def hole_measure(geom: PerforatedGeometry, grid: Grid | None = None) -> HoleMeasure:
    """Total obstacle volume and its ratio to the predicted eps^{d(alpha-1)} law."""
    analytic = geom.analytic_hole_volume()
    if grid is not None:
        mask = geom.classify(grid)
        rasterized = float(np.count_nonzero(mask == HOLE)) * grid.cell_volume
    else:
        rasterized = float("nan")
    s = geom.scaling
    return HoleMeasure(analytic, rasterized,
                       analytic / s.epsilon ** (s.d * (s.alpha - 1.0)))
