"""Uniform structured grids, cell/staggered fields, and the raw dump format.

Scalars (density, temperature, pressure) live at cell centers.  Velocities
use the staggered (MAC) layout: the component along axis ``a`` lives on the
faces orthogonal to ``a``, so the discrete divergence

    div(u)_c = sum_a (u_a[..., i+1, ...] - u_a[..., i, ...]) / h

telescopes exactly.  A velocity built from a corner stream function psi via
u = (d_y psi, -d_x psi) therefore has divergence equal to zero to round-off.

Dump format: an 80-byte ASCII header (magic, dtype, dims, spacing, origin)
followed by the row-major (C-order) array bytes.  Masks use dtype u1, field
data f8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

HEADER_BYTES = 80
_MAGIC = "HFDUMP1"

FLUID, HOLE, GUARD = 0, 1, 2


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid over the box prod_a [origin_a, origin_a + n_a*h]."""

    dims: tuple[int, ...]
    spacing: float
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.origin:
            object.__setattr__(self, "origin", (0.0,) * len(self.dims))
        if len(self.origin) != len(self.dims):
            raise ShapeError("origin/dims rank mismatch")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple(n * self.spacing for n in self.dims)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.d

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.dims))

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.dims[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.spacing

    def axis_corners(self, axis: int) -> np.ndarray:
        n = self.dims[axis]
        return self.origin[axis] + np.arange(n + 1) * self.spacing

    def center_mesh(self) -> list[np.ndarray]:
        return list(np.meshgrid(*[self.axis_centers(a) for a in range(self.d)], indexing="ij"))

    def corner_mesh(self) -> list[np.ndarray]:
        return list(np.meshgrid(*[self.axis_corners(a) for a in range(self.d)], indexing="ij"))

    def face_mesh(self, axis: int) -> list[np.ndarray]:
        """Coordinates of face midpoints for the velocity component along ``axis``."""
        coords = []
        for a in range(self.d):
            coords.append(self.axis_corners(a) if a == axis else self.axis_centers(a))
        return list(np.meshgrid(*coords, indexing="ij"))

    def face_shape(self, axis: int) -> tuple[int, ...]:
        return tuple(n + 1 if a == axis else n for a, n in enumerate(self.dims))


@dataclass
class GridField:
    """Scalar (or per-cell vector) data on a :class:`Grid`.

    ``kind`` is 'cell' for cell-centered data, 'corner' for corner data
    (stream functions).
    """

    grid: Grid
    data: np.ndarray
    kind: str = "cell"

    def __post_init__(self):
        expected = {"cell": self.grid.dims,
                    "corner": tuple(n + 1 for n in self.grid.dims)}
        if self.kind not in expected:
            raise ShapeError(f"unknown field kind {self.kind!r}")
        shp = tuple(self.data.shape)
        if shp != expected[self.kind] and shp != expected[self.kind] + (self.grid.d,):
            raise ShapeError(f"data shape {shp} does not match {self.kind} layout "
                             f"on dims {self.grid.dims}")

    def copy(self) -> "GridField":
        return GridField(self.grid, self.data.copy(), self.kind)


@dataclass
class MACField:
    """Staggered-face vector field; ``faces[a]`` holds the component along axis ``a``."""

    grid: Grid
    faces: list[np.ndarray]
    stream: np.ndarray | None = None  # corner stream function, when one exists (d=2)

    def __post_init__(self):
        if len(self.faces) != self.grid.d:
            raise ShapeError("one face array per axis required")
        for a, f in enumerate(self.faces):
            if tuple(f.shape) != self.grid.face_shape(a):
                raise ShapeError(f"face array {a} has shape {f.shape}, "
                                 f"expected {self.grid.face_shape(a)}")

    def copy(self) -> "MACField":
        return MACField(self.grid, [f.copy() for f in self.faces],
                        None if self.stream is None else self.stream.copy())

    def divergence(self) -> np.ndarray:
        h = self.grid.spacing
        div = np.zeros(self.grid.dims)
        for a, f in enumerate(self.faces):
            div += np.diff(f, axis=a) / h
        return div

    def to_cell_vector(self) -> np.ndarray:
        """Average face values to cell centers; shape dims + (d,)."""
        out = np.empty(self.grid.dims + (self.grid.d,))
        for a, f in enumerate(self.faces):
            lo = axslice(f, a, slice(None, -1))
            hi = axslice(f, a, slice(1, None))
            out[..., a] = 0.5 * (lo + hi)
        return out

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(f))) if f.size else 0.0) for f in self.faces)


def axslice(a: np.ndarray, axis: int, sl: slice) -> np.ndarray:
    idx = [slice(None)] * a.ndim
    idx[axis] = sl
    return a[tuple(idx)]


def pad_noslip(f: np.ndarray, axis: int) -> np.ndarray:
    """Ghost layer with the negated edge value (wall value zero by averaging)."""
    lo = -axslice(f, axis, slice(0, 1))
    hi = -axslice(f, axis, slice(-1, None))
    return np.concatenate([lo, f, hi], axis=axis)


def pad_mirror(f: np.ndarray, axis: int) -> np.ndarray:
    """Ghost layer copying the edge value (zero normal derivative)."""
    lo = axslice(f, axis, slice(0, 1))
    hi = axslice(f, axis, slice(-1, None))
    return np.concatenate([lo, f, hi], axis=axis)


def midpoint_avg(f: np.ndarray, axis: int) -> np.ndarray:
    lo = axslice(f, axis, slice(None, -1))
    hi = axslice(f, axis, slice(1, None))
    return 0.5 * (lo + hi)


def zeros_mac(grid: Grid) -> MACField:
    return MACField(grid, [np.zeros(grid.face_shape(a)) for a in range(grid.d)])


def mac_from_stream(psi: np.ndarray, grid: Grid) -> MACField:
    """Perpendicular gradient of a corner stream function (d=2 only).

    u = d_y psi on x-faces, v = -d_x psi on y-faces; the staggered divergence
    of the result cancels exactly.
    """
    if grid.d != 2:
        raise ShapeError("stream-function construction is two-dimensional")
    if psi.shape != (grid.dims[0] + 1, grid.dims[1] + 1):
        raise ShapeError("stream function must live on grid corners")
    h = grid.spacing
    u = np.diff(psi, axis=1) / h        # (nx+1, ny)
    v = -np.diff(psi, axis=0) / h       # (nx, ny+1)
    return MACField(grid, [u, v], stream=psi.copy())


def avg_to_faces(c: np.ndarray, axis: int, boundary: str = "copy") -> np.ndarray:
    """Average cell data to the faces orthogonal to ``axis``.

    boundary='copy' repeats the adjacent cell value on wall faces,
    boundary='zero' puts 0 there.
    """
    shp = list(c.shape)
    shp[axis] += 1
    out = np.zeros(shp)
    lo = axslice(c, axis, slice(None, -1))
    hi = axslice(c, axis, slice(1, None))
    axslice(out, axis, slice(1, -1))[...] = 0.5 * (lo + hi)
    if boundary == "copy":
        axslice(out, axis, slice(0, 1))[...] = axslice(c, axis, slice(0, 1))
        axslice(out, axis, slice(-1, None))[...] = axslice(c, axis, slice(-1, None))
    return out


def grad_on_faces(c: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Difference quotient of cell data on interior faces; wall faces get 0."""
    shp = list(c.shape)
    shp[axis] += 1
    out = np.zeros(shp)
    axslice(out, axis, slice(1, -1))[...] = np.diff(c, axis=axis) / h
    return out


def cell_gradient(c: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient at cell centers (one-sided at walls); dims + (d,)."""
    grads = np.gradient(c, h, edge_order=1)
    if c.ndim == 1:
        grads = [grads]
    return np.stack(grads, axis=-1)


def cell_vector_gradient(vec: np.ndarray, h: float) -> np.ndarray:
    """Gradient of each component of a cell field; dims + (ncomp, d) with
    [..., i, j] = d_j v_i.  The component count need not match the space
    dimension (scalars ride along as a single component)."""
    ncomp = vec.shape[-1]
    d = vec.ndim - 1
    out = np.empty(vec.shape[:-1] + (ncomp, d))
    for i in range(ncomp):
        out[..., i, :] = cell_gradient(vec[..., i], h)
    return out


# ---------------------------------------------------------------------------
# raw dump IO
# ---------------------------------------------------------------------------

_DTYPES = {"f8": np.float64, "u1": np.uint8}


def save_raw(path, data: np.ndarray, spacing: float, origin=()) -> None:
    """Write array as raw bytes behind an 80-byte text header."""
    data = np.ascontiguousarray(data)
    if data.dtype == np.float64:
        tag = "f8"
    elif data.dtype == np.uint8:
        tag = "u1"
    else:
        raise ValueError(f"unsupported dump dtype {data.dtype}")
    if not origin:
        origin = (0.0,) * data.ndim
    dims = "x".join(str(n) for n in data.shape)
    org = ",".join(f"{x:.8g}" for x in origin)
    header = f"{_MAGIC} {tag} {dims} h={spacing:.10g} o={org}"
    if len(header) > HEADER_BYTES:
        raise ValueError("header does not fit in 80 bytes")
    blob = header.ljust(HEADER_BYTES).encode("ascii")
    with open(path, "wb") as fh:
        fh.write(blob)
        fh.write(data.tobytes(order="C"))


def load_raw(path):
    """Read a raw dump; returns (array, spacing, origin)."""
    with open(path, "rb") as fh:
        header = fh.read(HEADER_BYTES).decode("ascii").strip()
        body = fh.read()
    parts = header.split()
    if not parts or parts[0] != _MAGIC:
        raise ValueError(f"{path}: not a holeflow dump")
    tag, dims_s = parts[1], parts[2]
    dims = tuple(int(t) for t in dims_s.split("x"))
    spacing = float(parts[3][2:])
    origin = tuple(float(t) for t in parts[4][2:].split(","))
    arr = np.frombuffer(body, dtype=_DTYPES[tag]).reshape(dims).copy()
    return arr, spacing, origin


def save_field(path, f: GridField) -> None:
    save_raw(path, f.data.astype(np.float64), f.grid.spacing, f.grid.origin)


def load_field(path) -> GridField:
    arr, spacing, origin = load_raw(path)
    d = len(arr.shape)
    if d >= 2 and arr.shape[-1] == d - 1:  # per-cell vector dump
        grid = Grid(arr.shape[:-1], spacing, origin[: d - 1])
    else:
        grid = Grid(arr.shape, spacing, origin)
    return GridField(grid, arr)
