"""Cell-centred finite volumes on a rectangle with Robin/Dirichlet boundaries.

Fields are ``(nx, ny)`` arrays of cell averages, ``z[i, j]`` sitting at
``((i + 1/2) hx, (j + 1/2) hy)``.  Face quantities live in :class:`FaceField`
with an x-face array of shape ``(nx + 1, ny)`` and a y-face array of shape
``(nx, ny + 1)``.

The boundary condition ``dz/dn + z = g`` is eliminated through the face value
``z_b``: from ``(z_b - z_P) / (h/2) = g - z_b`` the outward normal derivative
is ``kappa (g - z_P)`` with ``kappa = 1 / (1 + h/2)``.  In Dirichlet mode
``z_b = g`` and ``kappa = 2 / h``.  Every flux is a face flux, so the sum of
cell divergences telescopes to a boundary sum exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class Grid:
    nx: int = 32
    ny: int = 32
    lx: float = 1.0
    ly: float = 1.0
    boundary_kind: str = "robin"

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError(f"grid needs nx, ny >= 8, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain extents must be positive")
        if self.boundary_kind not in ("robin", "dirichlet"):
            raise ValueError(f"unknown boundary kind {self.boundary_kind!r}")

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def size(self):
        return self.nx * self.ny

    @property
    def cell_area(self):
        return self.hx * self.hy

    @property
    def extent(self):
        return (self.lx, self.ly)

    def centers(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def x_faces(self):
        """Midpoints of the x-faces (normal along x), shape ``(nx+1, ny)``."""
        x = np.arange(self.nx + 1) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def y_faces(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    @property
    def kappa_x(self):
        half = 0.5 * self.hx
        return 1.0 / half if self.boundary_kind == "dirichlet" else 1.0 / (1.0 + half)

    @property
    def kappa_y(self):
        half = 0.5 * self.hy
        return 1.0 / half if self.boundary_kind == "dirichlet" else 1.0 / (1.0 + half)

    def zeros(self):
        return np.zeros(self.shape)


@dataclass
class FaceField:
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def constant(cls, grid: Grid, value):
        return cls(np.full((grid.nx + 1, grid.ny), float(value)), np.full((grid.nx, grid.ny + 1), float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fx, fy=None):
        """Sample ``fx`` on x-faces and ``fy`` (default ``fx``) on y-faces."""
        fy = fx if fy is None else fy
        X, Y = grid.x_faces()
        Xy, Yy = grid.y_faces()
        return cls(np.asarray(fx(X, Y), dtype=float) * np.ones_like(X), np.asarray(fy(Xy, Yy), dtype=float) * np.ones_like(Xy))

    def __add__(self, other):
        if isinstance(other, FaceField):
            return FaceField(self.x + other.x, self.y + other.y)
        return FaceField(self.x + other, self.y + other)

    def min(self):
        return min(self.x.min(), self.y.min())


@dataclass
class Boundary:
    """Boundary data on the four edges, one value per boundary face.

    ``west``/``east`` have length ``ny``; ``south``/``north`` length ``nx``.
    """

    west: np.ndarray
    east: np.ndarray
    south: np.ndarray
    north: np.ndarray

    @classmethod
    def constant(cls, grid: Grid, value=0.0):
        v = float(value)
        return cls(np.full(grid.ny, v), np.full(grid.ny, v), np.full(grid.nx, v), np.full(grid.nx, v))

    @classmethod
    def zero(cls, grid: Grid):
        return cls.constant(grid, 0.0)

    @classmethod
    def from_function(cls, grid: Grid, g):
        """Evaluate ``g(x, y)`` at the boundary face midpoints."""
        xc = (np.arange(grid.nx) + 0.5) * grid.hx
        yc = (np.arange(grid.ny) + 0.5) * grid.hy
        full = lambda v, n: np.asarray(v, dtype=float) * np.ones(n)  # noqa: E731
        return cls(
            full(g(np.zeros(grid.ny), yc), grid.ny),
            full(g(np.full(grid.ny, grid.lx), yc), grid.ny),
            full(g(xc, np.zeros(grid.nx)), grid.nx),
            full(g(xc, np.full(grid.nx, grid.ly)), grid.nx),
        )

    @classmethod
    def trace(cls, grid: Grid, z):
        """Boundary-adjacent cell values of ``z``."""
        return cls(z[0, :].copy(), z[-1, :].copy(), z[:, 0].copy(), z[:, -1].copy())

    def __add__(self, other):
        return Boundary(self.west + other.west, self.east + other.east, self.south + other.south, self.north + other.north)

    def scaled(self, k):
        return Boundary(k * self.west, k * self.east, k * self.south, k * self.north)


# ---------------------------------------------------------------------------
# operators


def _check_faces(A: FaceField):
    if A.min() < 0:
        raise ContractError(f"negative face diffusivity {A.min():.3e}")


def diffusive_face_fluxes(grid: Grid, A: FaceField, z, g: Boundary):
    """x- and y-directed face fluxes ``A dz/dx`` and ``A dz/dy``."""
    fx = np.empty((grid.nx + 1, grid.ny))
    fy = np.empty((grid.nx, grid.ny + 1))
    fx[1:-1] = A.x[1:-1] * (z[1:] - z[:-1]) / grid.hx
    fy[:, 1:-1] = A.y[:, 1:-1] * (z[:, 1:] - z[:, :-1]) / grid.hy
    kx, ky = grid.kappa_x, grid.kappa_y
    # outward normal derivative kappa (g - z_P); x-directed flux flips sign on the west/south edges
    fx[0] = -A.x[0] * kx * (g.west - z[0])
    fx[-1] = A.x[-1] * kx * (g.east - z[-1])
    fy[:, 0] = -A.y[:, 0] * ky * (g.south - z[:, 0])
    fy[:, -1] = A.y[:, -1] * ky * (g.north - z[:, -1])
    return fx, fy


def _face_divergence(grid, fx, fy):
    return (fx[1:] - fx[:-1]) / grid.hx + (fy[:, 1:] - fy[:, :-1]) / grid.hy


def divergence_of_diffusive_flux(grid: Grid, A: FaceField, z, g: Boundary):
    """``div(A grad z)`` with the boundary relation eliminated."""
    _check_faces(A)
    fx, fy = diffusive_face_fluxes(grid, A, z, g)
    return _face_divergence(grid, fx, fy)


def divergence_of_drift(grid: Grid, C: FaceField):
    """Conservative ``div C`` from normal components on faces."""
    return _face_divergence(grid, C.x, C.y)


def boundary_flux_terms(grid: Grid, A: FaceField, z, g: Boundary, C: FaceField):
    """Outward flux per boundary face, already multiplied by the face length."""
    kx, ky = grid.kappa_x, grid.kappa_y
    west = (A.x[0] * kx * (g.west - z[0]) - C.x[0]) * grid.hy
    east = (A.x[-1] * kx * (g.east - z[-1]) + C.x[-1]) * grid.hy
    south = (A.y[:, 0] * ky * (g.south - z[:, 0]) - C.y[:, 0]) * grid.hx
    north = (A.y[:, -1] * ky * (g.north - z[:, -1]) + C.y[:, -1]) * grid.hx
    return west, east, south, north


def boundary_flux_integral(grid: Grid, A: FaceField, z, g: Boundary, C: FaceField):
    """Discrete ``int_{dOmega} (A dz/dn + C.n)``.

    Equals the cell sum of the two divergences times the cell area, up to
    round-off.  Corner cells own one face on each adjacent edge, so no corner
    weighting is needed.
    """
    terms = boundary_flux_terms(grid, A, z, g, C)
    return float(sum(np.sum(t) for t in terms))


# ---------------------------------------------------------------------------
# norms


def l2_norm(grid: Grid, z):
    return float(np.sqrt(np.sum(np.square(z)) * grid.cell_area))


def mass(grid: Grid, z):
    return float(np.sum(z) * grid.cell_area)


def h1_seminorm(grid: Grid, z):
    """``|grad z|`` in L2 from interior face differences."""
    gx = np.diff(z, axis=0) / grid.hx
    gy = np.diff(z, axis=1) / grid.hy
    return float(np.sqrt((np.sum(gx * gx) + np.sum(gy * gy)) * grid.cell_area))


# ---------------------------------------------------------------------------
# linear-system form of the diffusion operator


class DiffusionStencil:
    """Matrix-free ``L0`` with ``div(A grad z) = L0 z + source(g)``.

    ``L0`` is symmetric negative semi-definite (negative definite as soon as
    some boundary face carries positive diffusivity), which is what lets the
    implicit steps use conjugate gradients.
    """

    def __init__(self, grid: Grid, A: FaceField):
        _check_faces(A)
        self.grid = grid
        hx, hy = grid.hx, grid.hy
        tx = A.x / (hx * hx)
        ty = A.y / (hy * hy)
        tx[0] = A.x[0] * grid.kappa_x / hx
        tx[-1] = A.x[-1] * grid.kappa_x / hx
        ty[:, 0] = A.y[:, 0] * grid.kappa_y / hy
        ty[:, -1] = A.y[:, -1] * grid.kappa_y / hy
        self.tx = tx
        self.ty = ty
        self.diagonal = -(tx[1:] + tx[:-1] + ty[:, 1:] + ty[:, :-1])

    def apply(self, z):
        tx, ty = self.tx, self.ty
        out = self.diagonal * z
        cx = tx[1:-1] * z[1:]
        out[:-1] += cx
        out[1:] += tx[1:-1] * z[:-1]
        out[:, :-1] += ty[:, 1:-1] * z[:, 1:]
        out[:, 1:] += ty[:, 1:-1] * z[:, :-1]
        return out

    def source(self, g: Boundary):
        s = np.zeros(self.grid.shape)
        s[0] += self.tx[0] * g.west
        s[-1] += self.tx[-1] * g.east
        s[:, 0] += self.ty[:, 0] * g.south
        s[:, -1] += self.ty[:, -1] * g.north
        return s


# ---------------------------------------------------------------------------
# serialisation


def save_field(path, grid: Grid, z):
    """Flat CSV: a ``# nx,ny,lx,ly`` header, then one value per line, row-major."""
    z = np.asarray(z, dtype=float)
    if z.shape != grid.shape:
        raise ValueError(f"field shape {z.shape} does not match grid {grid.shape}")
    with open(path, "w") as fh:
        fh.write("# nx,ny,lx,ly\n")
        fh.write(f"# {grid.nx},{grid.ny},{grid.lx!r},{grid.ly!r}\n")
        for v in z.ravel(order="C"):
            fh.write(f"{float(v)!r}\n")


def load_field(path):
    """Inverse of :func:`save_field`; returns ``(grid_dims, values)``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("#") or not lines[1].startswith("#"):
        raise ValueError(f"{path}: missing '# nx,ny,lx,ly' header")
    nx, ny, lx, ly = (s.strip() for s in lines[1][1:].split(","))
    nx, ny, lx, ly = int(nx), int(ny), float(lx), float(ly)
    vals = np.array([float(s) for s in lines[2:] if s.strip()])
    if vals.size != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} values, found {vals.size}")
    return (nx, ny, lx, ly), vals.reshape(nx, ny)
