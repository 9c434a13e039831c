"""Grids, scalar fields, phantoms and norms on the square [-1, 1]^2.

Scalar fields are plain ``numpy`` arrays of shape ``grid.shape == (ny, nx)``,
indexed ``[iy, ix]`` with ``y`` increasing with the row index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_EXTENT = (-1.0, 1.0, -1.0, 1.0)

# Modified (Toft) Shepp-Logan table: (intensity, a, b, x0, y0, angle in degrees).
SHEPP_LOGAN_ELLIPSES = (
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)


class GridError(ValueError):
    """Invalid grid or field parameters."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time discretization of a square box and ``[0, T]``.

    ``T`` is always ``nt * dt``; it may exceed the time that was requested
    from :func:`make_grid` by less than one step.
    """

    nx: int
    ny: int
    dt: float
    nt: int
    extent: tuple[float, float, float, float] = DEFAULT_EXTENT

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise GridError(f"need at least 3 nodes per axis, got {self.nx}x{self.ny}")
        if self.nt < 1:
            raise GridError(f"need at least one time step, got nt={self.nt}")
        if not self.dt > 0:
            raise GridError(f"dt must be positive, got {self.dt}")
        if not math.isclose(self.dx, self.dy, rel_tol=1e-12):
            raise GridError(f"cells must be square (dx={self.dx}, dy={self.dy})")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def dx(self) -> float:
        x0, x1, _, _ = self.extent
        return (x1 - x0) / (self.nx - 1)

    @property
    def dy(self) -> float:
        _, _, y0, y1 = self.extent
        return (y1 - y0) / (self.ny - 1)

    @property
    def T(self) -> float:
        return self.nt * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.extent[0], self.extent[1], self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.extent[2], self.extent[3], self.ny)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` coordinate arrays of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y)

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoid weights: ``dx*dy`` inside, halved on edges, quartered at corners."""
        wx = np.full(self.nx, self.dx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny, self.dy)
        wy[[0, -1]] *= 0.5
        return np.outer(wy, wx)

    def max_stable_dt(self, c_max: float) -> float:
        return self.dx / (math.sqrt(2.0) * c_max)

    def check_cfl(self, c) -> None:
        c_max = float(np.max(c))
        limit = self.max_stable_dt(c_max)
        if self.dt > limit * (1 + 1e-12):
            raise GridError(
                f"CFL violated: dt={self.dt:.6g} > dx/(sqrt(2) c_max)={limit:.6g}"
            )

    def to_dict(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "dt": self.dt,
            "nt": self.nt,
            "extent": list(self.extent),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(nx=int(d["nx"]), ny=int(d["ny"]), dt=float(d["dt"]),
                   nt=int(d["nt"]), extent=tuple(float(v) for v in d["extent"]))


def make_grid(nx, extent=DEFAULT_EXTENT, T=1.0, c_max=1.0, dt=None) -> GridSpec:
    """Build a square grid with the CFL-limited time step.

    ``dt`` defaults to ``dx / (sqrt(2) c_max)``; an explicit ``dt`` must not
    exceed it. ``nt = ceil(T / dt)``.
    """
    if nx < 3:
        raise GridError(f"nx must be >= 3, got {nx}")
    if not T > 0:
        raise GridError(f"T must be positive, got {T}")
    if not c_max > 0:
        raise GridError(f"c_max must be positive, got {c_max}")
    x0, x1, y0, y1 = (float(v) for v in extent)
    if not math.isclose(x1 - x0, y1 - y0, rel_tol=1e-12) or x1 <= x0:
        raise GridError(f"extent must be a non-degenerate square, got {extent}")
    dx = (x1 - x0) / (nx - 1)
    limit = dx / (math.sqrt(2.0) * c_max)
    if dt is None:
        dt = limit
    elif dt > limit * (1 + 1e-12):
        raise GridError(f"dt={dt} violates CFL limit {limit}")
    nt = max(1, math.ceil(T / dt - 1e-9))
    return GridSpec(nx=nx, ny=nx, dt=dt, nt=nt, extent=(x0, x1, y0, y1))


def shepp_logan_value(x, y, ellipses=SHEPP_LOGAN_ELLIPSES) -> np.ndarray:
    """Evaluate the ellipse stack exactly at points ``(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for rho, a, b, x0, y0, deg in ellipses:
        th = math.radians(deg)
        cos, sin = math.cos(th), math.sin(th)
        xr = (x - x0) * cos + (y - y0) * sin
        yr = -(x - x0) * sin + (y - y0) * cos
        out += rho * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    return out


def render_shepp_logan(grid: GridSpec, supersample: int = 4) -> np.ndarray:
    """Rasterize the Shepp-Logan phantom with ``supersample**2`` samples per node.

    Each node value is the average of the phantom over the node's cell
    ``[x - dx/2, x + dx/2] x [y - dy/2, y + dy/2]``, sampled at a uniform
    ``supersample x supersample`` sub-grid of cell midpoints.
    """
    s = int(supersample)
    if s < 1 or s != supersample:
        raise GridError(f"supersample must be a positive integer, got {supersample}")
    offsets = ((np.arange(s) + 0.5) / s - 0.5)
    X, Y = grid.mesh()
    acc = np.zeros(grid.shape)
    for ox in offsets * grid.dx:
        for oy in offsets * grid.dy:
            acc += shepp_logan_value(X + ox, Y + oy)
    return acc / (s * s)


def render_gaussians(grid: GridSpec, blobs) -> np.ndarray:
    """Sum of isotropic Gaussians ``amp * exp(-|x - center|^2 / width^2)``."""
    X, Y = grid.mesh()
    out = np.zeros(grid.shape)
    for (cx, cy), width, amp in blobs:
        if not width > 0:
            raise GridError(f"Gaussian width must be positive, got {width}")
        out += amp * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / width**2)
    return out


def make_speed(grid: GridSpec, model: str = "constant", c0: float = 1.0,
               c_in: float = 1.0, c_out: float = 1.5, half_side: float = 0.5,
               center=(0.0, 0.0)) -> np.ndarray:
    """Sound speed on the grid.

    Models
    ------
    ``constant``
        ``c0`` everywhere.
    ``trig``
        ``1 + 0.3 sin(pi x) + 0.2 cos(pi y)``.
    ``square-jump``
        ``c_in`` inside the axis-aligned square of half side ``half_side``
        centred at ``center``, ``c_out`` outside.
    """
    X, Y = grid.mesh()
    if model == "constant":
        c = np.full(grid.shape, float(c0))
    elif model == "trig":
        c = 1.0 + 0.3 * np.sin(np.pi * X) + 0.2 * np.cos(np.pi * Y)
    elif model == "square-jump":
        inside = (np.abs(X - center[0]) <= half_side) & (np.abs(Y - center[1]) <= half_side)
        c = np.where(inside, float(c_in), float(c_out))
    else:
        raise GridError(f"unknown speed model {model!r}")
    if not np.all(c > 0):
        raise GridError(f"speed model {model!r} is not positive everywhere")
    return c


def interior_cutoff(grid: GridSpec, margin_fraction: float = 0.03) -> np.ndarray:
    """Indicator of the interior square at ``margin_fraction`` of the side.

    The frame width in nodes is ``floor(margin_fraction * (n - 1))``, so a 3%
    margin on a 101-node axis zeroes 3 nodes per side and keeps 95.
    """
    if not 0 <= margin_fraction < 0.5:
        raise GridError(f"margin_fraction must be in [0, 0.5), got {margin_fraction}")
    kx = int(math.floor(margin_fraction * (grid.nx - 1) + 1e-9))
    ky = int(math.floor(margin_fraction * (grid.ny - 1) + 1e-9))
    chi = np.zeros(grid.shape)
    chi[ky:grid.ny - ky, kx:grid.nx - kx] = 1.0
    return chi


def weighted_norm(f, c, grid: GridSpec) -> float:
    """Norm in ``L^2(Omega, c^-2 dx)`` with trapezoid weights."""
    w = grid.quadrature_weights() / np.asarray(c) ** 2
    return float(np.sqrt(np.sum(w * np.asarray(f) ** 2)))


def weighted_inner(f, g, c, grid: GridSpec) -> float:
    w = grid.quadrature_weights() / np.asarray(c) ** 2
    return float(np.sum(w * np.asarray(f) * np.asarray(g)))


def relative_error(f, f_ref, c, grid: GridSpec) -> float:
    ref = weighted_norm(f_ref, c, grid)
    if ref == 0:
        raise GridError("reference field has zero norm")
    return weighted_norm(np.asarray(f) - np.asarray(f_ref), c, grid) / ref


def dirichlet_energy(f, grid: GridSpec) -> float:
    """Squared discrete Dirichlet norm, forward differences over all edges.

    Edges lying on the outer boundary carry half weight, which makes the
    quadratic form the summation-by-parts partner of the mirror-Neumann
    5-point Laplacian.
    """
    f = np.asarray(f)
    ex = np.diff(f, axis=-1) ** 2
    ey = np.diff(f, axis=-2) ** 2
    ex[..., [0, -1], :] *= 0.5
    ey[..., :, [0, -1]] *= 0.5
    return float(np.sum(ex) + np.sum(ey))


def dirichlet_inner(f, g, grid: GridSpec) -> float:
    f = np.asarray(f)
    g = np.asarray(g)
    ex = np.diff(f, axis=-1) * np.diff(g, axis=-1)
    ey = np.diff(f, axis=-2) * np.diff(g, axis=-2)
    ex[..., [0, -1], :] *= 0.5
    ey[..., :, [0, -1]] *= 0.5
    return float(np.sum(ex) + np.sum(ey))


def dirichlet_norm(f, grid: GridSpec) -> float:
    return math.sqrt(dirichlet_energy(f, grid))
