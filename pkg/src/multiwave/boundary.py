"""Boundary node ordering, measurement sets and boundary traces.

Perimeter nodes are ordered counterclockwise starting at the bottom-left
corner: bottom -> right -> top -> left. Each side owns its first corner and
not its last (closed-open), so every node appears exactly once and there are
``2 (nx - 1) + 2 (ny - 1)`` of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import GridError, GridSpec

SIDES = ("bottom", "right", "top", "left")


def perimeter_indices(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(iy, ix)`` index arrays of the perimeter nodes in order."""
    nx, ny = grid.nx, grid.ny
    ix_b = np.arange(0, nx - 1)
    iy_r = np.arange(0, ny - 1)
    ix_t = np.arange(nx - 1, 0, -1)
    iy_l = np.arange(ny - 1, 0, -1)
    iy = np.concatenate([np.zeros_like(ix_b), iy_r, np.full_like(ix_t, ny - 1), iy_l])
    ix = np.concatenate([ix_b, np.full_like(iy_r, nx - 1), ix_t, np.zeros_like(iy_l)])
    return iy, ix


def side_slices(grid: GridSpec) -> dict[str, slice]:
    """Position of each side's nodes inside the perimeter vector."""
    nb, nr = grid.nx - 1, grid.ny - 1
    return {
        "bottom": slice(0, nb),
        "right": slice(nb, nb + nr),
        "top": slice(nb + nr, 2 * nb + nr),
        "left": slice(2 * nb + nr, 2 * nb + 2 * nr),
    }


def perimeter_arclength(grid: GridSpec) -> np.ndarray:
    """Arclength coordinate of each perimeter node, starting at 0."""
    n = 2 * (grid.nx - 1) + 2 * (grid.ny - 1)
    return np.arange(n) * grid.dx


def perimeter_coordinates(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    iy, ix = perimeter_indices(grid)
    return grid.x[ix], grid.y[iy]


def n_perimeter(grid: GridSpec) -> int:
    return 2 * (grid.nx - 1) + 2 * (grid.ny - 1)


@dataclass(frozen=True)
class GammaMask:
    """Measured part of the boundary, as flags over the perimeter nodes.

    ``t_max`` optionally limits measurements to ``[0, t_max]``.
    """

    flags: np.ndarray
    t_max: float | None = None

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        if flags.ndim != 1:
            raise GridError("GammaMask flags must be one-dimensional")
        if not flags.any():
            raise GridError("GammaMask must contain at least one node")
        object.__setattr__(self, "flags", flags)

    @classmethod
    def full(cls, grid: GridSpec) -> "GammaMask":
        return cls(np.ones(n_perimeter(grid), dtype=bool))

    @classmethod
    def from_predicate(cls, grid: GridSpec, pred, t_max=None) -> "GammaMask":
        x, y = perimeter_coordinates(grid)
        return cls(np.asarray(pred(x, y), dtype=bool), t_max=t_max)

    @classmethod
    def from_sides(cls, grid: GridSpec, sides=("bottom", "left"),
                   adjacent_fraction: float = 0.0, t_max=None) -> "GammaMask":
        """Whole ``sides`` plus ``adjacent_fraction`` of each neighbouring side.

        The extension is taken at the end of the neighbouring side that
        touches a selected side.
        """
        x0, x1, y0, y1 = grid.extent
        tol = 1e-9 * (x1 - x0)
        reach_x = adjacent_fraction * (x1 - x0) + tol
        reach_y = adjacent_fraction * (y1 - y0) + tol
        sides = set(sides)
        unknown = sides - set(SIDES)
        if unknown:
            raise GridError(f"unknown sides {sorted(unknown)}")

        def pred(x, y):
            on = {
                "bottom": np.abs(y - y0) <= tol,
                "top": np.abs(y - y1) <= tol,
                "left": np.abs(x - x0) <= tol,
                "right": np.abs(x - x1) <= tol,
            }
            keep = np.zeros_like(x, dtype=bool)
            for s in sides:
                keep |= on[s]
            if adjacent_fraction > 0:
                if "bottom" in sides:
                    keep |= (on["left"] | on["right"]) & (y - y0 <= reach_y)
                if "top" in sides:
                    keep |= (on["left"] | on["right"]) & (y1 - y <= reach_y)
                if "left" in sides:
                    keep |= (on["bottom"] | on["top"]) & (x - x0 <= reach_x)
                if "right" in sides:
                    keep |= (on["bottom"] | on["top"]) & (x1 - x <= reach_x)
            return keep

        return cls.from_predicate(grid, pred, t_max=t_max)

    def time_flags(self, grid: GridSpec) -> np.ndarray:
        if self.t_max is None:
            return np.ones(grid.nt + 1, dtype=bool)
        return grid.t <= self.t_max + 1e-12

    def as_array(self, grid: GridSpec) -> np.ndarray:
        """0/1 mask of shape ``(nt + 1, n_perimeter)``."""
        return np.outer(self.time_flags(grid), self.flags).astype(float)

    def is_full(self) -> bool:
        return bool(self.flags.all()) and self.t_max is None

    def side_fully_inside(self, grid: GridSpec, side: str) -> bool:
        return bool(self.flags[side_slices(grid)[side]].all())


@dataclass
class BoundaryTrace:
    """Samples on ``(0, T) x boundary``: rows are time levels, columns perimeter nodes.

    Values at nodes outside ``gamma`` are kept at zero.
    """

    grid: GridSpec
    values: np.ndarray
    gamma: GammaMask = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.grid.nt + 1, n_perimeter(self.grid))
        if values.shape != expected:
            raise GridError(f"trace shape {values.shape} does not match grid {expected}")
        if self.gamma is None:
            self.gamma = GammaMask.full(self.grid)
        elif self.gamma.flags.shape[0] != expected[1]:
            raise GridError("GammaMask does not match the grid perimeter")
        self.values = values * self.gamma.as_array(self.grid) if not self.gamma.is_full() else values

    def side(self, name: str) -> np.ndarray:
        """``(nt + 1, n_side)`` block of one side."""
        return self.values[:, side_slices(self.grid)[name]]

    def restrict(self, gamma: GammaMask) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.values, gamma)

    def copy(self) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.values.copy(), self.gamma)


def trace_weights(grid: GridSpec, time_unit: float | None = None) -> float:
    """Quadrature weight of one trace sample: ``time_unit * ds``.

    ``time_unit`` defaults to ``dt``.
    """
    return (grid.dt if time_unit is None else time_unit) * grid.dx


def resample_trace(fine: BoundaryTrace, coarse_grid: GridSpec,
                   gamma: GammaMask | None = None) -> BoundaryTrace:
    """Linearly interpolate a trace in time and perimeter arclength.

    The perimeters of both grids must have the same length; the arclength
    interpolation is periodic around the closed boundary.
    """
    fg = fine.grid
    if fg.dx > coarse_grid.dx * (1 + 1e-12) or fg.dt > coarse_grid.dt * (1 + 1e-12):
        raise GridError("fine grid must not be coarser than the target grid")
    if coarse_grid.T > fg.T * (1 + 1e-12):
        raise GridError(
            f"cannot extrapolate: target T={coarse_grid.T:.6g} > source T={fg.T:.6g}"
        )
    s_f = perimeter_arclength(fg)
    s_c = perimeter_arclength(coarse_grid)
    length = n_perimeter(fg) * fg.dx
    if not np.isclose(length, n_perimeter(coarse_grid) * coarse_grid.dx):
        raise GridError("grids have different perimeters")

    # time first: (nt_f+1, P_f) -> (nt_c+1, P_f)
    t_f = fg.t
    t_c = np.minimum(coarse_grid.t, t_f[-1])
    k = np.clip(np.searchsorted(t_f, t_c, side="right") - 1, 0, fg.nt - 1)
    a = ((t_c - t_f[k]) / fg.dt)[:, None]
    tmp = (1 - a) * fine.values[k] + a * fine.values[k + 1]

    # arclength, periodic
    s_ext = np.append(s_f, length)
    tmp_ext = np.concatenate([tmp, tmp[:, :1]], axis=1)
    j = np.clip(np.searchsorted(s_ext, s_c, side="right") - 1, 0, len(s_f) - 1)
    b = (s_c - s_ext[j]) / (s_ext[j + 1] - s_ext[j])
    out = (1 - b) * tmp_ext[:, j] + b * tmp_ext[:, j + 1]
    return BoundaryTrace(coarse_grid, out, gamma)
