"""Averaged time reversal: harmonic extensions, the projection onto
``H_D(Omega_0)``, the reversal operator ``A(tau)``, its tau-average and the
Neumann-series iteration built on it.

Elliptic problems are posed on the 5-point stencil with the same mirror
ghosts as the wave solver. Multiplying the rows by the trapezoid weights
makes the system symmetric, so conjugate gradients applies to Dirichlet,
Neumann and mixed boundary conditions alike.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .boundary import BoundaryTrace, GammaMask, n_perimeter, perimeter_indices
from .fields import GridError, GridSpec, dirichlet_norm, weighted_norm
from .landweber import IterationLog, LandweberDivergence, DIVERGENCE_FACTOR
from .wave import dirichlet_reversal_solve, laplacian_stencil


class EllipticNonConvergence(ArithmeticError):
    """CG did not reach the requested relative residual."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ATRDivergence(LandweberDivergence):
    pass


@dataclass(frozen=True)
class EllipticSolveSpec:
    """Relative-residual target and iteration cap for the CG solves.

    ``kind`` is ``"dirichlet"`` (data on the whole boundary) or ``"mixed"``
    (Dirichlet on Gamma, homogeneous Neumann elsewhere). ``max_iterations``
    of ``None`` means ``10 * nx * ny``.
    """

    tolerance: float = 1e-10
    max_iterations: int | None = None
    kind: str = "dirichlet"

    def __post_init__(self):
        if not 0 < self.tolerance < 1:
            raise GridError(f"tolerance must be in (0, 1), got {self.tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise GridError("max_iterations must be positive")
        if self.kind not in ("dirichlet", "mixed"):
            raise GridError(f"unknown boundary condition kind {self.kind!r}")

    def cap(self, grid: GridSpec) -> int:
        return self.max_iterations or 10 * grid.nx * grid.ny


def _stencil_matrix(grid: GridSpec) -> sp.csr_matrix:
    """``-W * dx^2 * Lap_h`` on all nodes, with mirror-Neumann rows.

    ``W`` holds the trapezoid weights divided by ``dx^2``, so interior rows
    carry the usual ``4, -1, -1, -1, -1`` pattern and the matrix is symmetric.
    """
    ny, nx = grid.shape
    idx = np.arange(nx * ny).reshape(ny, nx)
    wx = np.ones(nx)
    wx[[0, -1]] = 0.5
    wy = np.ones(ny)
    wy[[0, -1]] = 0.5
    rows, cols, vals = [], [], []

    def couple(a, b, w):
        # one edge with weight w contributes w * (u_a - u_b)^2 to the energy
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([w, w, -w, -w])

    # horizontal edges: weight is the y-trapezoid factor of the row
    a = idx[:, :-1].ravel()
    b = idx[:, 1:].ravel()
    w = np.repeat(wy, nx - 1)
    couple(a, b, w)
    a = idx[:-1, :].ravel()
    b = idx[1:, :].ravel()
    w = np.tile(wx, ny - 1)
    couple(a, b, w)
    rows, cols, vals = (np.concatenate(v) for v in (rows, cols, vals))
    return sp.csr_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))


_MATRIX_CACHE: dict = {}


def _matrix(grid: GridSpec) -> sp.csr_matrix:
    key = (grid.nx, grid.ny)
    if key not in _MATRIX_CACHE:
        _MATRIX_CACHE.clear()
        _MATRIX_CACHE[key] = _stencil_matrix(grid)
    return _MATRIX_CACHE[key]


def _solve(grid: GridSpec, unknown: np.ndarray, pinned_values: np.ndarray,
           rhs: np.ndarray, spec: EllipticSolveSpec) -> np.ndarray:
    """Solve ``S u = rhs`` on ``unknown`` nodes with ``u = pinned_values`` elsewhere."""
    S = _matrix(grid)
    u = np.asarray(pinned_values, dtype=float).ravel().copy()
    free = np.flatnonzero(np.asarray(unknown, dtype=bool).ravel())
    if free.size == 0:
        return u.reshape(grid.shape)
    fixed = np.setdiff1d(np.arange(u.size), free, assume_unique=True)
    A = S[free][:, free]
    b = rhs.ravel()[free] - S[free][:, fixed] @ u[fixed]
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0:
        u[free] = 0.0
        return u.reshape(grid.shape)
    count = [0]

    def tick(_):
        count[0] += 1

    x, info = cg(A, b, rtol=spec.tolerance, atol=0.0, maxiter=spec.cap(grid), callback=tick)
    res = float(np.linalg.norm(A @ x - b)) / bnorm
    if info != 0 or not res <= spec.tolerance * 10:
        raise EllipticNonConvergence(
            f"CG stopped after {count[0]} iterations at relative residual {res:.3g}",
            residual=res, iterations=count[0])
    u[free] = x
    return u.reshape(grid.shape)


def _boundary_field(values, grid: GridSpec, flags=None) -> tuple[np.ndarray, np.ndarray]:
    """Scatter perimeter values into a field; also return the pinned-node mask."""
    iy, ix = perimeter_indices(grid)
    vals = np.asarray(values, dtype=float)
    if vals.shape != (n_perimeter(grid),):
        raise GridError("boundary data must have one value per perimeter node")
    if not np.all(np.isfinite(vals)):
        raise GridError("boundary data must be finite")
    pinned = np.zeros(grid.shape, dtype=bool)
    field = np.zeros(grid.shape)
    keep = np.ones(vals.size, dtype=bool) if flags is None else np.asarray(flags, dtype=bool)
    pinned[iy[keep], ix[keep]] = True
    field[iy[keep], ix[keep]] = vals[keep]
    return field, pinned


def harmonic_extension(bdata, grid: GridSpec, spec: EllipticSolveSpec = EllipticSolveSpec(),
                       gamma: GammaMask | None = None) -> np.ndarray:
    """Discrete harmonic function with the given boundary values.

    With ``spec.kind == "mixed"`` only nodes of ``gamma`` are prescribed and
    the rest of the boundary is homogeneous Neumann (the Zaremba problem).
    Nodes where Gamma meets the Neumann part count as Dirichlet.
    """
    if spec.kind == "mixed":
        if gamma is None:
            raise GridError("mixed boundary conditions need a GammaMask")
        flags = gamma.flags
    else:
        flags = None
    field, pinned = _boundary_field(bdata, grid, flags)
    return _solve(grid, ~pinned, field, np.zeros(grid.shape), spec)


def omega0_interior(chi) -> np.ndarray:
    """Nodes of the support of ``chi`` whose four neighbours are also in it."""
    inside = np.asarray(chi) > 0
    core = inside.copy()
    core[0, :] = core[-1, :] = core[:, 0] = core[:, -1] = False
    core[1:, :] &= inside[:-1, :]
    core[:-1, :] &= inside[1:, :]
    core[:, 1:] &= inside[:, :-1]
    core[:, :-1] &= inside[:, 1:]
    return core


def project_Pi0(f, omega0, grid: GridSpec, spec: EllipticSolveSpec = EllipticSolveSpec()) -> np.ndarray:
    """Dirichlet-energy projection onto fields vanishing off the interior of ``omega0``.

    Solves ``Lap_h h = Lap_h f`` on the interior nodes of ``omega0`` with
    ``h = 0`` on its rim and outside.
    """
    inner = omega0_interior(omega0)
    if not inner.any():
        raise GridError("Omega_0 has no interior nodes")
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise GridError("field must be finite")
    lap = laplacian_stencil(f)
    # only interior rows are used, where the trapezoid weight is 1
    return _solve(grid, inner, np.zeros(grid.shape), -lap, spec)


def _trace_values(h, grid: GridSpec) -> np.ndarray:
    vals = h.values if isinstance(h, BoundaryTrace) else np.asarray(h, dtype=float)
    if vals.shape != (grid.nt + 1, n_perimeter(grid)):
        raise GridError(f"trace shape {vals.shape} does not match the grid")
    return vals


def time_reversal_A(h, tau: float, c, grid: GridSpec, mode: str = "full",
                    gamma: GammaMask | None = None,
                    spec: EllipticSolveSpec = EllipticSolveSpec()) -> np.ndarray:
    """``A(tau) h``: reversal of ``h - h(tau)`` from ``tau`` plus the extension of ``h(tau)``.

    ``mode="partial"`` pins only the nodes of ``gamma`` and extends ``h(tau)``
    by the Zaremba problem.
    """
    if mode not in ("full", "partial"):
        raise GridError(f"unknown mode {mode!r}")
    if mode == "partial" and gamma is None:
        raise GridError("partial mode needs a GammaMask")
    if not 0 < tau <= grid.T * (1 + 1e-12):
        raise GridError(f"tau={tau} outside (0, T]")
    vals = _trace_values(h, grid)
    k = int(round(tau / grid.dt))
    data = np.where((np.arange(grid.nt + 1) <= k)[:, None], vals - vals[k], 0.0)
    pin = gamma if mode == "partial" else None
    v0 = dirichlet_reversal_solve(data, np.zeros(grid.shape), c, grid, stop_at=k * grid.dt,
                                  gamma=pin)
    espec = EllipticSolveSpec(spec.tolerance, spec.max_iterations,
                              "mixed" if mode == "partial" else "dirichlet")
    return v0 + harmonic_extension(vals[k], grid, espec, gamma=gamma)


def smooth_bump(s) -> np.ndarray:
    """``(s (1 - s))^3`` on ``[0, 1]``, zero outside; vanishes to second order at both ends."""
    s = np.asarray(s, dtype=float)
    return np.where((s > 0) & (s < 1), (s * (1 - s)) ** 3, 0.0)


@dataclass(frozen=True)
class AveragingSpec:
    """Quadrature of a weight ``chi(tau)`` over the time levels.

    ``levels`` are time-level indices, ``chi`` the weight samples there and
    ``quad`` the trapezoid weights (in time units). The products
    ``quad * chi`` sum to one.
    """

    levels: np.ndarray
    chi: np.ndarray
    quad: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=int)
        chi = np.asarray(self.chi, dtype=float)
        quad = np.asarray(self.quad, dtype=float)
        if not (levels.shape == chi.shape == quad.shape) or levels.ndim != 1 or levels.size == 0:
            raise GridError("levels, chi and quad must be equal-length 1-d arrays")
        if np.any(chi < 0) or np.any(quad < 0):
            raise GridError("averaging weights must be non-negative")
        total = float(np.sum(chi * quad))
        if abs(total - 1.0) > 1e-10:
            raise GridError(f"weight integral is {total}, expected 1")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "quad", quad)

    @property
    def weights(self) -> np.ndarray:
        return self.chi * self.quad

    @property
    def n_nodes(self) -> int:
        return int(self.levels.size)

    @classmethod
    def bump(cls, grid: GridSpec, start: float = 0.1, stop: float = 1.0,
             nodes: int | None = None) -> "AveragingSpec":
        """Normalized smooth bump supported in ``[start T, stop T]``.

        ``nodes=None`` uses every time level in the interval; otherwise
        ``nodes`` levels spaced as evenly as the grid allows.
        """
        if not 0 <= start < stop <= 1:
            raise GridError("need 0 <= start < stop <= 1")
        k0 = int(math.ceil(start * grid.nt - 1e-9))
        k1 = int(math.floor(stop * grid.nt + 1e-9))
        if k1 - k0 < 2:
            raise GridError("averaging window holds fewer than three time levels")
        if nodes is None:
            levels = np.arange(k0, k1 + 1)
        else:
            if nodes < 3:
                raise GridError("need at least three quadrature nodes")
            levels = np.unique(np.round(np.linspace(k0, k1, nodes)).astype(int))
        t = levels * grid.dt
        a, b = start * grid.T, stop * grid.T
        chi = smooth_bump((t - a) / (b - a))
        quad = np.zeros(t.size)
        gaps = np.diff(t)
        quad[:-1] += 0.5 * gaps
        quad[1:] += 0.5 * gaps
        total = float(np.sum(chi * quad))
        if total <= 0:
            raise GridError("weight vanishes on every quadrature node")
        return cls(levels, chi / total, quad)

    @classmethod
    def single(cls, grid: GridSpec, tau: float | None = None) -> "AveragingSpec":
        """Point mass at ``tau`` (``T`` by default)."""
        tau = grid.T if tau is None else tau
        return cls(np.array([int(round(tau / grid.dt))]), np.array([1.0]), np.array([1.0]))


def averaged_A0(h, avg: AveragingSpec, omega0, c, grid: GridSpec, mode: str = "full",
                gamma: GammaMask | None = None,
                spec: EllipticSolveSpec = EllipticSolveSpec()) -> np.ndarray:
    """``Pi_0`` of the weighted sum of the reversal terms ``v^tau(0)``.

    Each reversal started at ``tau_j`` is zero before its start, so by
    linearity the whole sum is a single backward solve from ``T`` whose
    boundary data is ``sum_j w_j H(tau_j - t) (h(t) - h(tau_j))``. The
    harmonic-extension terms are dropped: ``Pi_0`` annihilates discrete
    harmonic fields.
    """
    if mode not in ("full", "partial"):
        raise GridError(f"unknown mode {mode!r}")
    if mode == "partial" and gamma is None:
        raise GridError("partial mode needs a GammaMask")
    if np.any(avg.levels < 1) or np.any(avg.levels > grid.nt):
        raise GridError("quadrature nodes must lie in (0, T]")
    vals = _trace_values(h, grid)
    w = avg.weights
    # data(t_n) = h(t_n) * W(n) - sum_{j: k_j >= n} w_j h(k_j), W(n) = sum_{k_j >= n} w_j
    n_idx = np.arange(grid.nt + 1)
    order = np.argsort(avg.levels)
    lv, wv = avg.levels[order], w[order]
    cum_w = np.zeros(grid.nt + 2)
    cum_h = np.zeros((grid.nt + 2, vals.shape[1]))
    np.add.at(cum_w, lv, wv)
    np.add.at(cum_h, lv, wv[:, None] * vals[lv])
    cum_w = np.cumsum(cum_w[::-1])[::-1][:-1]
    cum_h = np.cumsum(cum_h[::-1], axis=0)[::-1][:-1]
    data = vals * cum_w[n_idx, None] - cum_h
    pin = gamma if mode == "partial" else None
    v0 = dirichlet_reversal_solve(data, np.zeros(grid.shape), c, grid, gamma=pin)
    return project_Pi0(v0, omega0, grid, spec)


def atr_iterate(m, steps: int, forward, A0, truth=None, data_norm=None, field_norm=None,
                energy_norm=None, callback=None):
    """Neumann series ``f_n = f_{n-1} - A0(L f_{n-1} - m)``, ``f_0 = 0``.

    ``forward`` is ``L`` and ``A0`` the averaged reversal, both on arrays.
    The log has the same columns as Landweber's, plus ``hd_error`` (relative
    Dirichlet-norm error) when ``energy_norm`` and ``truth`` are given.
    """
    if steps < 1:
        raise GridError("steps must be at least 1")
    m = np.asarray(m, dtype=float)
    data_norm = data_norm or (lambda x: float(np.linalg.norm(x)))
    field_norm = field_norm or (lambda x: float(np.linalg.norm(x)))
    tn = field_norm(truth) if truth is not None else None
    te = energy_norm(truth) if (truth is not None and energy_norm is not None) else None
    f = None
    hist = IterationLog()
    t0 = time.perf_counter()
    threshold = None
    for k in range(steps + 1):
        r = -m if f is None else forward(f) - m
        extra = {}
        if te:
            extra["hd_error"] = energy_norm((0 if f is None else f) - truth) / te
        err = math.nan if not tn else field_norm((0 if f is None else f) - truth) / tn
        hist.append(k, data_norm(r), err, time.perf_counter() - t0, **extra)
        if callback is not None and f is not None:
            callback(k, f)
        if k == steps:
            break
        update = A0(r)
        if f is None:
            f = np.zeros_like(update)
            threshold = DIVERGENCE_FACTOR * max(field_norm(update), np.finfo(float).tiny)
        f = f - update
        nf = field_norm(f)
        if not math.isfinite(nf) or nf > threshold:
            raise ATRDivergence(f"ATR iterate diverged at step {k + 1} (norm {nf:.3g})",
                                step=k + 1, log=hist)
    return f, hist


class ATROperator:
    """Closures for ATR on one ``(c, grid)`` setup with full or partial data."""

    def __init__(self, c, grid: GridSpec, omega0, avg: AveragingSpec | None = None,
                 gamma: GammaMask | None = None,
                 spec: EllipticSolveSpec = EllipticSolveSpec()):
        self.c = np.asarray(c, dtype=float)
        self.grid = grid
        self.omega0 = np.asarray(omega0)
        self.avg = AveragingSpec.bump(grid) if avg is None else avg
        self.gamma = gamma
        self.mode = "full" if gamma is None or gamma.is_full() else "partial"
        self.spec = spec

    def A0(self, h) -> np.ndarray:
        return averaged_A0(h, self.avg, self.omega0, self.c, self.grid, self.mode,
                           self.gamma, self.spec)

    def field_norm(self, f) -> float:
        return weighted_norm(f, self.c, self.grid)

    def energy_norm(self, f) -> float:
        return dirichlet_norm(f, self.grid)
