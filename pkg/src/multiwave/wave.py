"""Leapfrog finite-difference solvers for the acoustic wave equation.

All solvers use the 5-point Laplacian. Neumann boundaries are discretized by
mirror ghost nodes, so a boundary node sees ``2 * u[1]`` in place of its
missing neighbour. Inhomogeneous Neumann data ``g`` shifts the ghost by
``2 dx g``, which adds ``2 g / dx`` to the Laplacian at that node (twice at a
corner, once per normal direction).

Fields may carry leading batch dimensions; the last two axes are always
``(ny, nx)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryTrace, GammaMask, n_perimeter, perimeter_indices
from .fields import GridError, GridSpec

log = logging.getLogger(__name__)

CHECK_EVERY = 64


class SolverDivergence(FloatingPointError):
    """A solver produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


def laplacian_stencil(u: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Mirror-Neumann 5-point Laplacian times ``dx**2``."""
    if out is None:
        out = np.empty_like(u)
    np.multiply(u, -4.0, out=out)
    out[..., 1:, :] += u[..., :-1, :]
    out[..., :-1, :] += u[..., 1:, :]
    out[..., 0, :] += u[..., 1, :]
    out[..., -1, :] += u[..., -2, :]
    out[..., :, 1:] += u[..., :, :-1]
    out[..., :, :-1] += u[..., :, 1:]
    out[..., :, 0] += u[..., :, 1]
    out[..., :, -1] += u[..., :, -2]
    return out


def laplacian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    return laplacian_stencil(np.asarray(u, dtype=float)) / grid.dx**2


def _normal_counts(grid: GridSpec) -> np.ndarray:
    """Number of outward normal directions at each perimeter node (2 at corners)."""
    iy, ix = perimeter_indices(grid)
    on_x = (ix == 0) | (ix == grid.nx - 1)
    on_y = (iy == 0) | (iy == grid.ny - 1)
    return on_x.astype(float) + on_y.astype(float)


class _Perimeter:
    def __init__(self, grid: GridSpec):
        self.iy, self.ix = perimeter_indices(grid)
        self.normals = _normal_counts(grid)

    def take(self, u):
        return u[..., self.iy, self.ix]

    def inject(self, out, g, scale):
        """Add ``scale * normals * g`` at the perimeter nodes of ``out``."""
        out[..., self.iy, self.ix] += scale * self.normals * g


def _courant(c, grid: GridSpec) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape != grid.shape:
        c = np.broadcast_to(c, grid.shape)
    grid.check_cfl(c)
    return (c * grid.dt / grid.dx) ** 2


def _check_finite(u, step, what):
    if not np.all(np.isfinite(u)):
        raise SolverDivergence(f"{what}: non-finite state at step {step}", step=step)


@dataclass
class WaveSolution:
    """Output of :func:`forward_solve`."""

    trace: BoundaryTrace
    fields: np.ndarray | None = None
    energy: np.ndarray | None = None


ENERGY_FORMS = ("staggered", "midpoint")


def discrete_energy(u_now, u_next, c, grid: GridSpec, form: str = "staggered") -> np.ndarray:
    """Discrete energy between two consecutive time levels, trapezoid weights.

    ``E = (|D_t u|^2_{c^-2} + G) / 2`` where the gradient term ``G`` is
    ``<grad_h u^n, grad_h u^{n+1}>`` for ``form="staggered"`` (the quadratic
    form leapfrog conserves exactly) or ``|grad_h (u^n + u^{n+1}) / 2|^2``
    for ``form="midpoint"``. The two differ by ``dt^2/8 |grad_h D_t u|^2``,
    which is not small for fields with grid-scale content.
    """
    if form not in ENERGY_FORMS:
        raise ValueError(f"unknown energy form {form!r}")
    w = grid.quadrature_weights() / np.asarray(c) ** 2
    kin = np.sum(w * ((u_next - u_now) / grid.dt) ** 2, axis=(-2, -1))
    if form == "midpoint":
        mid = 0.5 * (u_now + u_next)
        ex = np.diff(mid, axis=-1) ** 2
        ey = np.diff(mid, axis=-2) ** 2
    else:
        ex = np.diff(u_now, axis=-1) * np.diff(u_next, axis=-1)
        ey = np.diff(u_now, axis=-2) * np.diff(u_next, axis=-2)
    ex[..., [0, -1], :] *= 0.5
    ey[..., :, [0, -1]] *= 0.5
    pot = np.sum(ex, axis=(-2, -1)) + np.sum(ey, axis=(-2, -1))
    return 0.5 * (kin + pot)


def forward_traces(f, c, grid: GridSpec, full=False, energy=False, energy_form="staggered"):
    """Run the homogeneous-Neumann forward problem with zero initial velocity.

    Returns ``(traces, fields, energy)``; ``traces`` has shape
    ``f.shape[:-2] + (nt + 1, n_perimeter)``.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-2:] != grid.shape:
        raise GridError(f"field shape {f.shape[-2:]} does not match grid {grid.shape}")
    _check_finite(f, 0, "forward_solve")
    coef = _courant(c, grid)
    per = _Perimeter(grid)
    batch = f.shape[:-2]
    traces = np.empty(batch + (grid.nt + 1, n_perimeter(grid)))
    fields = np.empty(batch + (grid.nt + 1,) + grid.shape) if full else None
    energies = np.empty(batch + (grid.nt,)) if energy else None

    lap = np.empty_like(f)
    prev = f.copy()
    laplacian_stencil(prev, out=lap)
    cur = prev + 0.5 * coef * lap
    traces[..., 0, :] = per.take(prev)
    if full:
        fields[..., 0, :, :] = prev
    for n in range(1, grid.nt + 1):
        traces[..., n, :] = per.take(cur)
        if full:
            fields[..., n, :, :] = cur
        if energy:
            energies[..., n - 1] = discrete_energy(prev, cur, c, grid, energy_form)
        if n == grid.nt:
            break
        laplacian_stencil(cur, out=lap)
        lap *= coef
        np.negative(prev, out=prev)
        prev += cur
        prev += cur
        prev += lap
        prev, cur = cur, prev
        if n % CHECK_EVERY == 0:
            _check_finite(cur, n + 1, "forward_solve")
    _check_finite(cur, grid.nt, "forward_solve")
    return traces, fields, energies


def forward_solve(f, c, grid: GridSpec, record="trace") -> WaveSolution:
    """Solve ``u_tt = c^2 Lap u``, ``d_nu u = 0``, ``u(0) = f``, ``u_t(0) = 0``.

    ``record`` is one of ``"trace"``, ``"full"`` (all time levels) or
    ``"energy"``. The first step is ``u^1 = u^0 + dt^2/2 c^2 Lap_h u^0``.
    """
    if record not in ("trace", "full", "energy"):
        raise ValueError(f"unknown record mode {record!r}")
    traces, fields, energy = forward_traces(
        f, c, grid, full=record == "full", energy=record == "energy")
    return WaveSolution(BoundaryTrace(grid, traces), fields, energy)


def _trace_values(g, grid: GridSpec) -> np.ndarray:
    vals = g.values if isinstance(g, BoundaryTrace) else np.asarray(g, dtype=float)
    if isinstance(g, BoundaryTrace) and g.grid != grid:
        raise GridError("trace grid does not match solver grid")
    expected = (grid.nt + 1, n_perimeter(grid))
    if vals.shape[-2:] != expected:
        raise GridError(f"trace shape {vals.shape[-2:]} does not match grid {expected}")
    return vals


ADJOINT_SCHEMES = ("central", "one-sided", "transpose")


def adjoint_solve(g, c, grid: GridSpec, scheme: str = "central",
                  time_unit: float | None = None) -> np.ndarray:
    """Backward Neumann-data solve; returns ``-d_t v`` at ``t = 0``.

    ``v`` solves ``v_tt = c^2 Lap v``, ``d_nu v = g``, ``v(T) = v_t(T) = 0``.

    Parameters
    ----------
    g : BoundaryTrace or array
        Neumann data at all ``nt + 1`` levels, shape ``(..., nt + 1, P)``.
    scheme : {"central", "one-sided", "transpose"}
        ``"central"`` and ``"one-sided"`` inject ``g`` at the level the
        Laplacian is taken; ``"central"`` takes one more leapfrog step to a
        ghost level ``v^-1`` and returns ``-(v^1 - v^-1) / (2 dt)``, while
        ``"one-sided"`` returns ``-(v^1 - v^0) / dt``, which is first order
        and inaccurate near the Nyquist frequency. ``"transpose"`` injects ``g`` at the
        level being computed and returns ``-(v^1 - v^0) / dt - dt/2 c^2
        Lap_h v^1``; the result is then the exact adjoint of
        :func:`forward_traces` in the trapezoid ``c^-2`` product and the
        ``time_unit * dx`` boundary product.
    time_unit : float, optional
        Time weight of one trace sample in the boundary inner product.
        Defaults to ``dt``; the output scales linearly with it.
    """
    vals = _trace_values(g, grid)
    coef = _courant(c, grid)
    c2dt2 = coef * grid.dx**2
    per = _Perimeter(grid)
    batch = vals.shape[:-2]
    src = 2.0 / grid.dx * ((grid.dt if time_unit is None else time_unit) / grid.dt)
    lap = np.empty(batch + grid.shape)
    nt = grid.nt

    if scheme not in ADJOINT_SCHEMES:
        raise ValueError(f"unknown adjoint scheme {scheme!r}")
    if scheme in ("central", "one-sided"):
        nxt = np.zeros(batch + grid.shape)
        cur = np.zeros(batch + grid.shape)
        per.inject(cur, vals[..., nt, :], src)   # holds S g^nt, Lap v^nt = 0
        cur *= 0.5 * c2dt2
        for n in range(nt - 1, 0, -1):
            laplacian_stencil(cur, out=lap)
            per.inject(lap, vals[..., n, :], src * grid.dx**2)
            lap *= coef
            np.negative(nxt, out=nxt)
            nxt += cur
            nxt += cur
            nxt += lap
            nxt, cur = cur, nxt
            if n % CHECK_EVERY == 0:
                _check_finite(cur, n, "adjoint_solve")
        # cur = v^0, nxt = v^1 (zero when nt == 1)
        _check_finite(cur, 0, "adjoint_solve")
        if scheme == "one-sided":
            return -(nxt - cur) / grid.dt
        laplacian_stencil(cur, out=lap)
        per.inject(lap, vals[..., 0, :], src * grid.dx**2)
        lap *= coef
        # v^1 - v^-1 = 2 (v^1 - v^0) - (M v^0 + source)
        return -(2 * (nxt - cur) - lap) / (2 * grid.dt)

    if scheme == "transpose":
        # Clenshaw recursion for sum_k T_k(B) q^k, B = I + M/2, M = dt^2 c^2 Lap_h:
        # b_k = 2 b_{k+1} - b_{k+2} + M b_{k+1} + q^k, result b_0 - B b_1.
        tau = grid.dt if time_unit is None else time_unit
        qscale = tau * c2dt2[per.iy, per.ix] / grid.dt**2 * (2.0 / grid.dx)
        b2 = np.zeros(batch + grid.shape)
        b1 = np.zeros(batch + grid.shape)
        for k in range(nt, -1, -1):
            laplacian_stencil(b1, out=lap)
            lap *= coef
            np.negative(b2, out=b2)
            b2 += b1
            b2 += b1
            b2 += lap
            per.inject(b2, vals[..., k, :], qscale)
            b1, b2 = b2, b1
            if k % CHECK_EVERY == 0:
                _check_finite(b1, k, "adjoint_solve")
        laplacian_stencil(b2, out=lap)
        lap *= 0.5 * coef
        out = b1 - b2 - lap
        _check_finite(out, 0, "adjoint_solve")
        return out


def dirichlet_reversal_solve(h, terminal, c, grid: GridSpec, stop_at: float | None = None,
                             gamma: GammaMask | None = None,
                             terminal_next=None) -> np.ndarray:
    """Solve the wave equation backward from ``t = stop_at`` to ``t = 0``.

    Boundary nodes in ``gamma`` (all of them by default) are pinned to ``h``
    at every level; the remaining boundary nodes get homogeneous Neumann
    conditions. Terminal data is ``v(tau) = terminal`` with ``v_t(tau) = 0``,
    or the two levels ``(terminal, terminal_next)`` at ``(tau, tau + dt)``.
    """
    vals = _trace_values(h, grid)
    if stop_at is None:
        k0 = grid.nt
    else:
        if stop_at > grid.T * (1 + 1e-12) or stop_at < 0:
            raise GridError(f"stop_at={stop_at} outside [0, {grid.T}]")
        k0 = int(round(stop_at / grid.dt))
    coef = _courant(c, grid)
    per = _Perimeter(grid)
    flags = np.ones(n_perimeter(grid), dtype=bool) if gamma is None else gamma.flags
    piy, pix = per.iy[flags], per.ix[flags]
    batch = vals.shape[:-2]

    cur = np.array(np.broadcast_to(terminal, batch + grid.shape), dtype=float)
    _check_finite(cur, k0, "dirichlet_reversal_solve")
    cur[..., piy, pix] = vals[..., k0, :][..., flags]
    if k0 == 0:
        return cur
    lap = laplacian_stencil(cur) * coef
    if terminal_next is None:
        prev = cur + 0.5 * lap
    else:
        prev = 2 * cur - np.asarray(terminal_next, dtype=float) + lap
    prev[..., piy, pix] = vals[..., k0 - 1, :][..., flags]
    nxt, cur = cur, prev
    for n in range(k0 - 1, 0, -1):
        laplacian_stencil(cur, out=lap)
        lap *= coef
        np.negative(nxt, out=nxt)
        nxt += cur
        nxt += cur
        nxt += lap
        nxt[..., piy, pix] = vals[..., n - 1, :][..., flags]
        nxt, cur = cur, nxt
        if n % CHECK_EVERY == 0:
            _check_finite(cur, n - 1, "dirichlet_reversal_solve")
    _check_finite(cur, 0, "dirichlet_reversal_solve")
    return cur
