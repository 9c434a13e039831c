"""The measurement operator, its adjoint and the normal operator.

``apply_L`` maps an initial pressure to its boundary trace on the measured
set; ``apply_Lstar`` back-propagates a trace with the Neumann-data wave
solver. Both are linear, and :class:`MeasurementOperator` packages them as
array-to-array closures for the iterative solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryTrace, GammaMask, SIDES, side_slices
from .fields import GridError, GridSpec, weighted_inner, weighted_norm
from .wave import adjoint_solve, forward_traces


@dataclass(frozen=True)
class FilterSpec:
    """Per-side Fourier multiplier on boundary data.

    ``cutoff`` is the kept fraction of the temporal Nyquist frequency;
    ``cone_speed`` keeps only ``|omega_t| >= cone_speed * |omega_s|`` (no
    cone cut when ``None``); ``taper`` is the raised-cosine roll-off width
    as a fraction of the cutoff frequency.
    """

    cutoff: float = 0.5
    cone_speed: float | None = None
    taper: float = 0.1

    def __post_init__(self):
        if not 0 < self.cutoff <= 1:
            raise GridError(f"cutoff must be in (0, 1], got {self.cutoff}")
        if self.taper < 0:
            raise GridError("taper must be non-negative")
        if self.cone_speed is not None and self.cone_speed < 0:
            raise GridError("cone_speed must be non-negative")


def final_cut_weight(grid: GridSpec, eps_steps: int = 2) -> np.ndarray:
    """Indicator of ``[0, T - eps_steps * dt]`` on the time levels."""
    w = np.ones(grid.nt + 1)
    if eps_steps > 0:
        w[grid.nt + 1 - eps_steps:] = 0.0
    return w


def cosine_taper_weight(grid: GridSpec, fraction: float = 0.1) -> np.ndarray:
    """1 up to ``(1 - fraction) T``, then a cosine roll-off to 0 at ``T``."""
    t = grid.t
    start = (1 - fraction) * grid.T
    w = np.ones_like(t)
    late = t > start
    w[late] = 0.5 * (1 + np.cos(np.pi * (t[late] - start) / (grid.T - start)))
    return w


@dataclass
class MeasurementConfig:
    """Measured set, interior cutoff, time weight and optional data filter.

    ``time_unit`` is the time weight of one trace sample in the boundary
    inner product (``dt`` when ``None``). ``scheme`` selects the adjoint
    discretization, see :func:`multiwave.wave.adjoint_solve`.
    """

    gamma: GammaMask
    interior_chi: np.ndarray
    time_weight: np.ndarray
    data_filter: FilterSpec | None = None
    scheme: str = "central"
    time_unit: float | None = None

    def __post_init__(self):
        tw = np.asarray(self.time_weight, dtype=float)
        chi = np.asarray(self.interior_chi, dtype=float)
        if np.any(tw < 0) or np.any(tw > 1):
            raise GridError("time weights must lie in [0, 1]")
        if np.any(chi < 0) or np.any(chi > 1):
            raise GridError("interior cutoff must lie in [0, 1]")
        self.time_weight = tw
        self.interior_chi = chi

    @classmethod
    def default(cls, grid: GridSpec, gamma: GammaMask | None = None, chi=None,
                time_weight=None, **kw) -> "MeasurementConfig":
        return cls(
            gamma=GammaMask.full(grid) if gamma is None else gamma,
            interior_chi=np.ones(grid.shape) if chi is None else chi,
            time_weight=final_cut_weight(grid) if time_weight is None else time_weight,
            **kw,
        )

    def data_mask(self, grid: GridSpec) -> np.ndarray:
        """Product of the Gamma indicator and the time weight, ``(nt + 1, P)``."""
        if self.time_weight.shape != (grid.nt + 1,):
            raise GridError("time weight length does not match the grid")
        return self.gamma.as_array(grid) * self.time_weight[:, None]


def trace_inner(a, b, grid: GridSpec, time_unit=None) -> float:
    w = (grid.dt if time_unit is None else time_unit) * grid.dx
    return float(w * np.sum(np.asarray(a) * np.asarray(b)))


def trace_norm(a, grid: GridSpec, time_unit=None) -> float:
    return float(np.sqrt(max(trace_inner(a, a, grid, time_unit), 0.0)))


def _values(m):
    return m.values if isinstance(m, BoundaryTrace) else np.asarray(m, dtype=float)


def filter_mask(n_t: int, n_s: int, dt: float, ds: float, spec: FilterSpec) -> np.ndarray:
    """Real, non-negative multiplier on the ``fft2`` grid of one side."""
    wt = np.abs(2 * np.pi * np.fft.fftfreq(n_t, dt))[:, None]
    ws = np.abs(2 * np.pi * np.fft.fftfreq(n_s, ds))[None, :]
    wc = spec.cutoff * np.pi / dt
    width = spec.taper * wc

    def rolloff(excess):
        if width == 0:
            return (excess <= 0).astype(float)
        r = np.clip(excess / width, 0.0, 1.0)
        return 0.5 * (1 + np.cos(np.pi * r))

    mask = rolloff(wt - wc) * np.ones_like(ws)
    if spec.cone_speed is not None:
        mask = mask * rolloff(spec.cone_speed * ws - wt)
    return mask


def apply_filter(m, spec: FilterSpec, grid: GridSpec | None = None):
    """Filter each side's ``(time, arclength)`` block with :func:`filter_mask`."""
    if isinstance(m, BoundaryTrace):
        return BoundaryTrace(m.grid, apply_filter(m.values, spec, m.grid), m.gamma)
    vals = np.asarray(m, dtype=float)
    out = np.empty_like(vals)
    for name in SIDES:
        sl = side_slices(grid)[name]
        block = vals[..., sl]
        mask = filter_mask(block.shape[-2], block.shape[-1], grid.dt, grid.dx, spec)
        spectrum = np.fft.fft2(block, axes=(-2, -1)) * mask
        out[..., sl] = np.fft.ifft2(spectrum, axes=(-2, -1)).real
    return out


def apply_L(f, c, grid: GridSpec, cfg: MeasurementConfig) -> BoundaryTrace:
    """Boundary trace of the forward solution, masked by Gamma and the time weight."""
    traces, _, _ = forward_traces(f, c, grid)
    return BoundaryTrace(grid, traces * cfg.data_mask(grid), cfg.gamma)


def apply_Lstar(g, c, grid: GridSpec, cfg: MeasurementConfig) -> np.ndarray:
    """Adjoint: mask, optional filter, backward Neumann solve, interior cutoff."""
    mask = cfg.data_mask(grid)
    vals = _values(g) * mask
    if cfg.data_filter is not None:
        vals = apply_filter(vals, cfg.data_filter, grid) * mask
    out = adjoint_solve(vals, c, grid, scheme=cfg.scheme, time_unit=cfg.time_unit)
    return out * cfg.interior_chi


def apply_normal(f, c, grid: GridSpec, cfg: MeasurementConfig) -> np.ndarray:
    """``chi L* P L chi f`` with ``P`` the data mask (and filter)."""
    return apply_Lstar(apply_L(np.asarray(f) * cfg.interior_chi, c, grid, cfg).values,
                       c, grid, cfg)


def add_noise(m: BoundaryTrace, sigma: float, seed: int = 0) -> BoundaryTrace:
    """Add i.i.d. ``N(0, sigma^2)`` samples on the measured set."""
    if sigma < 0:
        raise GridError("sigma must be non-negative")
    if sigma == 0:
        return m.copy()
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=m.values.shape)
    return BoundaryTrace(m.grid, m.values + noise * m.gamma.as_array(m.grid), m.gamma)


def add_side_swap_perturbation(m: BoundaryTrace, src_side: str, dst_side: str) -> BoundaryTrace:
    """Add the data of ``src_side`` onto ``dst_side``, node by node along arclength."""
    if src_side == dst_side:
        raise GridError("source and destination sides must differ")
    grid = m.grid
    slices = side_slices(grid)
    for s in (src_side, dst_side):
        if s not in slices:
            raise GridError(f"unknown side {s!r}")
        if not m.gamma.side_fully_inside(grid, s):
            raise GridError(f"side {s!r} is not fully inside Gamma")
    src = m.values[:, slices[src_side]]
    dst = slices[dst_side]
    if src.shape[1] != dst.stop - dst.start:
        raise GridError("sides have different node counts")
    out = m.values.copy()
    out[:, dst] += src
    return BoundaryTrace(grid, out, m.gamma)


class MeasurementOperator:
    """Array-level closures for one ``(c, grid, cfg)`` setup.

    ``forward(f) = L(chi f)`` and ``adjoint(g) = chi L* g``, so
    ``adjoint(forward(f))`` is :func:`apply_normal`.
    """

    def __init__(self, c, grid: GridSpec, cfg: MeasurementConfig):
        self.c = np.asarray(c, dtype=float)
        self.grid = grid
        self.cfg = cfg
        self._mask = cfg.data_mask(grid)

    def forward(self, f) -> np.ndarray:
        traces, _, _ = forward_traces(np.asarray(f) * self.cfg.interior_chi, self.c, self.grid)
        return traces * self._mask

    def adjoint(self, g) -> np.ndarray:
        return apply_Lstar(g, self.c, self.grid, self.cfg)

    def normal(self, f) -> np.ndarray:
        return self.adjoint(self.forward(f))

    def data_norm(self, g) -> float:
        return trace_norm(g, self.grid, self.cfg.time_unit)

    def field_norm(self, f) -> float:
        return weighted_norm(f, self.c, self.grid)

    def field_inner(self, f, h) -> float:
        return weighted_inner(f, h, self.c, self.grid)
