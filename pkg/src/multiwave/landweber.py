"""Landweber iteration and step-size theory for linear inverse problems.

The engine never looks at grids: it takes ``forward`` and ``adjoint``
callables acting on arrays, so the same code runs on small matrices and on
the wave-equation operator.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e12


class LandweberDivergence(FloatingPointError):
    """The iterate blew up; ``step`` is the iteration where it was detected."""

    def __init__(self, message, step, log=None):
        super().__init__(message)
        self.step = step
        self.log = log


@dataclass(frozen=True)
class StoppingRule:
    """Discrepancy principle: stop once ``||L f_k - m|| < C * delta``."""

    C: float
    delta: float

    def __post_init__(self):
        if not self.C > 1:
            raise ValueError(f"C must exceed 1, got {self.C}")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")


@dataclass
class LandweberConfig:
    gamma: float
    max_steps: int = 50
    f0: np.ndarray | None = None
    stop: StoppingRule | None = None
    log_every: int = 1

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"step size must be positive, got {self.gamma}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass
class IterationLog:
    """Per-step residuals, errors against the truth, and wall time."""

    steps: list[int] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)
    rel_error: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    extra: dict[str, list[float]] = field(default_factory=dict)
    stopped_at: int | None = None

    def append(self, step, residual, rel_error, seconds, **extra):
        self.steps.append(int(step))
        self.residual.append(float(residual))
        self.rel_error.append(float(rel_error))
        self.seconds.append(float(seconds))
        for k, v in extra.items():
            self.extra.setdefault(k, []).append(float(v))

    def __len__(self):
        return len(self.steps)

    def error_at(self, step: int) -> float:
        return self.rel_error[self.steps.index(step)]

    def to_csv(self, path, timings: bool = True) -> None:
        """Write the log; ``timings=False`` writes 0 seconds so reruns are byte-identical."""
        keys = sorted(self.extra)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "residual", "rel_error", "seconds", *keys])
            for i, s in enumerate(self.steps):
                w.writerow([s, repr(self.residual[i]), repr(self.rel_error[i]),
                            f"{self.seconds[i] if timings else 0.0:.6f}", *(repr(self.extra[k][i]) for k in keys)])

    @classmethod
    def from_csv(cls, path) -> "IterationLog":
        out = cls()
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            extra = {k: float(v) for k, v in r.items()
                     if k not in ("step", "residual", "rel_error", "seconds")}
            out.append(int(r["step"]), float(r["residual"]), float(r["rel_error"]),
                       float(r["seconds"]), **extra)
        return out


@dataclass(frozen=True)
class SpectralBounds:
    """``mu2 <= L*L <= L2norm`` with ``mu2`` the bottom of the spectrum."""

    mu2: float
    L2norm: float
    approximate: bool = False

    def __post_init__(self):
        if self.mu2 < 0 or self.mu2 > self.L2norm * (1 + 1e-12):
            raise ValueError(f"need 0 <= mu2 <= L2norm, got {self.mu2}, {self.L2norm}")


def _default_norm(x):
    return float(np.linalg.norm(np.ravel(x)))


def iterate(m, cfg: LandweberConfig, forward, adjoint, truth=None,
            data_norm=_default_norm, field_norm=_default_norm, callback=None):
    """Run ``f_k = f_{k-1} - gamma L*(L f_{k-1} - m)``.

    Parameters
    ----------
    m : array
        Measured data.
    forward, adjoint : callable
        ``L`` and ``L*`` on arrays.
    truth : array, optional
        Ground truth; when given the log records ``||f_k - truth|| / ||truth||``.
    data_norm, field_norm : callable
        Norms of the data and image spaces.

    Returns
    -------
    f : array
        The last iterate.
    log : IterationLog
        Entry ``k`` holds the residual ``||L f_k - m||`` and the error of
        ``f_k``; step 0 is the initial guess.
    """
    m = np.asarray(m, dtype=float)
    f = np.zeros_like(adjoint(np.zeros_like(m))) if cfg.f0 is None else np.array(cfg.f0, dtype=float)
    truth_norm = field_norm(truth) if truth is not None else None
    if truth_norm == 0:
        truth_norm = None
    history = IterationLog()
    t0 = time.perf_counter()
    threshold = None

    def err(x):
        if truth is None:
            return math.nan
        if truth_norm is None:
            return field_norm(x - truth)
        return field_norm(x - truth) / truth_norm

    for k in range(cfg.max_steps + 1):
        r = forward(f) - m
        res = data_norm(r)
        if k % cfg.log_every == 0 or k == cfg.max_steps:
            history.append(k, res, err(f), time.perf_counter() - t0)
        if callback is not None:
            callback(k, f)
        if cfg.stop is not None and res < cfg.stop.C * cfg.stop.delta:
            history.stopped_at = k
            if not history.steps or history.steps[-1] != k:
                history.append(k, res, err(f), time.perf_counter() - t0)
            break
        if k == cfg.max_steps:
            break
        update = adjoint(r)
        if threshold is None:
            scale = max(field_norm(f), cfg.gamma * field_norm(update), np.finfo(float).tiny)
            threshold = DIVERGENCE_FACTOR * scale
        f = f - cfg.gamma * update
        norm_f = field_norm(f)
        if not math.isfinite(norm_f) or norm_f > threshold:
            raise LandweberDivergence(
                f"Landweber iterate diverged at step {k + 1} (norm {norm_f:.3g})",
                step=k + 1, log=history)
    return f, history


def iterate_with_guess(m, f0, cfg: LandweberConfig, forward, adjoint, **kw):
    """Landweber iteration started from the initial guess ``f0``."""
    cfg = LandweberConfig(gamma=cfg.gamma, max_steps=cfg.max_steps, f0=f0,
                          stop=cfg.stop, log_every=cfg.log_every)
    return iterate(m, cfg, forward, adjoint, **kw)


def gamma_star(b: SpectralBounds) -> float:
    """Step size ``2 / (mu^2 + ||L||^2)`` that maximizes the contraction gap."""
    if not b.L2norm > 0:
        raise ValueError("L2norm must be positive")
    return 2.0 / (b.mu2 + b.L2norm)


def contraction_norm(gamma: float, b: SpectralBounds) -> float:
    """``||I - gamma L*L|| = max(|1 - gamma ||L||^2|, 1 - gamma mu^2)``."""
    return max(abs(1 - gamma * b.L2norm), 1 - gamma * b.mu2)


def convergence_rate(gamma: float, b: SpectralBounds) -> float:
    """``nu = min(gamma mu^2, 2 - gamma ||L||^2)``; non-positive means no contraction."""
    return min(gamma * b.mu2, 2 - gamma * b.L2norm)


def estimate_bounds(normal_op, shape, trials: int = 1, mu2: float = 0.0,
                    inner=None, rtol: float = 1e-4, max_apps: int = 200,
                    seed: int = 0) -> SpectralBounds:
    """Power iteration for ``||L||^2``.

    ``inner`` is the image-space inner product (Euclidean by default). When
    the Rayleigh quotient does not settle to ``rtol`` within ``max_apps``
    applications the best value is returned with ``approximate=True``.
    """
    if inner is None:
        def inner(a, b):
            return float(np.vdot(a, b))
    rng = np.random.default_rng(seed)
    best = 0.0
    converged = False
    per_trial = max(1, max_apps // max(1, trials))
    for _ in range(max(1, trials)):
        x = rng.standard_normal(shape)
        x /= math.sqrt(inner(x, x))
        prev = None
        for _ in range(per_trial):
            y = normal_op(x)
            rq = inner(x, y)
            ny = math.sqrt(max(inner(y, y), 0.0))
            if ny == 0:
                break
            x = y / ny
            if prev is not None and abs(rq - prev) <= rtol * abs(rq):
                converged = True
                best = max(best, rq)
                break
            prev = rq
            best = max(best, rq)
    return SpectralBounds(mu2=min(mu2, best), L2norm=best, approximate=not converged)


def g_N(gamma: float, N: int, lambdas) -> np.ndarray:
    """``(1 - (1 - gamma lambda^2)^N) / lambda`` with the value 0 at ``lambda = 0``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    lam = np.asarray(lambdas, dtype=float)
    out = np.zeros_like(lam)
    nz = lam != 0
    x = gamma * lam[nz] ** 2
    small = x < 1
    # 1 - (1 - x)^N without cancellation for small x
    num = np.where(small, -np.expm1(N * np.log1p(-np.where(small, x, 0.0))), 1 - (1 - x) ** N)
    out[nz] = num / lam[nz]
    return out


def g_N_curve(gamma: float, N: int, lambdas) -> np.ndarray:
    return g_N(gamma, N, lambdas)


def g_N_max(gamma: float, N: int, samples: int = 2048) -> tuple[float, float]:
    """Location and value of the maximum of ``g_N`` on ``[0, sqrt(2/gamma)]``."""
    hi = math.sqrt(2.0 / gamma)
    lam = np.linspace(0.0, hi, samples)
    vals = g_N(gamma, N, lam)
    i = int(np.argmax(vals))
    if 0 < i < samples - 1:
        # golden-section refinement inside the bracketing samples
        res = minimize_scalar(lambda s: -float(g_N(gamma, N, [s])[0]),
                              bracket=(lam[i - 1], lam[i], lam[i + 1]), method="golden",
                              options={"xtol": 1e-10})
        if -res.fun >= vals[i]:
            return float(res.x), float(-res.fun)
    return float(lam[i]), float(vals[i])
