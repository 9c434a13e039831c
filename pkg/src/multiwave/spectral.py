"""Dense assembly and eigen-analysis of the discrete measurement operator.

Matrices are expressed in orthonormal coordinates: an image-space vector
``f`` on the interior nodes is represented by ``sqrt(w) * f`` with ``w`` the
trapezoid weights over ``c^2``, and a trace by ``sqrt(dt * dx) * m``. In
these coordinates the Euclidean transpose of ``L`` is its adjoint, ``L^T L``
is symmetric and the power spectrum of a field obeys Parseval.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .fields import GridError, GridSpec

KINDS = ("L", "normal-via-transpose", "normal-via-wave-adjoint", "generic")


class SpectralError(ArithmeticError):
    pass


@dataclass
class AssembledOperator:
    """Dense matrix of a linear operator restricted to the interior nodes.

    ``basis`` holds the flat (row-major) indices of the interior nodes, in
    column order.
    """

    matrix: np.ndarray
    basis: np.ndarray
    kind: str = "generic"
    grid: GridSpec | None = None
    sqrt_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GridError(f"unknown operator kind {self.kind!r}")
        self.basis = np.asarray(self.basis, dtype=int)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != self.basis.size:
            raise GridError("column count must equal the number of interior nodes")

    @property
    def dim(self) -> int:
        return int(self.basis.size)

    def embed(self, x) -> np.ndarray:
        """Field with ``x`` on the interior nodes and zero elsewhere."""
        out = np.zeros(int(np.prod(self.grid.shape)))
        out[self.basis] = x
        return out.reshape(self.grid.shape)

    def restrict(self, f) -> np.ndarray:
        return np.asarray(f, dtype=float).ravel()[self.basis]


def interior_basis(mask) -> np.ndarray:
    mask = np.asarray(mask)
    if not np.any(mask > 0):
        raise GridError("interior mask is empty")
    return np.flatnonzero(mask.ravel() > 0)


def assemble(op, mask, grid: GridSpec, kind: str = "generic", batch: int = 64) -> AssembledOperator:
    """Apply ``op`` to each interior unit vector; column ``j`` is ``op(e_j)``.

    ``op`` must accept a stack of fields with a leading batch axis. The
    output of ``op`` is flattened, restricting to the interior when its
    shape is the grid shape.
    """
    basis = interior_basis(mask)
    cols = []
    n_all = int(np.prod(grid.shape))
    for start in range(0, basis.size, batch):
        idx = basis[start:start + batch]
        E = np.zeros((idx.size, n_all))
        E[np.arange(idx.size), idx] = 1.0
        out = np.asarray(op(E.reshape((idx.size,) + grid.shape)), dtype=float)
        out = out.reshape(idx.size, -1)
        if out.shape[1] == n_all:
            out = out[:, basis]
        cols.append(out)
    return AssembledOperator(np.concatenate(cols, axis=0).T.copy(), basis, kind, grid)


def image_sqrt_weights(c, grid: GridSpec, basis) -> np.ndarray:
    w = grid.quadrature_weights() / np.asarray(c, dtype=float) ** 2
    return np.sqrt(w.ravel()[basis])


def measurement_matrix(measure, c, grid: GridSpec, mask, time_unit=None,
                       batch: int = 64) -> AssembledOperator:
    """``L`` in orthonormal coordinates: ``sqrt(dt dx) L diag(w)^{-1/2}``."""
    A = assemble(measure, mask, grid, "L", batch)
    sw = image_sqrt_weights(c, grid, A.basis)
    tau = grid.dt if time_unit is None else time_unit
    A.matrix *= np.sqrt(tau * grid.dx)
    A.matrix /= sw[None, :]
    A.sqrt_weights = sw
    return A


def normal_from_L(L: AssembledOperator) -> AssembledOperator:
    """``L^T L`` (symmetric by construction)."""
    if L.kind != "L":
        raise GridError("expected an assembled L")
    G = L.matrix.T @ L.matrix
    G = 0.5 * (G + G.T)
    return AssembledOperator(G, L.basis, "normal-via-transpose", L.grid, L.sqrt_weights)


def wave_normal_matrix(normal, c, grid: GridSpec, mask, batch: int = 64) -> AssembledOperator:
    """Normal operator through the wave adjoint, similarity-transformed to orthonormal coordinates."""
    A = assemble(normal, mask, grid, "normal-via-wave-adjoint", batch)
    sw = image_sqrt_weights(c, grid, A.basis)
    A.matrix = sw[:, None] * A.matrix / sw[None, :]
    A.sqrt_weights = sw
    return A


@dataclass
class SpectralReport:
    """Eigenvalues (ascending real parts), optional imaginary parts and eigenvectors.

    ``vectors`` columns are orthonormal eigenvectors in the coordinates of
    the assembled matrix; they are only stored on the symmetric path.
    """

    eigenvalues: np.ndarray
    imag: np.ndarray
    vectors: np.ndarray | None = None
    kind: str = "generic"
    basis: np.ndarray | None = None
    grid: GridSpec | None = None
    sqrt_weights: np.ndarray | None = None
    summary: dict = field(default_factory=dict)

    @property
    def lambda_max(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def tail(self, rel: float = 1e-10) -> np.ndarray:
        """Indices of eigenvalues at most ``rel * lambda_max``."""
        return np.flatnonzero(self.eigenvalues <= rel * self.lambda_max)

    def vector_field(self, j: int) -> np.ndarray:
        """Eigenvector ``j`` as a field on the grid, in nodal values."""
        if self.vectors is None:
            raise SpectralError("report holds no eigenvectors")
        x = self.vectors[:, j]
        if self.sqrt_weights is not None:
            x = x / self.sqrt_weights
        out = np.zeros(int(np.prod(self.grid.shape)))
        out[self.basis] = x
        return out.reshape(self.grid.shape)


def _summarize(vals, lam_max):
    return {
        "lambda_min": float(vals[0]),
        "lambda_max": float(vals[-1]),
        "n": int(vals.size),
        "count_below_1e-10": int(np.sum(vals <= 1e-10 * lam_max)),
        "count_below_1e-6": int(np.sum(vals <= 1e-6 * lam_max)),
    }


def eigendecompose(A: AssembledOperator, symmetric: bool | None = None) -> SpectralReport:
    """Full eigendecomposition; ``eigh`` for symmetric kinds, ``eig`` otherwise."""
    M = np.asarray(A.matrix, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise GridError("eigendecompose needs a square matrix; form L^T L first")
    if symmetric is None:
        symmetric = A.kind == "normal-via-transpose"
    try:
        if symmetric:
            vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
            imag = np.zeros_like(vals)
        else:
            w = np.linalg.eigvals(M)
            order = np.argsort(w.real)
            vals, imag, vecs = w.real[order], w.imag[order], None
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigendecomposition failed: {exc}") from exc
    lam_max = float(np.max(np.abs(vals))) if vals.size else 0.0
    rep = SpectralReport(vals, imag, vecs, A.kind, A.basis, A.grid, A.sqrt_weights,
                         _summarize(vals, lam_max))
    if not symmetric:
        rep.summary["max_imag_over_real"] = float(np.max(np.abs(imag)) / max(np.max(np.abs(vals)), 1e-300))
    return rep


def power_spectrum(f, report: SpectralReport, check: float = 1e-6) -> np.ndarray:
    """``|c_j|^2`` of ``f`` on the eigenbasis; ``f`` is a field or interior vector."""
    if report.vectors is None:
        raise SpectralError("power spectrum needs eigenvectors (symmetric path)")
    Q = report.vectors
    gram_err = np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1])))
    if gram_err > check:
        raise SpectralError(f"eigenbasis is not orthonormal (defect {gram_err:.2g})")
    f = np.asarray(f, dtype=float)
    x = f.ravel()[report.basis] if f.size != report.basis.size else f.ravel()
    if report.sqrt_weights is not None:
        x = x * report.sqrt_weights
    coef = Q.T @ x
    return coef**2


def bottom_fraction(spectrum, fraction: float = 0.1) -> float:
    """Share of the total carried by the lowest ``fraction`` of eigenvalues."""
    spectrum = np.asarray(spectrum)
    total = float(np.sum(spectrum))
    if total == 0:
        return 0.0
    k = max(1, int(round(fraction * spectrum.size)))
    return float(np.sum(spectrum[:k]) / total)


def high_freq_fraction(e) -> float:
    """Share of Fourier energy with both frequencies above half the Nyquist frequency.

    The field is evenly reflected about its last row and column before the
    FFT, so a checkerboard lands exactly on the Nyquist bin for any size.
    """
    e = np.asarray(e, dtype=float)
    if e.ndim != 2 or min(e.shape) < 2:
        raise GridError("need a 2-d field with at least two nodes per axis")
    ext = np.concatenate([e, e[-2:0:-1]], axis=0)
    ext = np.concatenate([ext, ext[:, -2:0:-1]], axis=1)
    P = np.abs(np.fft.fft2(ext)) ** 2
    total = float(P.sum())
    if total == 0:
        return 0.0
    fy = np.abs(np.fft.fftfreq(ext.shape[0]))[:, None]
    fx = np.abs(np.fft.fftfreq(ext.shape[1]))[None, :]
    high = (fy > 0.25) & (fx > 0.25)
    return float(P[high].sum() / total)


def crop_to_mask(field_, mask) -> np.ndarray:
    """Bounding box of the mask support."""
    rows = np.flatnonzero(np.any(np.asarray(mask) > 0, axis=1))
    cols = np.flatnonzero(np.any(np.asarray(mask) > 0, axis=0))
    return np.asarray(field_)[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]


def write_eigenvalues_csv(path, report: SpectralReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "re", "im"])
        for i, (re, im) in enumerate(zip(report.eigenvalues, report.imag)):
            w.writerow([i, repr(float(re)), repr(float(im))])


def write_power_spectrum_csv(path, report: SpectralReport, spectrum) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue", "coef_sq"])
        for i, (lam, p) in enumerate(zip(report.eigenvalues, spectrum)):
            w.writerow([i, repr(float(lam)), repr(float(p))])
