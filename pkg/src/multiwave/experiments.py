"""Named reconstruction experiments: configuration, pipeline and artifacts.

A configuration is one JSON document. :func:`run` validates it completely,
then goes phantom -> (finer-grid) forward data -> perturbations ->
reconstructions, writing CSV logs, PGM images, figures and a manifest that
is enough to rerun the experiment.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as mio
from .atr import ATROperator, AveragingSpec, EllipticSolveSpec, atr_iterate
from .boundary import SIDES, BoundaryTrace, GammaMask, resample_trace
from .fields import (GridError, GridSpec, interior_cutoff, make_grid, make_speed,
                     render_gaussians, render_shepp_logan, weighted_norm)
from .landweber import IterationLog, LandweberConfig, LandweberDivergence, iterate
from .measurement import (FilterSpec, MeasurementConfig, MeasurementOperator,
                          add_noise, add_side_swap_perturbation, cosine_taper_weight,
                          final_cut_weight)
from .wave import ADJOINT_SCHEMES, SolverDivergence, forward_traces

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

SPEED_MODELS = ("constant", "trig", "square-jump")
PHANTOMS = ("shepp-logan", "gaussians")
METHODS = ("landweber", "atr", "both")
TIME_WEIGHTS = ("final-cut", "cosine", "none")


class ConfigError(ValueError):
    """Invalid experiment configuration (exit status 2)."""


@dataclass
class ExperimentConfig:
    name: str
    nx: int = 101
    T: float = 4.0
    speed: dict = field(default_factory=lambda: {"model": "trig"})
    phantom: dict = field(default_factory=lambda: {"kind": "shepp-logan", "supersample": 4})
    gamma_set: dict = field(default_factory=lambda: {"sides": "all"})
    margin: float | None = 0.03
    also_no_cut: bool = False
    error_margin: float = 0.03
    method: str = "landweber"
    gammas: list = field(default_factory=lambda: [0.05])
    steps: int = 50
    time_weight: str = "final-cut"
    eps_steps: int = 2
    scheme: str = "central"
    noise: dict | None = None
    side_swap: dict | None = None
    filter: dict | None = None
    finer_grid: dict | None = None
    compare_same_grid: bool = False
    atr: dict = field(default_factory=lambda: {"window": [0.1, 1.0], "nodes": None,
                                               "tolerance": 1e-10})
    seed: int = 0
    threads: int = 1
    out: str | None = None

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        if "name" not in d:
            raise ConfigError("configuration needs a 'name'")
        try:
            cfg = cls(**copy.deepcopy(d))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError:
            raise
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        d = self.to_dict()
        for key, value in overrides.items():
            target = d
            parts = key.split(".")
            for p in parts[:-1]:
                if not isinstance(target.get(p), dict):
                    target[p] = {}
                target = target[p]
            target[parts[-1]] = value
        return ExperimentConfig.from_dict(d)

    # -- validation ----------------------------------------------------
    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(f"{self.name}: {msg}")

        need(isinstance(self.name, str) and self.name, "name must be a non-empty string")
        need(isinstance(self.nx, int) and self.nx >= 5, "nx must be an integer >= 5")
        need(_num(self.T) and self.T > 0, "T must be positive")
        need(isinstance(self.speed, dict) and self.speed.get("model") in SPEED_MODELS,
             f"speed.model must be one of {SPEED_MODELS}")
        need(isinstance(self.phantom, dict) and self.phantom.get("kind") in PHANTOMS,
             f"phantom.kind must be one of {PHANTOMS}")
        if self.phantom["kind"] == "gaussians":
            blobs = self.phantom.get("blobs")
            need(isinstance(blobs, list) and blobs, "gaussians phantom needs a non-empty 'blobs' list")
            for b in blobs:
                need(isinstance(b, list) and len(b) == 4 and all(_num(v) for v in b) and b[2] > 0,
                     "each blob is [cx, cy, width > 0, amplitude]")
        ss = self.phantom.get("supersample", 4)
        need(isinstance(ss, int) and ss >= 1, "phantom.supersample must be a positive integer")
        sides = self.gamma_set.get("sides") if isinstance(self.gamma_set, dict) else None
        need(sides == "all" or (isinstance(sides, list) and sides and set(sides) <= set(SIDES)),
             f"gamma_set.sides must be 'all' or a non-empty subset of {SIDES}")
        frac = self.gamma_set.get("adjacent_fraction", 0.0)
        need(_num(frac) and 0 <= frac <= 1, "gamma_set.adjacent_fraction must be in [0, 1]")
        for key in ("margin", "error_margin"):
            v = getattr(self, key)
            need(v is None or (_num(v) and 0 <= v < 0.5), f"{key} must be in [0, 0.5)")
        need(self.error_margin is not None, "error_margin must be set")
        need(self.method in METHODS, f"method must be one of {METHODS}")
        need(isinstance(self.gammas, list), "gammas must be a list")
        if self.method in ("landweber", "both"):
            need(len(self.gammas) >= 1, "gammas must contain at least one step size")
        need(all(_num(g) and g > 0 for g in self.gammas), "step sizes must be positive")
        need(isinstance(self.steps, int) and self.steps >= 1, "steps must be a positive integer")
        need(self.time_weight in TIME_WEIGHTS, f"time_weight must be one of {TIME_WEIGHTS}")
        need(isinstance(self.eps_steps, int) and self.eps_steps >= 0, "eps_steps must be >= 0")
        need(self.scheme in ADJOINT_SCHEMES, f"scheme must be one of {ADJOINT_SCHEMES}")
        if self.noise is not None:
            need(_num(self.noise.get("sigma")) and self.noise["sigma"] >= 0,
                 "noise.sigma must be non-negative")
        if self.side_swap is not None:
            need(self.side_swap.get("src") in SIDES and self.side_swap.get("dst") in SIDES
                 and self.side_swap["src"] != self.side_swap["dst"],
                 "side_swap needs distinct 'src' and 'dst' sides")
        if self.filter is not None:
            try:
                FilterSpec(**self.filter)
            except (TypeError, GridError) as exc:
                raise ConfigError(f"{self.name}: bad filter ({exc})") from exc
        if self.finer_grid is not None:
            sf = self.finer_grid.get("space")
            tf = self.finer_grid.get("time")
            need(_num(sf) and _num(tf) and sf >= 1 and tf >= 1, "finer_grid factors must be >= 1")
            need(tf >= sf * (1 - 1e-12), "finer_grid time factor must be at least the space factor (CFL)")
            cap = self.finer_grid.get("max_nodes", 4_000_000)
            nf = fine_nx(self.nx, sf)
            need(nf * nf <= cap, f"fine grid {nf}x{nf} exceeds max_nodes={cap}")
        atr = self.atr or {}
        win = atr.get("window", [0.1, 1.0])
        need(isinstance(win, list) and len(win) == 2 and 0 < win[0] < win[1] <= 1,
             "atr.window must be [start, stop] with 0 < start < stop <= 1")
        nodes = atr.get("nodes")
        need(nodes is None or (isinstance(nodes, int) and nodes >= 3), "atr.nodes must be null or >= 3")
        tol = atr.get("tolerance", 1e-10)
        need(_num(tol) and 0 < tol < 1, "atr.tolerance must be in (0, 1)")
        need(isinstance(self.seed, int), "seed must be an integer")
        need(isinstance(self.threads, int) and self.threads >= 1, "threads must be >= 1")
        # grid-level checks that do not need a solve
        try:
            self.build_grid()
        except GridError as exc:
            raise ConfigError(f"{self.name}: {exc}") from exc

    # -- derived objects -----------------------------------------------
    def speed_field(self, grid: GridSpec) -> np.ndarray:
        kw = {k: v for k, v in self.speed.items() if k != "model"}
        if "center" in kw:
            kw["center"] = tuple(kw["center"])
        return make_speed(grid, self.speed["model"], **kw)

    def c_max(self) -> float:
        # evaluated on the grid itself, so the CFL step matches the sampled speed
        probe = GridSpec(self.nx, self.nx, 1.0, 1)
        return float(np.max(self.speed_field(probe)))

    def build_grid(self) -> GridSpec:
        return make_grid(self.nx, T=self.T, c_max=self.c_max())

    def phantom_field(self, grid: GridSpec) -> np.ndarray:
        if self.phantom["kind"] == "shepp-logan":
            return render_shepp_logan(grid, self.phantom.get("supersample", 4))
        blobs = [((b[0], b[1]), b[2], b[3]) for b in self.phantom["blobs"]]
        return render_gaussians(grid, blobs)

    def gamma_mask(self, grid: GridSpec) -> GammaMask:
        sides = self.gamma_set["sides"]
        if sides == "all":
            return GammaMask.full(grid)
        return GammaMask.from_sides(grid, tuple(sides), self.gamma_set.get("adjacent_fraction", 0.0))

    def time_weights(self, grid: GridSpec) -> np.ndarray:
        if self.time_weight == "final-cut":
            return final_cut_weight(grid, self.eps_steps)
        if self.time_weight == "cosine":
            return cosine_taper_weight(grid)
        return np.ones(grid.nt + 1)

    def measurement(self, grid: GridSpec, cut: bool = True, time_weight=None,
                    filtered: bool = True) -> MeasurementConfig:
        chi = interior_cutoff(grid, self.margin) if (cut and self.margin is not None) else None
        filt = FilterSpec(**self.filter) if (filtered and self.filter) else None
        return MeasurementConfig.default(
            grid, gamma=self.gamma_mask(grid), chi=chi,
            time_weight=self.time_weights(grid) if time_weight is None else time_weight,
            data_filter=filt, scheme=self.scheme)


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def fine_nx(nx: int, space_factor: float) -> int:
    return int(round((nx - 1) * space_factor)) + 1


# -- builtin configurations --------------------------------------------------

def builtin_names() -> list[str]:
    root = resources.files("multiwave") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def builtin_config(name: str) -> ExperimentConfig:
    root = resources.files("multiwave") / "configs"
    p = root / f"{name}.json"
    if not p.is_file():
        raise ConfigError(f"no builtin configuration {name!r}; known: {builtin_names()}")
    return ExperimentConfig.from_dict(json.loads(p.read_text()))


def resolve_config(ref) -> ExperimentConfig:
    """A path to a JSON file or the name of a builtin configuration."""
    if isinstance(ref, ExperimentConfig):
        return ref
    p = Path(ref)
    if p.suffix == ".json" or p.exists():
        return ExperimentConfig.load(p)
    return builtin_config(str(ref))


# -- pipeline ------------------------------------------------------------------

def code_version() -> str:
    """Package version plus a digest of the package sources."""
    from . import __version__

    h = hashlib.sha256()
    root = resources.files("multiwave")
    for p in sorted(root.iterdir(), key=lambda q: q.name):
        if p.name.endswith(".py"):
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


def finer_grid_forward(cfg: ExperimentConfig, grid: GridSpec | None = None) -> BoundaryTrace:
    """Forward data computed on a refined grid and resampled to the reconstruction grid.

    The phantom and speed are rendered on the fine grid. With factors
    ``(1, 1)`` this is the same-grid forward solve.
    """
    grid = cfg.build_grid() if grid is None else grid
    fg = cfg.finer_grid or {"space": 1, "time": 1}
    sf, tf = float(fg["space"]), float(fg["time"])
    if sf < 1 or tf < 1:
        raise ConfigError("finer_grid factors must be >= 1")
    nxf = fine_nx(grid.nx, sf)
    cap = fg.get("max_nodes", 4_000_000)
    if nxf * nxf > cap:
        raise ConfigError(f"fine grid {nxf}x{nxf} exceeds max_nodes={cap}")
    if nxf == grid.nx and tf == 1:
        fine = grid
    else:
        dt = grid.dt / tf
        nt = max(1, math.ceil(grid.T / dt - 1e-9))
        fine = GridSpec(nxf, nxf, dt, nt, grid.extent)
    c = cfg.speed_field(fine)
    f = cfg.phantom_field(fine)
    traces, _, _ = forward_traces(f, c, fine)
    full = BoundaryTrace(fine, traces)
    if fine is grid:
        return BoundaryTrace(grid, traces, cfg.gamma_mask(grid))
    return resample_trace(full, grid, cfg.gamma_mask(grid))


def make_data(cfg: ExperimentConfig, grid: GridSpec, c, f) -> BoundaryTrace:
    """Unweighted measured trace on Gamma, with the configured perturbations."""
    if cfg.finer_grid is not None:
        m = finer_grid_forward(cfg, grid)
    else:
        traces, _, _ = forward_traces(f, c, grid)
        m = BoundaryTrace(grid, traces, cfg.gamma_mask(grid))
    if cfg.side_swap is not None:
        m = add_side_swap_perturbation(m, cfg.side_swap["src"], cfg.side_swap["dst"])
    if cfg.noise is not None and cfg.noise.get("sigma", 0) > 0:
        m = add_noise(m, cfg.noise["sigma"], seed=cfg.seed)
    return m


@dataclass
class Cell:
    """Outcome of one reconstruction run."""

    label: str
    log: IterationLog
    field: np.ndarray | None
    diverged_at: int | None = None
    gamma: float | None = None

    def summary(self) -> dict:
        d = {"label": self.label, "gamma": self.gamma, "diverged_at": self.diverged_at,
             "final_error": self.log.rel_error[-1] if len(self.log) else None}
        for k in (10, 30, 50, 100, 200):
            if k in self.log.steps:
                d[f"error_{k}"] = self.log.error_at(k)
        e = np.asarray(self.log.rel_error)
        if e.size:
            d["min_error"] = float(np.nanmin(e))
            d["argmin_step"] = int(self.log.steps[int(np.nanargmin(e))])
        return d


class Experiment:
    """Everything that is fixed once a configuration is resolved."""

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self.grid = cfg.build_grid()
        self.c = cfg.speed_field(self.grid)
        self.f = cfg.phantom_field(self.grid)
        self.chi0 = interior_cutoff(self.grid, cfg.error_margin)
        self._truth_norm = weighted_norm(self.f * self.chi0, self.c, self.grid)
        self.data = make_data(cfg, self.grid, self.c, self.f)

    def error_norm(self, x) -> float:
        return weighted_norm(np.asarray(x) * self.chi0, self.c, self.grid)

    def landweber(self, gamma: float, cut: bool = True, steps: int | None = None,
                  filtered: bool = True) -> Cell:
        mcfg = self.cfg.measurement(self.grid, cut=cut, filtered=filtered)
        op = MeasurementOperator(self.c, self.grid, mcfg)
        m = self.data.values * mcfg.data_mask(self.grid)
        label = f"landweber{'' if cut else '_nocut'}_g{gamma:.4f}"
        try:
            x, lg = iterate(m, LandweberConfig(gamma, steps or self.cfg.steps), op.forward,
                            op.adjoint, truth=self.f, data_norm=op.data_norm,
                            field_norm=self.error_norm)
        except LandweberDivergence as exc:
            return Cell(label, exc.log or IterationLog(), None, exc.step, gamma)
        return Cell(label, lg, x, None, gamma)

    def atr(self, steps: int | None = None) -> Cell:
        a = self.cfg.atr or {}
        start, stop = a.get("window", [0.1, 1.0])
        avg = AveragingSpec.bump(self.grid, start, stop, a.get("nodes"))
        mcfg = self.cfg.measurement(self.grid, time_weight=np.ones(self.grid.nt + 1), filtered=False)
        op = MeasurementOperator(self.c, self.grid, mcfg)
        omega0 = interior_cutoff(self.grid, self.cfg.margin or 0.0)
        gam = self.cfg.gamma_mask(self.grid)
        A = ATROperator(self.c, self.grid, omega0, avg, None if gam.is_full() else gam,
                        EllipticSolveSpec(a.get("tolerance", 1e-10)))
        m = self.data.values * mcfg.data_mask(self.grid)
        try:
            x, lg = atr_iterate(m, steps or self.cfg.steps, op.forward, A.A0, truth=self.f,
                                data_norm=op.data_norm, field_norm=self.error_norm,
                                energy_norm=A.energy_norm)
        except LandweberDivergence as exc:
            return Cell("atr", exc.log or IterationLog(), None, exc.step)
        return Cell("atr", lg, x)


def sweep_rows(cells) -> list[tuple[float, int, float]]:
    """``(gamma, step, log10_rel_error)``; a diverged run ends with ``inf`` at its divergence step."""
    rows = []
    for cell in cells:
        for s, e in zip(cell.log.steps, cell.log.rel_error):
            rows.append((cell.gamma, s, math.log10(e) if e > 0 else -math.inf))
        if cell.diverged_at is not None:
            rows.append((cell.gamma, cell.diverged_at, math.inf))
    return rows


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "step", "log10_rel_error"])
        for g, s, v in rows:
            w.writerow([repr(float(g)), int(s), repr(float(v))])


def read_sweep_csv(path) -> list[tuple[float, int, float]]:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        return [(float(d["gamma"]), int(d["step"]), float(d["log10_rel_error"])) for d in r]


def sweep_gamma(cfg: ExperimentConfig, exp: Experiment | None = None, out=None):
    """Landweber for every gamma on the same data; returns ``(rows, cells)``."""
    if not cfg.gammas:
        raise ConfigError(f"{cfg.name}: gammas must contain at least one step size")
    exp = Experiment(cfg) if exp is None else exp
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        cells = list(pool.map(exp.landweber, cfg.gammas))
    rows = sweep_rows(cells)
    if out is not None:
        write_sweep_csv(Path(out) / "sweep.csv", rows)
    return rows, cells


def best_gamma(rows, step: int) -> float:
    """Gamma with the smallest finite error at ``step``."""
    sel = [(v, g) for g, s, v in rows if s == step and math.isfinite(v)]
    if not sel:
        raise ValueError(f"no finite error at step {step}")
    return min(sel)[1]


def make_manifest(cfg: ExperimentConfig) -> dict:
    grid = cfg.build_grid()
    return {
        "config": cfg.to_dict(),
        "code_version": code_version(),
        "grid": grid.to_dict(),
        "c_max": cfg.c_max(),
    }


def config_from_manifest(manifest: dict) -> ExperimentConfig:
    return ExperimentConfig.from_dict(manifest["config"])


def _write_cell(out: Path, cell: Cell, images: dict) -> None:
    cell.log.to_csv(out / f"{cell.label}.csv", timings=False)
    if cell.field is not None:
        images[f"{cell.label}.pgm"] = list(mio.write_pgm(out / f"{cell.label}.pgm", cell.field))


def run(cfg_ref, out=None, overrides: dict | None = None, figures: bool = True) -> tuple[int, dict]:
    """Execute an experiment; returns ``(exit_status, manifest)``.

    Configuration problems raise :class:`ConfigError` before anything is
    solved. A Landweber divergence in a single-gamma run, or a wave solver
    blow-up, gives exit status 3; artifacts written so far are kept.
    """
    cfg = resolve_config(cfg_ref)
    if overrides:
        cfg = cfg.with_overrides(overrides)
    out = Path(out or cfg.out or f"out/{cfg.name}")
    manifest = make_manifest(cfg)
    status = EXIT_OK
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError:
        raise
    images: dict = {}
    results: dict = {}
    cells: list[Cell] = []
    try:
        exp = Experiment(cfg)
        images["phantom.pgm"] = list(mio.write_pgm(out / "phantom.pgm", exp.f))
        if cfg.method in ("landweber", "both"):
            rows, lw = sweep_gamma(cfg, exp, out)
            for cell in lw:
                _write_cell(out, cell, images)
            cells += lw
            results["landweber"] = [c.summary() for c in lw]
            finite = [r for r in rows if math.isfinite(r[2])]
            if any(r[1] == cfg.steps for r in finite):
                results["best_gamma"] = best_gamma(rows, cfg.steps)
            if len(lw) == 1 and lw[0].diverged_at is not None:
                status = EXIT_DIVERGED
            if cfg.also_no_cut:
                with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                    nc = list(pool.map(lambda g: exp.landweber(g, cut=False), cfg.gammas))
                for cell in nc:
                    _write_cell(out, cell, images)
                cells += nc
                results["landweber_nocut"] = [c.summary() for c in nc]
            if cfg.compare_same_grid and cfg.finer_grid is not None:
                same = Experiment(cfg.with_overrides({"finer_grid": None}))
                sg = [same.landweber(g) for g in cfg.gammas]
                for cell in sg:
                    cell.label = "samegrid_" + cell.label
                    _write_cell(out, cell, images)
                cells += sg
                results["landweber_same_grid"] = [c.summary() for c in sg]
            if figures:
                from .plotting import plot_gamma_sweep

                plot_gamma_sweep(rows, out / "sweep.png", title=cfg.name)
        if cfg.method in ("atr", "both"):
            cell = exp.atr()
            _write_cell(out, cell, images)
            cells.append(cell)
            results["atr"] = cell.summary()
            if cell.diverged_at is not None and cfg.method == "atr":
                status = EXIT_DIVERGED
        if figures and cells:
            from .plotting import plot_error_curves, plot_fields

            plot_error_curves({c.label: c.log for c in cells if len(c.log)}, out / "errors.png",
                              title=cfg.name)
            shown = {"truth": exp.f}
            shown.update({c.label: c.field for c in cells if c.field is not None})
            plot_fields(dict(list(shown.items())[:5]), out / "reconstructions.png")
    except SolverDivergence as exc:
        results["solver_divergence"] = str(exc)
        status = EXIT_DIVERGED
    manifest["images"] = images
    manifest["results"] = results
    manifest["status"] = status
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return status, manifest


# -- spectral diagnostics and g_N curves ---------------------------------------

def spectrum_report(cfg: ExperimentConfig, nx: int = 41, out=None, wave_adjoint: bool = True,
                    n_vectors: int = 4, figures: bool = True) -> dict:
    """Assemble ``L`` for the configuration on an ``nx`` grid and summarize its spectrum.

    Returns the summary dict; with ``out`` also writes the eigenvalue and
    power-spectrum CSVs, PGMs of the lowest and highest eigenvectors and
    a figure.
    """
    from . import spectral as spl

    small = cfg.with_overrides({"nx": nx, "finer_grid": None, "noise": None, "side_swap": None,
                                "filter": None})
    grid = small.build_grid()
    c = small.speed_field(grid)
    chi = interior_cutoff(grid, small.margin or 0.0)
    mcfg = small.measurement(grid, filtered=False)
    op = MeasurementOperator(c, grid, mcfg)
    L = spl.measurement_matrix(op.forward, c, grid, chi)
    N = spl.normal_from_L(L)
    rep = spl.eigendecompose(N)
    f = small.phantom_field(grid) * chi
    ps = spl.power_spectrum(f, rep)
    tail = rep.tail(1e-10)
    top = np.arange(rep.eigenvalues.size - max(1, rep.eigenvalues.size // 10), rep.eigenvalues.size)

    def hf(js):
        if len(js) == 0:
            return None
        return float(np.mean([spl.high_freq_fraction(spl.crop_to_mask(rep.vector_field(j), chi))
                              for j in js]))

    summary = dict(rep.summary)
    summary.update({
        "nx": nx,
        "min_over_max": float(rep.eigenvalues[0] / rep.lambda_max),
        "tail_count": int(tail.size),
        "tail_high_freq": hf(tail),
        "top_decile_high_freq": hf(top),
        "parseval_ratio": float(ps.sum() / weighted_norm(f, c, grid) ** 2),
        "bottom10_fraction": spl.bottom_fraction(ps, 0.1),
    })
    if wave_adjoint:
        W = spl.wave_normal_matrix(op.normal, c, grid, chi)
        summary["wave_adjoint_imag_over_real"] = spl.eigendecompose(W).summary["max_imag_over_real"]
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        spl.write_eigenvalues_csv(out / "eigenvalues.csv", rep)
        spl.write_power_spectrum_csv(out / "power_spectrum.csv", rep, ps)
        n = rep.eigenvalues.size
        scales = {}
        for j in list(range(min(n_vectors, n))) + list(range(max(0, n - n_vectors), n)):
            name = f"eigvec_{j:05d}.pgm"
            scales[name] = list(mio.write_pgm(out / name, rep.vector_field(j)))
        summary["images"] = scales
        if figures:
            from .plotting import plot_spectrum

            plot_spectrum(rep.eigenvalues, out / "spectrum.png", ps, title=cfg.name)
        (out / "spectrum_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def gn_curves(gamma: float, Ns, out=None, samples: int = 2048, figures: bool = True) -> dict:
    """``g_N`` on ``(0, sqrt(2 / gamma)]`` for each ``N``, with the location and height of each maximum."""
    from .landweber import g_N_curve, g_N_max

    lam = np.linspace(0.0, math.sqrt(2.0 / gamma), samples + 1)[1:]
    curves = {int(N): g_N_curve(gamma, int(N), lam) for N in Ns}
    maxima = {N: g_N_max(gamma, N) for N in curves}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "gn_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda"] + [f"N{N}" for N in curves])
            for i, x in enumerate(lam):
                w.writerow([repr(float(x))] + [repr(float(curves[N][i])) for N in curves])
        with open(out / "gn_max.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "lambda_at_max", "max"])
            for N, (x, v) in maxima.items():
                w.writerow([N, repr(float(x)), repr(float(v))])
        if figures:
            from .plotting import plot_gn

            plot_gn(lam, {f"N={N}": v for N, v in curves.items()}, out / "gn_curve.png",
                    title=f"gamma = {gamma:g}")
    return {"lambda": lam, "curves": curves, "maxima": maxima}
