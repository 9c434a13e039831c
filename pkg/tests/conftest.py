import numpy as np
import pytest

from multiwave.fields import make_grid, make_speed

# criterion lines collected by tests/test_acceptance.py, echoed in the summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_setup():
    """21x21 trig-speed grid, T = 1: cheap enough for exhaustive checks."""
    g = make_grid(21, T=1.0, c_max=1.5)
    return g, make_speed(g, "trig")


def smooth_field(grid, rng, n=3, width=0.25):
    """Random sum of Gaussians well inside the box."""
    X, Y = grid.mesh()
    out = np.zeros(grid.shape)
    for _ in range(n):
        cx, cy = rng.uniform(-0.5, 0.5, 2)
        out += rng.uniform(-1, 1) * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / width**2)
    return out


def smooth_trace(grid, rng, n_modes=3):
    """Random smooth trace: products of low sinusoids in time and arclength."""
    from multiwave.boundary import perimeter_arclength

    t = grid.t[:, None]
    s = perimeter_arclength(grid)[None, :]
    length = s[0, -1] + grid.dx
    out = np.zeros((grid.nt + 1, s.shape[1]))
    for _ in range(n_modes):
        a, k, w, p = rng.uniform(-1, 1), rng.integers(1, 4), rng.uniform(0.5, 3), rng.uniform(0, 6)
        out += a * np.sin(2 * np.pi * k * s / length + p) * np.cos(w * t)
    return out


@pytest.fixture(scope="session")
def stable_sweep():
    """Landweber sweep of the stable full-data setup at nx=201 (several minutes)."""
    from multiwave.experiments import builtin_config, sweep_gamma

    cfg = builtin_config("stable-full")
    _, cells = sweep_gamma(cfg)
    return cfg, cells
