"""Command-line front end: ``multiwave <subcommand> ...``.

Every subcommand that takes a configuration accepts a builtin name or a
JSON path, plus ``--set key=value`` overrides (dotted keys reach nested
objects, values are parsed as JSON when possible). ``--seed``, ``--out``
and ``--threads`` override the matching configuration keys.

Exit status: 0 success, 2 invalid configuration, 3 divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as mio
from .experiments import (EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_OK, ConfigError,
                          Experiment, builtin_names, gn_curves, resolve_config,
                          run, spectrum_report, sweep_gamma)
from .fields import GridError
from .landweber import LandweberDivergence
from .wave import SolverDivergence, forward_traces

log = logging.getLogger("multiwave")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v)
    for key in ("seed", "threads"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    if getattr(args, "out", None) is not None:
        out["out"] = str(args.out)
    for key in ("nx", "steps", "T"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    if getattr(args, "gamma", None):
        out["gammas"] = list(args.gamma)
    return out


def _config(args):
    cfg = resolve_config(args.config)
    ov = _overrides(args)
    return cfg.with_overrides(ov) if ov else cfg


def _out_dir(cfg, sub: str) -> Path:
    p = Path(cfg.out) if cfg.out else Path("out") / cfg.name / sub
    p.mkdir(parents=True, exist_ok=True)
    return p


def _common(p, config=True):
    if config:
        p.add_argument("config", help="builtin configuration name or path to a JSON file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--nx", type=int)
    p.add_argument("--T", type=float)


def cmd_phantom(args) -> int:
    cfg = _config(args)
    grid = cfg.build_grid()
    f = cfg.phantom_field(grid)
    out = _out_dir(cfg, "phantom")
    lo, hi = mio.write_pgm(out / "phantom.pgm", f)
    mio.write_field_csv(out / "phantom.csv", f, grid)
    if not args.no_figures:
        from .plotting import plot_field

        plot_field(f, out / "phantom.png", title=cfg.name, extent=grid.extent)
    print(f"phantom {grid.nx}x{grid.ny} range [{lo:.4g}, {hi:.4g}] -> {out}")
    return EXIT_OK


def cmd_forward(args) -> int:
    cfg = _config(args)
    exp = Experiment(cfg)
    out = _out_dir(cfg, "forward")
    if args.binary:
        mio.write_trace_binary(out / "trace.npz", exp.data)
    else:
        mio.write_trace_csv(out / "trace.csv", exp.data)
    _, _, energy = forward_traces(exp.f, exp.c, exp.grid, energy=True)
    mio.write_energy_csv(out / "energy.csv", energy, exp.grid)
    drift = float(np.max(np.abs(energy - energy[0])) / energy[0]) if energy[0] > 0 else 0.0
    print(f"trace {exp.data.values.shape} energy drift {drift:.3e} -> {out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    if args.method:
        cfg = cfg.with_overrides({"method": args.method})
    cfg = cfg.with_overrides({"gammas": cfg.gammas[:1]}) if cfg.method != "atr" else cfg
    exp = Experiment(cfg)
    out = _out_dir(cfg, "reconstruct")
    cell = exp.atr() if cfg.method == "atr" else exp.landweber(cfg.gammas[0], cut=not args.no_cut)
    cell.log.to_csv(out / f"{cell.label}.csv", timings=False)
    if cell.field is not None:
        mio.write_pgm(out / f"{cell.label}.pgm", cell.field)
        mio.write_field_csv(out / f"{cell.label}_field.csv", cell.field, exp.grid)
    if cell.diverged_at is not None:
        print(f"{cell.label}: diverged at step {cell.diverged_at}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"{cell.label}: relative error {cell.log.rel_error[-1]:.4f} after "
          f"{cell.log.steps[-1]} steps -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg, "sweep")
    rows, cells = sweep_gamma(cfg, out=out)
    if not args.no_figures:
        from .plotting import plot_gamma_sweep

        plot_gamma_sweep(rows, out / "sweep.png", title=cfg.name)
    for c in cells:
        tail = f"diverged at {c.diverged_at}" if c.diverged_at is not None else f"{c.log.rel_error[-1]:.4f}"
        print(f"gamma {c.gamma:<8g} {tail}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg, "spectrum")
    s = spectrum_report(cfg, nx=args.assemble_nx, out=out, wave_adjoint=not args.no_wave_adjoint,
                        figures=not args.no_figures)
    s.pop("images", None)
    print(json.dumps(s, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_gn(args) -> int:
    if not args.gamma_value > 0:
        raise ConfigError("gamma must be positive")
    if any(n < 1 for n in args.N):
        raise ConfigError("N values must be positive")
    out = args.out or Path("out/gn-curve")
    res = gn_curves(args.gamma_value, args.N, out=out, figures=not args.no_figures)
    for N, (x, v) in res["maxima"].items():
        print(f"N={N:<6d} max {v:.6g} at lambda={x:.6g}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    status, manifest = run(cfg, figures=not args.no_figures)
    print(json.dumps(manifest["results"], indent=2, sort_keys=True, default=float))
    return status


def cmd_list(args) -> int:
    for n in builtin_names():
        print(n)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multiwave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", help="render the phantom of a configuration")
    _common(s)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("forward", help="compute (perturbed) boundary data and the energy record")
    _common(s)
    s.add_argument("--binary", action="store_true", help="write the trace as .npz instead of CSV")
    s.set_defaults(func=cmd_forward)

    s = sub.add_parser("reconstruct", help="one reconstruction with the first gamma of the config")
    _common(s)
    s.add_argument("--method", choices=("landweber", "atr"))
    s.add_argument("--gamma", type=float, action="append")
    s.add_argument("--steps", type=int)
    s.add_argument("--no-cut", action="store_true", help="Landweber without the interior cutoff")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("sweep-gamma", help="Landweber error curves for every gamma of the config")
    _common(s)
    s.add_argument("--gamma", type=float, action="append", help="replace the gamma list (repeatable)")
    s.add_argument("--steps", type=int)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("spectrum", help="dense spectrum of the normal operator on a small grid")
    _common(s)
    s.add_argument("--assemble-nx", type=int, default=41)
    s.add_argument("--no-wave-adjoint", action="store_true")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("gn-curve", help="the filter function g_N and its maxima")
    s.add_argument("--gamma", dest="gamma_value", type=float, default=1.0)
    s.add_argument("--N", type=int, nargs="+", default=[25, 100, 400, 1600])
    s.add_argument("--out", type=Path)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_gn)

    s = sub.add_parser("run", help="run a full experiment configuration")
    _common(s)
    s.add_argument("--steps", type=int)
    s.add_argument("--gamma", type=float, action="append")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("list", help="list the builtin configurations")
    s.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, GridError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LandweberDivergence, SolverDivergence) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, mio.FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
