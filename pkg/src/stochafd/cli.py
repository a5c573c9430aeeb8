"""Command line entry point ``stochafd``.

Subcommands::

    simulate   write Brownian-bridge sample paths to CSV
    decompose  run one method on simulated paths, write archive and reconstruction
    compare    run a full experiment from a config file (error table + outputs)
    dirichlet  evaluate the harmonic lift of a Poisson archive at interior points
    show       summarise an archive

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
``STOCHAFD_OUTPUT_DIR`` overrides the output directory of ``compare``.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .archive import load_archive
from .config import ExperimentConfig, apply_settings, load_config
from .errors import ArchiveError, ConfigError, NumericalFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
OUTPUT_ENV = "STOCHAFD_OUTPUT_DIR"


def _add_overrides(p):
    p.add_argument("--methods", help="comma separated: kl, spoafd, safd, snb, poafd, afd")
    p.add_argument("--family", choices=["poisson", "szego"])
    p.add_argument("--m", type=int, help="grid nodes on [0, 2pi]")
    p.add_argument("--n-values", dest="n_values", help="comma separated term counts")
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int, help="sample paths per run")
    p.add_argument("--covariance", choices=["closed_form", "empirical"])
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any config key, e.g. search.rho=0.9 (repeatable)")


def _overrides(args):
    pairs = []
    for key in ("methods", "family", "m", "n_values", "seed", "paths", "covariance"):
        val = getattr(args, key, None)
        if val is not None:
            pairs.append((key, str(val)))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    return pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochafd", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write Brownian-bridge paths to CSV")
    p.add_argument("--m", type=int, default=126)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("decompose", help="run a single method and archive it")
    p.add_argument("--config", help="config file (flags override it)")
    _add_overrides(p)
    p.add_argument("--method", required=True, choices=["kl", "spoafd", "safd", "snb", "poafd", "afd"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--archive", required=True, help="output archive (JSON)")
    p.add_argument("--recon", help="optional reconstruction CSV for path 0")

    p = sub.add_parser("compare", help="run a configured experiment")
    p.add_argument("--config", help="config file (flags override it)")
    _add_overrides(p)
    p.add_argument("--output-dir", dest="output_dir")

    p = sub.add_parser("dirichlet", help="harmonic lift of a Poisson archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--points", required=True,
                   help="interior points 'r,theta;r,theta;...' (theta in radians)")
    p.add_argument("--path", type=int, default=0)

    p = sub.add_parser("show", help="summarise an archive")
    p.add_argument("--archive", required=True)
    return parser


def _config(args, extra=()) -> ExperimentConfig:
    base = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    return apply_settings(base, _overrides(args) + list(extra))


def cmd_simulate(args, out):
    from .processes import bridge_grid, simulate_bridges

    if args.m < 3 or args.count < 1:
        raise ConfigError("simulate needs --m >= 3 and --count >= 1")
    grid = bridge_grid(args.m)
    ens = simulate_bridges(grid, args.count, args.seed)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(f"path{i}" for i in range(args.count)) + "\n")
        for j, t in enumerate(grid.nodes):
            fh.write(f"{float(t)!r}," + ",".join(repr(float(v)) for v in ens.paths[:, j]) + "\n")
    out.write(f"wrote {args.count} path(s) on {args.m} nodes (seed {args.seed}) to {args.out}\n")


def cmd_decompose(args, out):
    from .archive import save_archive
    from .experiments import run_experiment

    cfg = _config(args, [("methods", args.method), ("n_values", str(args.n))])
    with tempfile.TemporaryDirectory() as tmp:
        report = run_experiment(cfg, tmp)
        src = os.path.join(tmp, f"archive_{args.method}_n{args.n}.json")
        save_archive(load_archive(src), args.archive)
        if args.recon:
            with open(os.path.join(tmp, f"recon_{args.method}_n{args.n}.csv"), encoding="utf-8") as fh:
                text = fh.read()
            with open(args.recon, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    r = report["results"][0]
    out.write(f"{r.method} n={r.n} relative_error={r.relative_error:.6g} "
              f"energy_captured={r.energy_captured:.6g} seed={r.seed}\n")


def cmd_compare(args, out):
    from .experiments import run_experiment

    cfg = _config(args)
    out_dir = args.output_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    report = run_experiment(cfg, out_dir)
    with open(report["table"], encoding="utf-8") as fh:
        out.write(fh.read())


def _parse_points(text):
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            r, theta = (float(x) for x in chunk.split(","))
        except ValueError:
            raise ConfigError(f"bad interior point {chunk!r}; expected r,theta") from None
        pts.append((r, theta))
    if not pts:
        raise ConfigError("no interior points given")
    return pts


def cmd_dirichlet(args, out):
    from .dirichlet import dirichlet_lift

    dec = load_archive(args.archive).decomposition()
    pts = _parse_points(args.points)
    try:
        vals = dirichlet_lift(dec, pts, args.path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out.write("r,theta,u\n")
    for (r, t), v in zip(pts, np.atleast_1d(vals)):
        out.write(f"{r!r},{t!r},{float(np.real(v))!r}\n")


def cmd_show(args, out):
    a = load_archive(args.archive)
    out.write(f"method       {a.method}\n")
    out.write(f"family       {a.family or '-'}\n")
    out.write(f"mode         {a.mode}\n")
    out.write(f"grid         {a.grid['kind']} m={a.grid['m']} [{a.grid['a']}, {a.grid['b']}]\n")
    out.write(f"terms        {a.coefficients.shape[-1]}\n")
    out.write(f"paths        {a.coefficients.shape[0]}\n")
    out.write(f"seed         {a.seed}\n")
    if a.residual_energy:
        out.write(f"residual     {a.residual_energy[-1]!r}\n")
    for i, (re, im, order) in enumerate(a.parameters[:10]):
        out.write(f"  q{i + 1:<3d} {complex(re, im)!r} order {order}\n")
    if len(a.parameters) > 10:
        out.write(f"  ... {len(a.parameters) - 10} more\n")


COMMANDS = {"simulate": cmd_simulate, "decompose": cmd_decompose, "compare": cmd_compare,
            "dirichlet": cmd_dirichlet, "show": cmd_show}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args, sys.stdout)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ArchiveError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
