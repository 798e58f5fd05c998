"""``isac-outage`` command line entry point."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import ConfigError, ISACError
from .experiments import (
    DEFAULT_B_GRID,
    DEFAULT_EPSILON_GRID,
    DEFAULT_GAMMA_GRID,
    RUNNERS,
    load_spec,
    render_csv,
    run_validate,
)

SUBCOMMAND_SWEEP = {
    "user-op": "gamma-grid",
    "target-op": "epsilon-grid",
    "tradeoff": "b1-grid",
    "hist": "none",
    "validate": "none",
}
DEFAULT_GRIDS = {
    "gamma-grid": DEFAULT_GAMMA_GRID,
    "epsilon-grid": DEFAULT_EPSILON_GRID,
    "b1-grid": DEFAULT_B_GRID,
    "b2-grid": DEFAULT_B_GRID,
}

PLOT_TEMPLATE = '''"""Plot {csv} (generated by isac-outage {version})."""
import csv
import sys

import matplotlib.pyplot as plt

with open({csv!r}) as fh:
    rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))

{body}
plt.savefig(sys.argv[1] if len(sys.argv) > 1 else {png!r}, dpi=150)
'''

PLOT_BODIES = {
    "user-op": """for method in ("analytic", "monte-carlo"):
    pts = [(float(r["gamma"]), float(r["p_u"])) for r in rows if r["method"] == method]
    plt.plot(*zip(*pts), "-" if method == "analytic" else "o", label=method)
plt.xlabel("gamma"); plt.ylabel("user outage probability"); plt.yscale("log"); plt.legend()""",
    "target-op": """for method in ("analytic", "monte-carlo"):
    pts = [(float(r["epsilon_db"]), float(r["p_c"])) for r in rows if r["method"] == method]
    plt.plot(*zip(*pts), "-" if method == "analytic" else "o", label=method)
plt.xlabel("epsilon (dB)"); plt.ylabel("target outage probability"); plt.yscale("log"); plt.legend()""",
    "tradeoff": """plt.plot([float(r["p_u"]) for r in rows], [float(r["p_c"]) for r in rows], "-o")
plt.xlabel("user outage probability"); plt.ylabel("target outage probability")""",
    "hist": """import numpy as np
xs = sorted({float(r["x_center"]) for r in rows}); ys = sorted({float(r["y_center"]) for r in rows})
counts = np.array([float(r["density"]) for r in rows]).reshape(len(xs), len(ys))
clt = np.array([float(r["clt_density"]) for r in rows]).reshape(len(xs), len(ys))
plt.pcolormesh(xs, ys, counts.T, shading="nearest"); plt.colorbar(label="empirical density")
plt.contour(xs, ys, clt.T, colors="w", linewidths=0.8)
plt.xlabel("X"); plt.ylabel("Y")""",
}


def _key_value(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="key = value file; flags override it")
    shared.add_argument("--seed", help="64-bit unsigned master seed")
    shared.add_argument("--trials", help="Monte Carlo trials (default 100000)")
    shared.add_argument("--theta-nodes", help="starting Gauss-Legendre node count for the theta average")
    shared.add_argument("--grid", help="comma-separated sweep values")
    shared.add_argument("--gamma", help="SINR threshold (linear)")
    shared.add_argument("--epsilon", help="CRB threshold (linear)")
    shared.add_argument("--workers", help="threads for sweep points and trial blocks")
    shared.add_argument("--set", dest="overrides", action="append", type=_key_value, default=[],
                        metavar="KEY=VALUE", help="override any config key, e.g. --set N=9")
    shared.add_argument("--out", type=Path, help="CSV destination (default stdout)")
    shared.add_argument("--plot-script", type=Path, help="also write a matplotlib script for the CSV")

    parser = argparse.ArgumentParser(prog="isac-outage", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("user-op", parents=[shared], help="user outage probability versus gamma")
    sub.add_parser("target-op", parents=[shared], help="target outage probability versus epsilon")
    trade = sub.add_parser("tradeoff", parents=[shared], help="(P_u, P_c) while sweeping a beamformer magnitude")
    trade.add_argument("--sweep", choices=("b1", "b2"), default=None, help="magnitude to sweep (default b1)")
    hist = sub.add_parser("hist", parents=[shared], help="2-D histogram of (X, Y) with CLT density")
    hist.add_argument("--bins", help="bins per axis (default 50)")
    sub.add_parser("validate", parents=[shared], help="run the built-in oracle checks")
    return parser


def _overrides(args) -> dict[str, str]:
    values: dict[str, str] = {}
    for flag, key in (("seed", "seed"), ("trials", "trials"), ("theta_nodes", "theta_nodes"),
                      ("grid", "grid"), ("gamma", "gamma"), ("epsilon", "epsilon"),
                      ("workers", "workers"), ("bins", "bins")):
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value
    values.update(dict(args.overrides))
    return values


def _resolve(args):
    overrides = _overrides(args)
    if args.command == "tradeoff" and getattr(args, "sweep", None):
        overrides["sweep"] = f"{args.sweep}-grid"
    spec = load_spec(args.config, overrides)
    sweep = SUBCOMMAND_SWEEP[args.command]
    if args.command == "tradeoff" and spec.sweep in ("b1-grid", "b2-grid"):
        sweep = spec.sweep
    grid = spec.grid if spec.grid else DEFAULT_GRIDS.get(sweep, ())
    return replace(spec, sweep=sweep, grid=tuple(grid) if sweep != "none" else spec.grid)


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _resolve(args)
        if args.command == "validate":
            table, ok = run_validate(spec)
            _emit(render_csv(table), args.out)
            return 0 if ok else 1
        table = RUNNERS[args.command](spec)
        _emit(render_csv(table), args.out)
        if args.plot_script:
            csv_name = str(args.out) if args.out else "data.csv"
            args.plot_script.write_text(PLOT_TEMPLATE.format(
                csv=csv_name, version=__version__, body=PLOT_BODIES[args.command],
                png=str(Path(csv_name).with_suffix(".png")),
            ))
        return 0
    except ConfigError as exc:
        print(f"isac-outage: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except ISACError as exc:
        print(f"isac-outage: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"isac-outage: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
