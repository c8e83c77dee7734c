"""Command-line entry point: ``sadic <command> [flags]``.

Exit codes: 0 ok, 2 configuration error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, lab, rauzy, veech

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--precision-bits", type=int, dest="precision_bits")
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", dest="out_dir")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sadic", description="S-adic flows, cocycles and spectral experiments")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rauzy-class", help="labelled Rauzy class of a permutation")
    p.add_argument("--perm", help="one-row permutation, e.g. 3,2,1")
    _common(p)

    p = sub.add_parser("good-word", help="simple positive path with generating good return words")
    p.add_argument("--perm")
    _common(p)

    p = sub.add_parser("cocycle", help="norms of the cocycle products A(n)")
    p.add_argument("--seq")
    p.add_argument("--N", type=int)
    _common(p)

    p = sub.add_parser("lyapunov", help="Lyapunov spectrum of the cocycle")
    p.add_argument("--seq")
    p.add_argument("--N", type=int)
    p.add_argument("--trials", type=int)
    _common(p)

    p = sub.add_parser("birkhoff", help="twisted Birkhoff integrals at one (omega, R)")
    p.add_argument("--seq")
    p.add_argument("--roof")
    p.add_argument("--omega", type=float)
    p.add_argument("--R", type=float)
    p.add_argument("--function")
    p.add_argument("--n-points", type=int, dest="n_points")
    _common(p)

    p = sub.add_parser("spectral", help="L2 growth of twisted integrals and Holder fits")
    p.add_argument("--seq")
    p.add_argument("--roof")
    p.add_argument("--omega-grid", dest="omega_grid")
    p.add_argument("--R-grid", dest="R_grid")
    p.add_argument("--function")
    p.add_argument("--n-points", type=int, dest="n_points")
    p.add_argument("--svg", action="store_true", default=None)
    _common(p)

    p = sub.add_parser("veech", help="nearest-lattice tracking of A(n)(omega s)")
    p.add_argument("--seq")
    p.add_argument("--roof")
    p.add_argument("--omega", type=float)
    p.add_argument("--omega-grid", dest="omega_grid", help="also report good-time densities on this grid")
    p.add_argument("--N", type=int)
    p.add_argument("--varrho", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--B", type=float)
    _common(p)

    p = sub.add_parser("ek-count", help="covering count of lattice sequences")
    p.add_argument("--seq")
    p.add_argument("--N", type=int)
    p.add_argument("--N-grid", dest="N_grid", help="also fit exponential rates over these N")
    p.add_argument("--delta", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--branch-budget", type=int, dest="branch_budget")
    _common(p)

    p = sub.add_parser("fit", help="Holder exponent fit from a spectral CSV")
    p.add_argument("--table")
    _common(p)
    return ap


def _print_summary(man: lab.RunManifest, out=None) -> None:
    out = out or sys.stdout
    width = max((len(k) for k in man.summary), default=0)
    print(f"{man.command}  [{man.config_hash[:12]}]", file=out)
    for k, v in man.summary.items():
        v = f"{v:.6g}" if isinstance(v, float) else v
        print(f"  {k:<{width}}  {v}", file=out)
    for name in man.outputs:
        print(f"  -> {name}", file=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = vars(args).copy()
    command = opts.pop("command")
    path = opts.pop("config")
    try:
        cfg = lab.ExperimentConfig.load(command, path, opts)
        man = lab.run_experiment(cfg)
    except lab.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (rauzy.SearchBudgetExceeded, veech.BudgetExceeded) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    _print_summary(man)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
