"""Command-line driver for the adaptive solver.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

import argparse
import sys

from .driver import ConvergenceTable, RunConfig, adaptive_loop, emit_csv
from .errors import ConfigError, SolverError

_PROBLEM_BY_FLAG = {"1": "test1", "2": "test2", "3": "test3", "patch": "patch"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stabelast",
        description="Adaptive stabilised P1-P0 solver for nearly incompressible "
        "plane elasticity with a posteriori error estimation.",
    )
    p.add_argument("--problem", required=True, choices=sorted(_PROBLEM_BY_FLAG))
    p.add_argument("--formulation", default="herrmann", choices=["herrmann", "hydrostatic"])
    p.add_argument("--estimator", default="poisson", choices=["residual", "poisson"])
    p.add_argument("--refinement", default="adaptive", choices=["uniform", "adaptive"])
    p.add_argument("--nu", type=float, default=None, help="Poisson ratio (problem default if omitted)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--mu", type=float, default=None, help="shear modulus")
    group.add_argument("--E", type=float, default=None, help="Young's modulus")
    p.add_argument("--theta", type=float, default=0.5, help="bulk marking parameter (default 0.5)")
    p.add_argument("--max-dof", type=float, default=1e5)
    p.add_argument("--initial-level", type=int, default=None)
    p.add_argument("--out", default=None, help="convergence table CSV path")
    p.add_argument("--dump-mesh", default=None, help="write the final mesh (ASCII format)")
    p.add_argument("--dump-indicators", default=None, help="write final per-element indicators CSV")
    return p


def _print_table(table: ConvergenceTable) -> None:
    print("level      dof          eta    theta_osc  exact_error  effectivity   rate")
    for r in table.rows:
        exact = f"{r.exact_error:12.5e}" if r.exact_error is not None else " " * 12
        eff = f"{r.effectivity:11.4f}" if r.effectivity is not None else " " * 11
        rate = f"{r.rate:7.3f}" if r.rate is not None else " " * 7
        print(f"{r.level:5d} {r.dof:8d} {r.eta:12.5e} {r.theta_osc:12.5e} {exact} {eff} {rate}")
    if table.tail_rate_estimated is not None:
        print(f"tail rate (estimated): {table.tail_rate_estimated:.3f}")
    if table.tail_rate_exact is not None:
        print(f"tail rate (exact):     {table.tail_rate_exact:.3f}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = RunConfig(
        problem=_PROBLEM_BY_FLAG[args.problem],
        formulation=args.formulation,
        estimator=args.estimator,
        refinement=args.refinement,
        theta=args.theta,
        nu=args.nu,
        mu=args.mu,
        E=args.E,
        max_dof=int(args.max_dof),
        initial_level=args.initial_level,
    )
    keep = args.dump_mesh is not None or args.dump_indicators is not None
    try:
        config.validate()
        table = adaptive_loop(config, keep_meshes=keep)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3

    _print_table(table)
    if args.out:
        emit_csv(table, args.out)
    if keep:
        from .estimators import dump_indicators
        from .mesh import write_mesh

        mesh, _, indicators, eta_PK = table.meshes[-1]
        if args.dump_mesh:
            write_mesh(mesh, args.dump_mesh)
        if args.dump_indicators:
            dump_indicators(args.dump_indicators, indicators, eta_PK)
    return 0


if __name__ == "__main__":
    sys.exit(main())
