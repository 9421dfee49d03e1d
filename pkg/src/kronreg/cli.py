"""Command-line entry point: ``kronreg run | render | selfcheck``."""

import argparse
import sys

import numpy as np

from .errors import KronregError
from .experiment import CANONICAL_LABELS, load_config, parse_regularizer, render_input, run
from .linalg import kron, vec
from .tikhonov import TikhonovKronProblem, direct_solve, solve_general, solve_kron

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

SELFCHECK_MUS = (1e-6, 1e-3, 1.0)
SELFCHECK_DIRECT_RTOL = 1e-7
SELFCHECK_GENERAL_RTOL = 1e-8


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def selfcheck(sizes=(4, 5), instances=3, seed=2024):
    """Compare the Krylov solvers with a dense solve on small random problems.

    Returns a list of ``(name, ok, worst_deviation)`` tuples.
    """
    rng = np.random.default_rng(seed)
    worst_direct = 0.0
    worst_general = 0.0
    for n in sizes:
        for _ in range(instances):
            k1 = rng.standard_normal((n, n)) + n * np.eye(n)
            k2 = rng.standard_normal((n, n)) + n * np.eye(n)
            b = rng.standard_normal((n, n))
            label = CANONICAL_LABELS[rng.integers(len(CANONICAL_LABELS))]
            reg1, reg2 = parse_regularizer(label).build(n)
            k_full = kron(k2, k1)
            l_full = kron(reg2.effective, reg1.effective)
            for mu in SELFCHECK_MUS:
                problem = TikhonovKronProblem(k1, k2, b, reg1, reg2, 0.0, k_max=n * n)
                x_kron = solve_kron(problem, mu=mu).x_solution
                x_direct = direct_solve(k_full, vec(b), l_full, mu)
                worst_direct = max(worst_direct, _rel(vec(x_kron), x_direct))
                x_gen = solve_general(k_full, vec(b), reg1, reg2, k_max=n * n, mu=mu).x_solution
                worst_general = max(worst_general, _rel(x_gen, vec(x_kron)))
    return [
        ("solve_kron vs direct_solve", worst_direct <= SELFCHECK_DIRECT_RTOL, worst_direct),
        ("solve_general vs solve_kron", worst_general <= SELFCHECK_GENERAL_RTOL, worst_general),
    ]


def _cmd_run(args):
    cfg = load_config(args.config)

    def log(row):
        if not args.quiet:
            status = "ok" if row.converged else "NOT CONVERGED"
            print(
                f"{row.regularizer_label:>12} nu={row.noise_level:g} seed={row.seed} "
                f"k={row.k} mu={row.mu:.3e} err={row.relative_error:.4e} {status}",
                flush=True,
            )

    rows = run(cfg, log=log)
    failed = sum(not row.converged for row in rows)
    print(f"{len(rows)} runs, {failed} not converged; results in {cfg.output_dir}")
    return EXIT_NOT_CONVERGED if failed else EXIT_OK


def _cmd_render(args):
    written = render_input(args.input, args.out)
    print(f"wrote {len(written)} image(s) to {args.out}")
    return EXIT_OK


def _cmd_selfcheck(args):
    ok = True
    for name, passed, dev in selfcheck():
        print(f"{'PASS' if passed else 'FAIL'} {name}: max relative deviation {dev:.2e}")
        ok &= passed
    return EXIT_OK if ok else EXIT_ERROR


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kronreg",
        description="Kronecker Tikhonov regularization experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment described by a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    p_run.add_argument("-q", "--quiet", action="store_true", help="no per-run progress lines")
    p_run.set_defaults(func=_cmd_run)

    p_render = sub.add_parser("render", help="render solution reports as PGM images")
    p_render.add_argument("--input", required=True, help="results.csv or a single .npz report")
    p_render.add_argument("--out", required=True, help="output directory")
    p_render.set_defaults(func=_cmd_render)

    p_check = sub.add_parser("selfcheck", help="small-n oracle equivalence checks")
    p_check.set_defaults(func=_cmd_selfcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KronregError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
