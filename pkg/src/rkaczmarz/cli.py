"""Command-line entry point: ``rkaczmarz {generate,solve,verify,rayleigh}``.

Exit codes: 0 success, 1 a verification check failed, 2 usage error
(bad flags, dimension mismatch), 3 I/O or parse failure, 4 degenerate matrix
(zero row, SVD breakdown), 5 theorem hypothesis violated.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, generators, textio
from .kaczmarz import SolveConfig, ZeroRowError, solve
from .linalg import SvdConvergenceError, svd
from .prng import box_muller, make_rng, mix_seed

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_DEGENERATE, EXIT_HYPOTHESIS = 0, 1, 2, 3, 4, 5
SEED_ENV = "KACZMARZ_DEFAULT_SEED"
RANDOM_PROBES = 100

KIND_ALIASES = {
    "diagonal": "diagonal",
    "planted": "gaussian_shifted_duplicate",
    "gaussian_shifted_duplicate": "gaussian_shifted_duplicate",
    "consistent": "random_consistent",
    "random_consistent": "random_consistent",
}


class UsageError(Exception):
    pass


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _check_writable(path):
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise OSError(f"cannot write to {path}")


def _load_vector(path, length, flag):
    x = textio.read_vector(path)
    if x.size != length:
        raise UsageError(f"{flag} has length {x.size}, expected length {length}")
    return x


def sibling(path, tag):
    """``sys.mat`` -> ``sys_x.mat`` for the companion files of a system."""
    p = Path(path)
    return p.with_name(f"{p.stem}_{tag}{p.suffix}")


def cmd_generate(args):
    if args.kind not in KIND_ALIASES:
        raise UsageError(f"unknown --kind {args.kind!r}")
    kind = KIND_ALIASES[args.kind]
    seed = _seed(args)
    _check_writable(args.out)
    if kind == "diagonal":
        if not args.entries:
            raise UsageError("--kind diagonal needs --entries")
        try:
            entries = tuple(float(t) for t in args.entries.split(","))
        except ValueError:
            raise UsageError(f"bad --entries {args.entries!r}") from None
        spec = generators.GeneratorSpec(kind, n=len(entries), entries=entries, seed=seed)
    elif kind == "gaussian_shifted_duplicate":
        if args.n is None:
            raise UsageError("--kind planted needs --n")
        shift = args.shift if args.shift is not None else generators.default_shift(args.n)
        spec = generators.GeneratorSpec(kind, n=args.n, m=args.n, shift=shift,
                                        perturb=args.perturb, seed=seed)
    else:
        if args.n is None or args.m is None:
            raise UsageError("--kind consistent needs --m and --n")
        spec = generators.GeneratorSpec(kind, n=args.n, m=args.m, seed=seed)
    built = spec.build()
    if kind == "random_consistent":
        a, x, b = built
        textio.write_matrix(args.out, a)
        textio.write_vector(sibling(args.out, "x"), x)
        textio.write_vector(sibling(args.out, "b"), b)
        print(f"wrote {args.out}, {sibling(args.out, 'x')}, {sibling(args.out, 'b')}")
    else:
        textio.write_matrix(args.out, built)
        print(f"wrote {args.out} ({built.shape[0]} x {built.shape[1]})")
    return EXIT_OK


def cmd_solve(args):
    _check_writable(args.out)
    a = textio.read_matrix(args.matrix)
    m, n = a.shape
    b = _load_vector(args.b, m, "--b") if args.b else np.zeros(m)
    x0 = _load_vector(args.x0, n, "--x0") if args.x0 else np.zeros(n)
    true_x = _load_vector(args.x_true, n, "--x-true") if args.x_true else None
    cfg = SolveConfig(seed=_seed(args), max_iters=args.iters, residual_tol=args.tol,
                      trace_every=args.trace_every, track_coefficients=args.coefficients)
    fact = svd(a) if args.coefficients else None
    if args.coefficients and true_x is None and np.any(b):
        raise UsageError("--coefficients needs --x-true unless b = 0")
    trace = solve(a, b, x0, cfg, true_x=true_x, svd=fact)
    if args.out:
        Path(args.out).write_text(textio.trace_csv(trace))
    summary = f"steps {trace.steps} residual {textio.fmt(trace.residual[-1])}"
    if true_x is not None:
        summary += f" error {textio.fmt(trace.error[-1])}"
    print(summary)
    return EXIT_OK


def probes_for(a, fact, seed, extra=None):
    """Coordinate axes, right singular vectors, then seeded Gaussian probes."""
    n = a.shape[1]
    probes = list(np.eye(n)) + list(fact.v.T)
    rng = make_rng(mix_seed(seed, 0))
    probes += list(box_muller(rng, RANDOM_PROBES * n).reshape(RANDOM_PROBES, n))
    if extra is not None:
        probes.append(extra)
    return probes


def cmd_verify(args):
    _check_writable(args.out)
    a = textio.read_matrix(args.matrix)
    m, n = a.shape
    seed = _seed(args)
    if m < n:
        raise UsageError(f"verify needs m >= n, got {m} x {n}")
    if args.trials == 1:
        raise UsageError("--trials must be 0 (oracle checks only) or at least 2")
    x0 = _load_vector(args.x0, n, "--x0") if args.x0 else None
    fact = svd(a)
    probes = probes_for(a, fact, seed, x0)
    if args.theorem == 1:
        reports = [analysis.verify_theorem1(a, fact, probes)]
    elif args.theorem == 2:
        reports = [analysis.verify_theorem2(a, probes)]
    else:
        reports = [analysis.verify_theorem3(a, probes)]

    if args.trials:
        y0 = x0 if x0 is not None else box_muller(make_rng(mix_seed(seed, 1)), n)
        cfg = SolveConfig(seed=seed, max_iters=args.iters, trace_every=1)
        stats = analysis.ensemble_run(a, np.zeros(m), y0, cfg, args.trials, fact, np.zeros(n))
        if args.theorem == 1:
            reports.append(analysis.theorem1_monte_carlo(stats, fact, y0, a=a))
        elif args.theorem == 2:
            reports.append(analysis.theorem2_monte_carlo(stats, y0))
            reports.append(analysis.strohmer_vershynin_envelope(stats, fact, y0))
        else:
            reports.append(analysis.theorem3_monte_carlo(stats))

    if args.out:
        Path(args.out).write_text(textio.report_csv(reports))
    for r in reports:
        print(r.summary())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_rayleigh(args):
    _check_writable(args.out)
    a = textio.read_matrix(args.matrix)
    m, n = a.shape
    if m < n:
        raise UsageError(f"rayleigh needs m >= n, got {m} x {n}")
    x0 = _load_vector(args.x0, n, "--x0") if args.x0 else np.ones(n)
    iters = args.iters if args.iters is not None else 10 * n
    cfg = SolveConfig(seed=_seed(args), max_iters=iters, trace_every=args.trace_every)
    fact = svd(a, method=args.svd)
    trace = analysis.minimize_rayleigh(a, x0, cfg, svd=fact)
    _emit(textio.rayleigh_csv(trace), args.out)
    if args.out:
        print(f"final quotient {textio.fmt(trace.rayleigh[-1])} "
              f"overlap with v_n {textio.fmt(trace.overlap[-1])} "
              f"(sigma_n {textio.fmt(fact.sigma[-1])}, sigma_n-1 "
              f"{textio.fmt(fact.sigma[-2] if n > 1 else np.nan)})")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="rkaczmarz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"PRNG seed (default ${SEED_ENV} or 0)")
        p.add_argument("--out", default=None)

    g = sub.add_parser("generate", help="write a test matrix or consistent system")
    common(g)
    g.add_argument("--kind", required=True, help="diagonal | planted | consistent")
    g.add_argument("--entries", help="comma-separated diagonal entries")
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--shift", type=float, help="diagonal shift (default 10 sqrt(n))")
    g.add_argument("--perturb", type=float, default=0.01)
    g.set_defaults(func=cmd_generate, out_required=True)

    s = sub.add_parser("solve", help="run randomized Kaczmarz and write a trace CSV")
    common(s)
    s.add_argument("--matrix", required=True)
    s.add_argument("--b")
    s.add_argument("--x0")
    s.add_argument("--x-true", dest="x_true")
    s.add_argument("--iters", type=int, default=10_000)
    s.add_argument("--tol", type=float, default=0.0)
    s.add_argument("--trace-every", type=int, default=10)
    s.add_argument("--coefficients", action="store_true",
                   help="log singular coefficients of the error (computes an SVD)")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check the singular-direction identities")
    common(v)
    v.add_argument("--theorem", type=int, choices=(1, 2, 3), required=True)
    v.add_argument("--matrix", required=True)
    v.add_argument("--trials", type=int, default=0,
                   help="Monte Carlo trials (0: exact one-step checks only)")
    v.add_argument("--iters", type=int, default=50, help="Monte Carlo steps")
    v.add_argument("--x0", help="starting error for Monte Carlo runs, also used as a probe")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("rayleigh", help="minimize ||Ax||/||x|| by solving Ax = 0")
    common(r)
    r.add_argument("--matrix", required=True)
    r.add_argument("--iters", type=int, default=None, help="default 10 n")
    r.add_argument("--trace-every", type=int, default=10)
    r.add_argument("--x0", help="start vector (default all ones)")
    r.add_argument("--svd", choices=("jacobi", "lapack"), default="jacobi")
    r.set_defaults(func=cmd_rayleigh)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out_required", False) and args.out is None:
        parser.error("--out is required")
    try:
        return args.func(args)
    except analysis.HypothesisViolation as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ZeroRowError, SvdConvergenceError) as exc:
        print(f"degenerate matrix: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except textio.MatrixFormatError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
