"""Command-line front end: ``mdk <subcommand> [options]``.

Every subcommand writes one document holding the tool version, the resolved
configuration, the seed and the results.  Exit status is 0 on success, 2 on
domain or input errors and 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .chain import (
    hypercube_labels,
    hypercube_walk,
    random_chain,
    random_reversible_chain,
    stationary_distribution,
)
from .divergence import alpha_div, f_div_chains, renyi_div
from .errors import DomainError, NumericalError
from .ergodicity import dobrushin_tv, double_well, estimate_eta_f, estimate_eta_renyi
from .hypothesis import aep_check, bayes_error_exact, bayes_error_mc, chernoff_information
from .io import chain_document, dumps, load_chain, load_distribution, to_csv
from .mixing import DEFAULT_T_CAP, DIVERGENCES, MODES, MixingQuery, mixing_time
from .projection import alpha_project, multistart_projection
from .spectral import spectrum_reversible

# options that never change results and are left out of the recorded config
_UNRECORDED = {"threads", "format", "output", "handler"}


def _resolve_threads(value) -> int:
    if value is None:
        value = os.environ.get("MDK_THREADS", "1")
    try:
        n = int(value)
    except ValueError:
        raise DomainError(f"thread count must be an integer, got {value!r}") from None
    if n < 1:
        raise DomainError("thread count must be at least 1")
    return n


def _order(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _chain_and_pi(chain_path, pi_path):
    states, P, pi = load_chain(chain_path)
    if pi_path is not None:
        pi = load_distribution(pi_path, P.shape[0])
    if pi is None:
        pi = stationary_distribution(P)
    return states, P, pi


def _pair(args):
    _, A, pi0 = load_chain(args.p0)
    _, B, pi1 = load_chain(args.p1)
    if B.shape != A.shape:
        raise DomainError("the two chains have different numbers of states")
    if args.pi is not None:
        pi = load_distribution(args.pi, A.shape[0])
    elif pi0 is not None:
        pi = pi0
    elif pi1 is not None:
        pi = pi1
    else:
        raise DomainError("no distribution given: pass --pi or include 'pi' in a chain file")
    return A, B, pi


# ---------------------------------------------------------------------------
# subcommands


def cmd_div(args, threads):
    _, M, pi_m = load_chain(args.m)
    _, L, pi_l = load_chain(args.l)
    if args.pi is not None:
        pi = load_distribution(args.pi, M.shape[0])
    else:
        pi = pi_m if pi_m is not None else pi_l
        if pi is None:
            raise DomainError("no distribution given: pass --pi or include 'pi' in a chain file")
    if args.renyi is not None:
        kind, value = f"renyi:{args.renyi!r}", renyi_div(M, L, pi, args.renyi)
    elif args.alpha is not None:
        kind, value = f"alpha:{args.alpha!r}", alpha_div(M, L, pi, args.alpha)
    else:
        kind, value = args.f, f_div_chains(M, L, pi, args.f)
    return {"divergence": kind, "value": value}


def cmd_mix(args, threads):
    _, P, pi = _chain_and_pi(args.chain, args.pi)
    q = MixingQuery(args.div, args.eps, args.mode, args.alpha, args.t_cap)
    report = mixing_time(P, pi, q, bounds=not args.no_bounds)
    return {"report": report, "finite": report.finite}


def cmd_eta(args, threads):
    _, P, pi = _chain_and_pi(args.chain, args.pi)
    if args.renyi is not None:
        est = estimate_eta_renyi(P, pi, args.renyi, args.starts, args.iters, args.seed,
                                 threads=threads)
    else:
        est = estimate_eta_f(P, pi, args.f, args.starts, args.iters, args.seed,
                             threads=threads)
    return {"estimate": est, "dobrushin_tv": dobrushin_tv(P)}


def cmd_project(args, threads):
    states, L, pi = _chain_and_pi(args.chain, args.pi)
    if args.starts:
        best, spread, _ = multistart_projection(L, pi, args.alpha, args.starts, args.seed,
                                                args.tol, args.max_iters, threads=threads)
        out = {"projection": best, "multistart_spread": spread}
    else:
        out = {"projection": alpha_project(L, pi, args.alpha, args.tol, args.max_iters)}
    if args.probes:
        from .projection import pythagorean_margin
        out["pythagorean_margin"] = pythagorean_margin(
            L, pi, args.alpha, out["projection"].M_star, args.probes, args.seed)
    out["states"] = states
    return out


def cmd_chernoff(args, threads):
    A, B, pi = _pair(args)
    return {"chernoff": chernoff_information(A, B, pi, args.tol)}


def cmd_httest(args, threads):
    A, B, pi = _pair(args)
    prior = (args.prior, 1.0 - args.prior)
    fit = bayes_error_mc(A, B, pi, prior, args.n_grid, args.trials, args.seed, threads=threads)
    out = {"fit": fit}
    if args.exact_n:
        out["exact"] = [{"n": n, "pe": bayes_error_exact(A, B, pi, prior, n)}
                        for n in args.exact_n]
    if args.aep:
        out["aep"] = aep_check(A, B, pi, args.aep, args.seed, threads=threads)
    return out


def cmd_spectrum(args, threads):
    states, P, pi = _chain_and_pi(args.chain, args.pi)
    s = spectrum_reversible(P, pi)
    return {"states": states, "eigenvalues": s.eigenvalues, "gamma_star": s.gamma_star,
            "lambda_star": s.lambda_star, "sweeps": s.sweeps}


def cmd_make_chain(args, threads):
    if args.kind == "hypercube":
        P, pi = hypercube_walk(args.n)
        return chain_document(P, pi, hypercube_labels(args.n))
    if args.kind == "double-well":
        P, pi = double_well(args.beta)
        return chain_document(P, pi)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    if args.kind == "random":
        P = random_chain(args.n, rng)
        return chain_document(P, stationary_distribution(P))
    P, pi = random_reversible_chain(args.n, rng)
    return chain_document(P, pi)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: $MDK_THREADS or 1)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", "-o", default=None, help="write here instead of stdout")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="mdk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mdk {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("div", parents=[common], help="divergence between two chains")
    p.add_argument("--m", required=True, help="chain file for M")
    p.add_argument("--l", required=True, help="chain file for L")
    p.add_argument("--pi", help="distribution file (default: pi of M, then of L)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--renyi", type=_order, help="Renyi order (0, 1 and inf allowed)")
    g.add_argument("--alpha", type=_order, help="alpha-divergence order")
    g.add_argument("--f", default="kl", choices=("kl", "tv", "hellinger", "chi2"))
    p.set_defaults(handler=cmd_div)

    p = sub.add_parser("mix", parents=[common], help="mixing time and spectral bounds")
    p.add_argument("--chain", required=True)
    p.add_argument("--pi")
    p.add_argument("--div", choices=DIVERGENCES, default="tv")
    p.add_argument("--alpha", type=_order)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--mode", choices=MODES, default="average")
    p.add_argument("--t-cap", type=int, default=DEFAULT_T_CAP)
    p.add_argument("--no-bounds", action="store_true")
    p.set_defaults(handler=cmd_mix)

    p = sub.add_parser("eta", parents=[common], help="contraction coefficient bounds")
    p.add_argument("--chain", required=True)
    p.add_argument("--pi")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--f", default="kl", choices=("kl", "tv", "hellinger", "chi2"))
    g.add_argument("--renyi", type=_order)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--iters", type=int, default=500)
    p.set_defaults(handler=cmd_eta)

    p = sub.add_parser("project", parents=[common], help="alpha-projection onto reversible chains")
    p.add_argument("--chain", required=True)
    p.add_argument("--pi")
    p.add_argument("--alpha", type=_order, required=True)
    p.add_argument("--tol", type=float, default=1e-13)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--starts", type=int, default=0, help="extra random starts")
    p.add_argument("--probes", type=int, default=0, help="Pythagorean probes")
    p.set_defaults(handler=cmd_project)

    for name, fn, text in (("chernoff", cmd_chernoff, "Chernoff information"),
                           ("httest", cmd_httest, "Monte-Carlo Bayes error exponent")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--p0", required=True)
        p.add_argument("--p1", required=True)
        p.add_argument("--pi")
        p.set_defaults(handler=fn)
        if name == "chernoff":
            p.add_argument("--tol", type=float, default=1e-10)
        else:
            p.add_argument("--prior", type=float, default=0.5, help="prior weight of H0")
            p.add_argument("--n-grid", type=_int_list, default=[4, 8, 16, 32])
            p.add_argument("--trials", type=int, default=10**5)
            p.add_argument("--exact-n", type=_int_list, default=[])
            p.add_argument("--aep", type=int, default=0, help="sample size for an AEP check")

    p = sub.add_parser("spectrum", parents=[common], help="spectrum of a reversible chain")
    p.add_argument("--chain", required=True)
    p.add_argument("--pi")
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("make-chain", parents=[common], help="write a chain file")
    p.add_argument("kind", choices=("hypercube", "double-well", "random", "random-reversible"))
    p.add_argument("--n", type=int, default=2, help="dimension or number of states")
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(handler=cmd_make_chain)
    return parser


def run(argv=None) -> tuple[int, str]:
    """Parse ``argv``, run the subcommand and return ``(exit code, document)``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = _resolve_threads(args.threads)
        results = args.handler(args, threads)
    except NumericalError as exc:
        return 3, f"numerical error: {exc}\n"
    except DomainError as exc:
        return 2, f"error: {exc}\n"
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED}
    meta = {"tool": "mdk", "version": __version__, "config": config, "seed": args.seed}
    if args.subcommand == "make-chain":
        doc = {**results, **meta}
    else:
        doc = {**meta, "results": results}
    text = to_csv(doc) if args.format == "csv" else dumps(doc)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
        return 0, ""
    return 0, text


def main(argv=None) -> int:
    code, text = run(argv)
    stream = sys.stdout if code == 0 else sys.stderr
    stream.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
