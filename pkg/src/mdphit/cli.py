"""Command-line interface: ``mdphit <command> ...``.

Exit codes: 0 ok / equivalent, 1 not equivalent, 2 invalid model, 3 parse
error, 4 infeasible coupling, 5 all episodes censored, 6 instance too large
for the exact oracle, 7 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .errors import (
    AllCensored,
    InfeasibleCoupling,
    MdpHitError,
    NoConvergence,
    ParseError,
    SizeMismatch,
    SolveFailed,
    TooLarge,
    ValidationError,
)
from .gw import GwParams, build_triple, equivalence_check, gw_exhaustive, gw_solve
from .hitting import hitting_discounted, hitting_plain, hitting_restart
from .mc_oracle import SimConfig, estimate_hitting
from .mdp_core import induced_transition, initial_pair_distribution, occupancy_measure
from .restart_chain import build_restart_chain, support_set

EXIT_OK = 0
EXIT_NOT_EQUIVALENT = 1
EXIT_INVALID = 2
EXIT_PARSE = 3
EXIT_INFEASIBLE = 4
EXIT_CENSORED = 5
EXIT_TOO_LARGE = 6
EXIT_NUMERICAL = 7


def _error(kind, message, **extra):
    sys.stderr.write(io.dumps({"error": kind, "message": message, **extra}))


def _emit(doc):
    sys.stdout.write(io.dumps(doc))


def cmd_validate(args):
    mdp = io.load_mdp(args.path)
    _emit({"valid": True, "name": mdp.name, "states": mdp.n_states,
           "actions": mdp.n_actions, "pairs": mdp.n_pairs, "gamma": mdp.gamma,
           "warnings": list(mdp.warnings)})
    return EXIT_OK


def cmd_occupancy(args):
    mdp = io.load_mdp(args.path)
    occ = occupancy_measure(induced_transition(mdp), initial_pair_distribution(mdp), mdp.gamma)
    values = occ.normalized if args.normalized else occ.values
    _emit(io.matrix_document(
        mdp.index.labels(), ["occupancy"], values,
        kind="occupancy", gamma=mdp.gamma, normalized=args.normalized,
        sum=float(values.sum())))
    return EXIT_OK


def cmd_hitting(args):
    mdp = io.load_mdp(args.path)
    p_pi = induced_transition(mdp)
    rho0 = initial_pair_distribution(mdp)
    labels = mdp.index.labels()
    meta = {"kind": args.kind, "gamma": mdp.gamma, "index_order": "T[i][j] = from col j to row i"}
    if args.kind == "plain":
        t = hitting_plain(p_pi)
    elif args.kind == "discounted":
        t = hitting_discounted(p_pi, mdp.gamma)
    else:
        support = support_set(occupancy_measure(p_pi, rho0, mdp.gamma))
        t = hitting_restart(p_pi, rho0, mdp.gamma, support)
        meta["support"] = [labels[i] for i in support]
    _emit(io.matrix_document(labels, labels, t.entries, **meta))
    return EXIT_OK


def cmd_gw(args):
    a, b = io.load_mdp(args.path_a), io.load_mdp(args.path_b)
    normalize = not args.no_normalize
    tX, tY = build_triple(a, normalize), build_triple(b, normalize)
    if args.exact:
        result = gw_exhaustive(tX, tY)
    else:
        result = gw_solve(tX, tY, GwParams(restarts=args.restarts, seed=args.seed))
    coupling = io.matrix_document(
        [io.pair_label(x) for x in tX.labels], [io.pair_label(y) for y in tY.labels],
        result.coupling, kind="coupling", normalized=normalize)
    report = {"value": result.value, "status": result.status,
              "restarts_used": result.restarts_used}
    if args.coupling_out:
        with open(args.coupling_out, "w", encoding="utf-8") as fh:
            fh.write(io.dumps(coupling))
        report["coupling_path"] = args.coupling_out
    else:
        report["coupling"] = coupling
    _emit(report)
    return EXIT_OK


def cmd_equiv(args):
    tX = build_triple(io.load_mdp(args.path_a))
    tY = build_triple(io.load_mdp(args.path_b))
    try:
        phi = equivalence_check(tX, tY, args.tol)
    except SizeMismatch as exc:
        sys.stdout.write(f"equivalent: false\nreason: SizeMismatch ({exc})\n")
        return EXIT_NOT_EQUIVALENT
    if phi is None:
        sys.stdout.write("equivalent: false\nreason: no bijection preserves measures and hitting times\n")
        return EXIT_NOT_EQUIVALENT
    lines = ["equivalent: true"]
    lines += [f"{io.pair_label(tX.labels[x])} -> {io.pair_label(tY.labels[y])}"
              for x, y in phi.items()]
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _pair_arg(mdp, text):
    labels = mdp.index.labels()
    if text in labels:
        return labels.index(text)
    try:
        k = int(text)
    except ValueError:
        raise ParseError(f"unknown pair {text!r}; use an index or 'state,action'") from None
    if not 0 <= k < len(labels):
        raise ParseError(f"pair index {k} out of range")
    return k


def cmd_simulate(args):
    mdp = io.load_mdp(args.path)
    target, start = _pair_arg(mdp, args.target), _pair_arg(mdp, args.start)
    chain = build_restart_chain(induced_transition(mdp), initial_pair_distribution(mdp), mdp.gamma)
    config = SimConfig(seed=args.seed, episodes=args.episodes, max_steps=args.steps)
    labels = mdp.index.labels()
    try:
        est = estimate_hitting(chain, target, start, config)
    except AllCensored as exc:
        _error("AllCensored", str(exc), target=labels[target], start=labels[start])
        return EXIT_CENSORED
    _emit({"target": labels[target], "start": labels[start], "seed": args.seed,
           "episodes": args.episodes, "mean": est.mean, "std_error": est.std_error,
           "samples": est.samples, "censored": est.censored})
    return EXIT_OK


def _seed(text):
    value = int(text, 10)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="mdphit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate an MDP document")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("occupancy", help="discounted occupancy measure per state-action pair")
    p.add_argument("path")
    p.add_argument("--normalized", action="store_true", help="multiply by (1 - gamma)")
    p.set_defaults(func=cmd_occupancy)

    p = sub.add_parser("hitting", help="expected first-hitting time matrix")
    p.add_argument("path")
    p.add_argument("--kind", choices=("plain", "restart", "discounted"), default="restart")
    p.set_defaults(func=cmd_hitting)

    p = sub.add_parser("gw", help="Gromov-Wasserstein distance between two MDPs")
    p.add_argument("path_a")
    p.add_argument("path_b")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact oracle (supports <= 4)")
    mode.add_argument("--solver", action="store_true", help="multi-restart solver (default)")
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--no-normalize", action="store_true",
                   help="keep raw occupancies (total mass 1/(1-gamma))")
    p.add_argument("--coupling-out", metavar="PATH", help="write the coupling here")
    p.set_defaults(func=cmd_gw)

    p = sub.add_parser("equiv", help="search for a bijection making two MDPs equivalent")
    p.add_argument("path_a")
    p.add_argument("path_b")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("simulate", help="Monte Carlo hitting time on the restart chain")
    p.add_argument("path")
    p.add_argument("--target", required=True, help="pair index or 'state,action'")
    p.add_argument("--start", required=True, help="pair index or 'state,action'")
    p.add_argument("--episodes", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=None, help="per-episode step cap")
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        _error("ParseError", str(exc))
        return EXIT_PARSE
    except ValidationError as exc:
        _error(type(exc).__name__, str(exc), location=exc.location)
        return EXIT_INVALID
    except InfeasibleCoupling as exc:
        _error("InfeasibleCoupling", str(exc), mass_x=exc.mass_x, mass_y=exc.mass_y)
        return EXIT_INFEASIBLE
    except TooLarge as exc:
        _error("TooLarge", str(exc))
        return EXIT_TOO_LARGE
    except (SolveFailed, NoConvergence, MdpHitError) as exc:
        _error(type(exc).__name__, str(exc))
        return EXIT_NUMERICAL


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
