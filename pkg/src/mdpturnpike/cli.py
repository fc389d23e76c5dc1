"""Command-line entry point.

Every analysis command reads a JSON input (or inline parameters), writes
``<command>.json`` plus CSV tables into ``--out`` and exits with 0 on
success, 1 on invalid input and 2 when the analysis is inconclusive or
numerically broken.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._constants import DECISION_CAP, PRODUCT_CAP, TAU_TIE
from .chain import analyze_matrix
from .core import FactoredMDP
from .errors import AnalysisError, ValidationError
from .optimality import DEFAULT_BETA_GRID, all_gains, discounted_optimal_decisions, summarize
from .serialize import dumps, input_kind, load_explicit, load_json, load_model, write_text
from .turnpike import discounted_turnpike, undiscounted_turnpike
from .walk import (
    STRATEGIES,
    RandomWalkSpec,
    check_conjecture,
    counterexample_5_3,
    counterexample_spec,
    derive,
    monte_carlo_average,
    parrondo,
    solve_bellman,
    to_fraction,
)

EXIT_OK, EXIT_INPUT, EXIT_ANALYSIS = 0, 1, 2


def _csv_table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _need_input(args):
    if not args.input:
        raise ValidationError(f"{args.command}: --input is required")
    return load_json(args.input)


def _fmt(d):
    return " ".join(str(a) for a in d)


# ---------------------------------------------------------------------------
# commands: each returns (report, {csv name: text}, exit code)
# ---------------------------------------------------------------------------

def cmd_analyze_chain(args):
    data = _need_input(args)
    if input_kind(data) == "chain":
        Q = np.asarray(data["Q"], dtype=np.float64)
        R = data.get("R")
        rep = analyze_matrix(Q, R, args.lin_tol)
        entries = [(None, rep)]
    else:
        model, _, _ = load_model(data, args.decision_cap)
        entries = [(d, analyze_matrix(model.Q[k], model.R[k], args.lin_tol))
                   for k, d in enumerate(model.decisions)]
    report = {"chains": [{"decision": None if d is None else list(d), **r.to_dict()} for d, r in entries]}
    rows = [
        ["" if d is None else _fmt(d), s, repr(float(r.gain[s])), repr(float(r.bias[s]))]
        for d, r in entries for s in range(r.gain.size)
    ]
    return report, {"gain_bias.csv": _csv_table(["decision", "state", "gain", "bias"], rows)}, EXIT_OK


def cmd_optimality(args):
    model, _, _ = load_model(_need_input(args), args.decision_cap)
    summary = summarize(model, DEFAULT_BETA_GRID, args.tol)
    report = summary.to_dict()
    if args.beta is not None:
        ds, V = discounted_optimal_decisions(model, args.beta, args.tol)
        report["discounted"] = {"beta": args.beta, "optimal_decisions": [list(d) for d in ds], "value": V}
    gains = all_gains(model)
    rows = [[_fmt(d)] + [repr(float(x)) for x in g] for d, g in zip(model.decisions, gains)]
    header = ["decision"] + [f"gain_s{s}" for s in range(model.M)]
    return report, {"gains.csv": _csv_table(header, rows)}, EXIT_OK


def cmd_turnpike_discounted(args):
    data = _need_input(args)
    if input_kind(data) != "model":
        raise ValidationError("turnpike-discounted needs a factored model (fields M, N, rewards, transitions)")
    if args.beta is None:
        raise ValidationError("turnpike-discounted: --beta in (0, 1) is required")
    mdp = FactoredMDP.from_dict(data)
    rep = discounted_turnpike(mdp, args.beta, Kmax=args.kmax, tie=args.tol)
    rows = [[k, str(ok).lower()] for k, ok in enumerate(rep.inclusion)]
    code = EXIT_ANALYSIS if rep.inconclusive else EXIT_OK
    return rep.to_dict(), {"inclusion.csv": _csv_table(["k", "argmax_in_Dstar"], rows)}, code


def cmd_turnpike_undiscounted(args):
    model, _, W0 = load_model(_need_input(args), args.decision_cap)
    rep = undiscounted_turnpike(model, W0, args.kmax, args.jmax, args.product_cap, args.tol)
    return rep.to_dict(), {"span_history.csv": rep.span_csv()}, EXIT_OK


def cmd_walk(args):
    spec = RandomWalkSpec.from_dict(_need_input(args))
    exact = spec.exact and not args.float
    conj = check_conjecture(spec, args.imax, args.jmax, args.decision_cap, args.product_cap, exact)
    sol = solve_bellman(spec, args.imax, exact=exact)
    derived = derive(spec, args.decision_cap)
    report = {
        "spec": spec.to_dict(),
        "exact": exact,
        "L": derived.L,
        "c_star": derived.c_star,
        "conjecture": conj.to_dict(),
        "solution": sol.to_dict(spec.names),
    }
    return report, {"levels.csv": sol.level_table_csv(spec.names)}, EXIT_OK


def cmd_counterexample(args):
    rep = counterexample_5_3(args.epsilon, args.h, args.j_max, exact=not args.float, Jmax=args.jmax)
    code = EXIT_OK if rep.ok else EXIT_ANALYSIS
    return rep.to_dict(), {"z_table.csv": rep.z_table_csv()}, code


def cmd_parrondo(args):
    rep = parrondo(args.epsilon, args.h, args.t_max)
    report = rep.to_dict()
    if args.mc:
        rng = np.random.default_rng(args.seed)
        model = derive(counterexample_spec(args.epsilon, args.h)).folded_model
        T = min(args.t_max, 1000)
        mc = {}
        for name, seq in STRATEGIES.items():
            exact = rep.strategies[name]["A"][T - 1]
            mc[name] = [
                {"s0": s, "T": T, "sampled": monte_carlo_average(model, seq, T, args.mc, rng, s),
                 "exact": float(exact[s])}
                for s in range(model.M)
            ]
        report["monte_carlo"] = {"paths": args.mc, "seed": args.seed, "results": mc}
    code = EXIT_OK if rep.ok else EXIT_ANALYSIS
    return report, {"averages.csv": rep.averages_csv()}, code


def cmd_validate(args):
    data = _need_input(args)
    kind = input_kind(data)
    info = {"kind": kind}
    if kind == "walk":
        spec = RandomWalkSpec.from_dict(data)
        info.update(M=spec.M, actions=list(spec.names), exact=spec.exact)
    elif kind == "chain":
        Q = np.asarray(data["Q"], dtype=np.float64)
        analyze_matrix(Q, data.get("R"), args.lin_tol)
        info.update(M=int(Q.shape[0]))
    elif kind == "explicit":
        model = load_explicit(data)
        info.update(M=model.M, decisions=model.size)
    else:
        model, mdp, _ = load_model(data, args.decision_cap)
        info.update(M=mdp.M, N=mdp.N, decisions=model.size, model_kind=model.kind)
    if "epsilon" in data or "h" in data:
        counterexample_spec(data.get("epsilon", 0.5), data.get("h", 2.25))
    info["valid"] = True
    return info, {}, EXIT_OK


COMMANDS = {
    "analyze-chain": (cmd_analyze_chain, "limiting matrix, deviation matrix, gain and bias"),
    "optimality": (cmd_optimality, "average-optimal set, Blackwell candidates, optimality equation"),
    "turnpike-discounted": (cmd_turnpike_discounted, "certified and empirical turnpike integers for beta < 1"),
    "turnpike-undiscounted": (cmd_turnpike_undiscounted, "span history and turnpike verdict for beta = 1"),
    "walk": (cmd_walk, "level recursion and conjecture check for a random-walk spec"),
    "counterexample-5-3": (cmd_counterexample, "level-by-level check of the two-action counterexample"),
    "parrondo": (cmd_parrondo, "averages of the alternating strategies"),
    "validate": (cmd_validate, "schema and invariant check without analysis"),
}


def _beta(text):
    b = float(text)
    if not 0.0 < b < 1.0:
        raise argparse.ArgumentTypeError(f"beta must lie in (0, 1), got {text}")
    return b


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _nonneg_int(text):
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return n


def _positive_float(text):
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return x


def _rational(text):
    try:
        return to_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from exc


class _Parser(argparse.ArgumentParser):
    # bad flags are input errors: exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--input", help="JSON model, chain or walk spec")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--beta", type=_beta, help="discount factor in (0, 1)")
    common.add_argument("--tol", type=_positive_float, default=TAU_TIE, help="tie band for maximizer sets")
    common.add_argument("--lin-tol", type=_positive_float, default=1e-10, help="tolerance for linear identities")
    common.add_argument("--kmax", type=_positive_int, default=200, help="value-iteration steps")
    common.add_argument("--imax", type=_nonneg_int, help="last walk level (default 50 M)")
    common.add_argument("--jmax", type=_positive_int, default=4, help="largest product length for gamma_J")
    common.add_argument("--decision-cap", type=_positive_int, default=DECISION_CAP)
    common.add_argument("--product-cap", type=_positive_int, default=PRODUCT_CAP)
    common.add_argument("--seed", type=int, default=0, help="seed for Monte-Carlo cross-checks")
    common.add_argument("--format", choices=("json", "csv", "both"), default="json")
    common.add_argument("--epsilon", type=_rational, default=to_fraction("0.5"))
    common.add_argument("--h", type=_rational, default=to_fraction("2.25"))
    common.add_argument("--j-max", type=_positive_int, default=200)
    common.add_argument("--t-max", type=_positive_int, default=10_000)
    common.add_argument("--mc", type=_nonneg_int, default=0, help="Monte-Carlo paths for parrondo (0 = off)")
    common.add_argument("--float", action="store_true", help="floating-point walk levels instead of exact")

    parser = _Parser(prog="mdpturnpike", description="Turnpike analysis for finite MDPs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def resolved_config(args):
    cfg = {k: v for k, v in vars(args).items() if k != "out"}
    for key in ("epsilon", "h"):
        cfg[key] = float(cfg[key])
    return cfg


def run(args):
    """Execute one parsed command; returns the exit code."""
    func, _ = COMMANDS[args.command]
    try:
        report, tables, code = func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AnalysisError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    if args.command == "validate":
        sys.stdout.write(dumps(report))
        return code
    out = Path(args.out)
    stem = args.command.replace("-", "_")
    written = []
    if args.format in ("json", "both"):
        full = {"command": args.command, "config": resolved_config(args), "report": report}
        written.append(write_text(out / f"{stem}.json", dumps(full)))
    if args.format in ("csv", "both"):
        for name, text in tables.items():
            written.append(write_text(out / f"{stem}_{name}", text))
    for path in written:
        print(path)
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
