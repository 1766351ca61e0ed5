"""Command-line entry points.

    afdsim run <scenario> [--seed N] [--out DIR] [--dot] [--no-figures]
    afdsim check-trace <trace> --problem {consensus,omega,omega_f} --f N --n N [--prefix]
    afdsim analyze-obs <obs-file> --system <scenario> [--out DIR] [--dot]

Exit codes: 0 all verdicts hold or are undetermined, 1 a verdict is
violated, 2 capacity or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .afd import AfdTrace, check_T_omega_f, is_valid_sequence, parse_trace
from .consensus import check_consensus_trace, ct_algorithm, env_automaton_parts
from .errors import AfdsimError, CapacityError, ConfigError, TraceFormatError
from .gadgets import TreeAnalysis, rank_and_first
from .observation import parse_observation, validate
from .report import run_scenario
from .scenario import load_scenario
from .system import Locations, build_system
from .tree import TreeContext

OK_STATUSES = ("holds", "undetermined")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afdsim",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write its report")
    p_run.add_argument("scenario", type=Path)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", type=Path, default=None)
    p_run.add_argument("--dot", action="store_true",
                       help="also export DOT renderings")
    p_run.add_argument("--no-figures", action="store_true",
                       help="skip matplotlib figure rendering")

    p_chk = sub.add_parser("check-trace", help="check a serialized trace")
    p_chk.add_argument("trace", type=Path)
    p_chk.add_argument("--problem", required=True,
                       choices=("consensus", "omega", "omega_f"))
    p_chk.add_argument("--f", type=int, default=0)
    p_chk.add_argument("--n", type=int, required=True)
    p_chk.add_argument("--prefix", action="store_true",
                       help="treat the trace as a prefix, not a complete run")

    p_obs = sub.add_parser("analyze-obs",
                           help="validate an observation and analyze its tree")
    p_obs.add_argument("observation", type=Path)
    p_obs.add_argument("--system", required=True, type=Path,
                       help="scenario file fixing the reference system")
    p_obs.add_argument("--out", type=Path, default=None)
    p_obs.add_argument("--dot", action="store_true")
    return parser


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    report = run_scenario(scenario, out_dir=args.out,
                          render_figures=not args.no_figures,
                          export_dot=args.dot)
    sys.stdout.write(report.text())
    return report.exit_code


def _cmd_check_trace(args) -> int:
    events = parse_trace(args.trace.read_text())
    locs = Locations(args.n, args.f)
    complete = not args.prefix
    if args.problem == "consensus":
        verdict = check_consensus_trace(events, args.f, locs, complete=complete)
        for name, v in verdict.lines():
            print(f"verdict\t{name}\t{v}")
        bad = any(v.status not in OK_STATUSES for _, v in verdict.lines())
        return 1 if bad else 0
    trace = AfdTrace(events, complete=complete)
    if args.problem == "omega":
        f_bound = args.n  # plain leader election constrains every trace
    else:
        f_bound = args.f
    validity = is_valid_sequence(trace, locs)
    print(f"verdict\tvalidity\t{validity}")
    verdict = check_T_omega_f(trace, f_bound, locs)
    print(f"verdict\tmembership\t{verdict}")
    return 1 if (validity.is_violated or verdict.is_violated) else 0


def _cmd_analyze_obs(args) -> int:
    g, n = parse_observation(args.observation.read_text())
    scenario = load_scenario(args.system)
    if scenario.n != n:
        raise ConfigError(
            f"observation declares n={n}, scenario has n={scenario.n}")
    locs = scenario.locations
    bad = validate(g)
    if bad is not None:
        print(f"verdict\tobservation\t{bad}")
        return 1
    print("verdict\tobservation\tok")
    if len(g) > scenario.analysis_bound:
        raise CapacityError(
            f"|V|={len(g)} exceeds analysis bound {scenario.analysis_bound}")
    reference = build_system(ct_algorithm(locs), env_automaton_parts(locs),
                             locs, with_crash=False, name=("reference",))
    ctx = TreeContext(reference, g, locs)
    analysis = TreeAnalysis(ctx)
    table, gadgets, first = rank_and_first(analysis)
    print(f"root-valence\t{analysis.classify_valence(ctx.root())}")
    print(f"ranked-nodes\t{len(table)}")
    for rg in gadgets:
        print(rg.report_line())
    if first is not None:
        print(f"first-gadget\tmetric={first.metric}\tcritical={first.gadget.critical}")
    if args.out is not None and args.dot:
        from .dot import observation_dot, tree_slice_dot
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "observation.dot").write_text(observation_dot(g))
        (args.out / "tree-slice.dot").write_text(tree_slice_dot(ctx, depth_limit=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check-trace":
            return _cmd_check_trace(args)
        return _cmd_analyze_obs(args)
    except (CapacityError, ConfigError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AfdsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
