"""Command-line front end.

Commands::

    wdsmpc gen-scenario default-2tank --out scen/
    wdsmpc validate --scenario scen/scenario.json
    wdsmpc simulate --scenario scen/scenario.json --mode idib --T 72 --out run/
    wdsmpc compare  --scenario scen/scenario.json --T 72 --out cmp/

Exit codes: 0 when every step converged, 2 when some steps were flagged
(solver stopped without meeting its tolerance), 1 on any error.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .blocking import ScheduleError, schedule_from_lengths
from .scenario import TEMPLATES, ScenarioError, load_scenario, make_template, write_scenario
from .simulation import SimulationError, compare, run_closed_loop
from .sqp import SolverOptions

log = logging.getLogger("wdsmpc")

EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2


class CliError(Exception):
    pass


def _lengths(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wdsmpc", description="Economic MPC of water networks with move blocking.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every solver step")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--lengths", type=_lengths, help="block lengths, e.g. 1,2,3,4,5,9")
        p.add_argument("--Np", type=int, help="prediction horizon in steps")
        p.add_argument("--dt", type=float, help="sample time in hours")
        p.add_argument("--T", type=int, default=72, help="closed-loop duration in steps")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--kkt-tol", type=float, default=SolverOptions.kkt_tol)
        p.add_argument("--max-iter", type=int, default=SolverOptions.max_iter)

    p = sub.add_parser("simulate", help="run one closed loop and write log.csv")
    run_flags(p)
    p.add_argument("--mode", choices=("full", "idib"), default="idib")

    p = sub.add_parser("compare", help="run the full and blocked controllers and compare them")
    run_flags(p)
    p.add_argument("--mode", choices=("full", "idib"), default="idib",
                   help="controller compared against the full one (full gives a self-comparison)")

    p = sub.add_parser("gen-scenario", help="write a scenario template")
    p.add_argument("template", help=f"one of: {', '.join(TEMPLATES)}")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--name", default="scenario", help="file stem of the scenario JSON")

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenario", required=True)
    return parser


def effective_scenario(args):
    """Load the scenario and apply the command-line overrides."""
    scenario = load_scenario(args.scenario)
    changes = {}
    if args.Np is not None:
        changes["Np"] = args.Np
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.lengths is not None:
        changes["lengths"] = args.lengths
    elif args.Np is not None and sum(scenario.lengths) != args.Np:
        changes["lengths"] = (1,) * args.Np
        log.warning("scenario block lengths do not fit Np=%d; pass --lengths", args.Np)
    scenario = dataclasses.replace(scenario, **changes)
    if scenario.Np < 1:
        raise CliError(f"Np must be >= 1 (got {scenario.Np})")
    if args.T < 1:
        raise CliError(f"T must be >= 1 (got {args.T})")
    if args.mode == "idib" or args.command == "compare":
        schedule_from_lengths(scenario.lengths, scenario.Np)
    problems = scenario.violations()
    if problems:
        raise CliError("invalid scenario:\n  " + "\n  ".join(problems))
    return scenario


def _options(args):
    try:
        return SolverOptions(kkt_tol=args.kkt_tol, max_iter=args.max_iter)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _echo_config(scenario, args, out):
    cfg = dict(scenario.config)
    cfg["dt"] = scenario.dt
    cfg["controller"] = {"Np": scenario.Np, "lengths": list(scenario.lengths)}
    run = {"command": args.command, "mode": args.mode, "T": args.T,
           "kkt_tol": args.kkt_tol, "max_iter": args.max_iter,
           "scenario_path": str(args.scenario), "scenario_hash": scenario.fingerprint()}
    (out / "config.json").write_text(json.dumps({"scenario": cfg, "run": run}, indent=2) + "\n")


def _run(scenario, mode, args):
    lengths = None if mode == "full" else scenario.lengths
    progress = None
    if args.verbose:
        def progress(k, res):
            log.info("%s step %d: %s in %d iterations, %.2f ms", mode, k, res.status,
                     res.iterations, res.wall_time * 1e3)
    return run_closed_loop(scenario, lengths, args.T, _options(args), progress=progress)


def _log_summary(lg, scenario):
    flagged = lg.flagged_steps
    lines = [
        f"mode            : {lg.mode}",
        f"block lengths   : {','.join(map(str, lg.lengths))}",
        f"Np / dt / T     : {scenario.Np} / {scenario.dt} / {lg.T}",
        f"scenario hash   : {lg.scenario_hash}",
        f"economic cost   : {lg.cost_econ.sum():.6f}",
        f"safety cost     : {lg.cost_safe.sum():.6f}",
        f"smoothness cost : {lg.cost_smooth.sum():.6f}",
        f"max slack       : {lg.xi.max(initial=0.0):.3e}",
        f"max node resid. : {lg.node_residual.max(initial=0.0):.3e}",
        f"mean solve time : {lg.solve_time.mean() * 1e3:.3f} ms",
        f"mean iterations : {lg.iterations.mean():.2f}",
        f"flagged steps   : {len(flagged)} {flagged if flagged else ''}".rstrip(),
    ]
    return "\n".join(lines) + "\n"


def cmd_simulate(args):
    scenario = effective_scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(scenario, args, out)
    lg = _run(scenario, args.mode, args)
    lg.write_csv(out / "log.csv")
    text = _log_summary(lg, scenario)
    (out / "summary.txt").write_text(text)
    print(text, end="")
    return EXIT_FLAGGED if lg.flagged_steps else EXIT_OK


def cmd_compare(args):
    scenario = effective_scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(scenario, args, out)
    full = _run(scenario, "full", args)
    test = _run(scenario, args.mode, args)
    full.write_csv(out / "log_full.csv")
    test.write_csv(out / f"log_{args.mode}{'_repeat' if args.mode == 'full' else ''}.csv")
    report = compare(full, test)
    report.write_csv(out / "comparison.csv")
    with open(out / "solve_times.csv", "w") as fh:
        fh.write("k,solve_time_full,solve_time_test\n")
        for k, (a, b) in enumerate(zip(report.time_full, report.time_blocked)):
            fh.write(f"{k},{float(a)!r},{float(b)!r}\n")
    text = report.summary()
    (out / "comparison.txt").write_text(text)
    print(text, end="")
    return EXIT_FLAGGED if (full.flagged_steps or test.flagged_steps) else EXIT_OK


def cmd_gen_scenario(args):
    if args.template not in TEMPLATES:
        raise CliError(f"unknown template {args.template!r}; available: {', '.join(TEMPLATES)}")
    path = write_scenario(make_template(args.template), Path(args.out) / f"{args.name}.json")
    print(path)
    return EXIT_OK


def cmd_validate(args):
    scenario = load_scenario(args.scenario)
    problems = scenario.violations()
    if scenario.n_steps < scenario.Np:
        problems.append(f"series: {scenario.n_steps} steps are shorter than Np={scenario.Np}")
    for msg in problems:
        print(msg)
    if problems:
        return EXIT_ERROR
    print(f"{args.scenario}: ok")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "compare": cmd_compare,
            "gen-scenario": cmd_gen_scenario, "validate": cmd_validate}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SimulationError as exc:
        print(f"error: solver aborted at {exc}", file=sys.stderr)
    except (CliError, ScenarioError, ScheduleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
