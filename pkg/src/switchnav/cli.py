"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 assumption violated,
3 tick budget exhausted before the last task was accomplished.
"""

import argparse
import logging
import sys

from . import certify
from .episode import CKF, PROPOSED, REFERENCE_INPUT, monte_carlo, run_episode
from .errors import AssumptionViolated, NoFiniteBound, SwitchnavError
from .export import export_metrics_csv, export_trace_csv
from .scenario import load_scenario

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ASSUMPTION = 2
EXIT_MAX_TICKS = 3


def _rounds(value):
    return value if value == "certified" else int(value)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True,
                        help="scenario JSON file, or a built-in name: default, demo")
    common.add_argument("--dwell-mode", choices=("cumulative", "consecutive"))
    common.add_argument("--bound-form", choices=("paper", "proof"))
    common.add_argument("--feasibility-form", choices=("paper", "corrected"))
    common.add_argument("--rounds", type=_rounds, help="consensus rounds for every task (int or 'certified')")
    common.add_argument("--max-ticks", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="switchnav", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="run one episode")
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--trace", help="write the per-tick trace CSV here")
    sp.add_argument("--no-figures", action="store_true")

    mp = sub.add_parser("montecarlo", parents=[common], help="run a seeded batch and write metrics")
    mp.add_argument("--runs", type=int, default=100)
    mp.add_argument("--out", required=True, help="metrics CSV path")
    mp.add_argument("--baseline", choices=(CKF, REFERENCE_INPUT))
    mp.add_argument("--seed-base", type=int, default=1)
    mp.add_argument("--workers", type=int, default=1)
    mp.add_argument("--ticks", type=int, help="tick budget per run")
    mp.add_argument("--no-switching", action="store_true", help="track task 1 only")
    mp.add_argument("--no-figures", action="store_true")

    sub.add_parser("certify", parents=[common], help="print per-task certificates")

    rp = sub.add_parser("runtime-bound", parents=[common], help="running-time bound of one task")
    rp.add_argument("--task", type=int, required=True)
    rp.add_argument("--seed", type=int, default=1,
                    help="episode used to reach the task's start when K > 1")
    return ap


def _load(args):
    return load_scenario(args.scenario, dwell_mode=args.dwell_mode, bound_form=args.bound_form,
                         feasibility_form=args.feasibility_form, rounds=args.rounds,
                         max_ticks=args.max_ticks)


def _fmt_bounds(bounds):
    return ", ".join(f"task {k}: {'none' if v is None else v}" for k, v in sorted(bounds.items()))


def cmd_simulate(args, sc):
    tr = run_episode(sc, args.seed)
    print(f"ticks: {tr.ticks}")
    print(f"switch times: {dict(sorted(tr.switch_times.items()))}")
    print(f"runtime bounds: {_fmt_bounds(tr.runtime_bounds)}")
    print(f"final tracking deviation: {tr.tracking_error()[-1]:.6g}")
    if args.trace:
        export_trace_csv(tr, args.trace)
        if not args.no_figures:
            from .plotting import plot_trace
            for p in plot_trace(tr, sc, args.trace):
                print(f"wrote {p}")
    if tr.max_ticks_exceeded:
        print(f"tick budget exhausted in task {tr.task[-1]}", file=sys.stderr)
        return EXIT_MAX_TICKS
    return EXIT_OK


def cmd_montecarlo(args, sc):
    method = args.baseline or PROPOSED
    switching = False if args.no_switching else None
    res = monte_carlo(sc, args.runs, seed_base=args.seed_base, method=method, ticks=args.ticks,
                      switching=switching, workers=args.workers)
    export_metrics_csv(res, args.out)
    done = sum(tr.completed for tr in res.traces)
    print(f"runs: {args.runs}  method: {method}  completed: {done}")
    print(f"final mean tracking deviation: {res.epsilon[-1]:.6g}")
    if not args.no_figures:
        from .plotting import plot_metrics
        for p in plot_metrics(res, args.out, title=f"{sc.name} ({method})"):
            print(f"wrote {p}")
    if any(tr.max_ticks_exceeded for tr in res.traces):
        return EXIT_MAX_TICKS
    return EXIT_OK


def cmd_certify(args, sc):
    tr = sc.track_cert
    print(f"scenario: {sc.name}")
    print(f"|BK| = {sc.BK_norm:.6g}  q_w = {sc.model.q_w:.6g}  q_v = {sc.model.q_v:.6g}  "
          f"q_x = {sc.model.q_x:.6g}  q_r = {sc.model.q_r:.6g}")
    print(f"tracking: lam(P) in [{tr.lam_min:.6g}, {tr.lam_max:.6g}]  decay {tr.lam:.9g}  beta {tr.beta:.6g}")
    for task, cert in zip(sc.tasks, sc.task_certs):
        ok, margin = certify.task_feasible(task.R, task.D, tr, cert, sc.BK_norm, sc.model.q_w,
                                           sc.feasibility_form)
        print(f"task {task.index}: N={cert.N} alpha={task.graph.alpha:.6g} contraction={cert.lam_c:.6g} "
              f"rounds={cert.rounds} min_rounds={cert.min_L} rounds_ok={cert.rounds_ok}")
        print(f"  lam(P) in [{cert.lam_min:.6g}, {cert.lam_max:.6g}]  varpi={cert.varpi:.9g}  "
              f"gamma={cert.gamma:.6g} rho={cert.rho:.6g} tau={cert.tau:.6g}  q={cert.q:.6g}")
        print(f"  feasible={ok} margin={margin:.6g}")
    try:
        dt = certify.task_runtime_bound(sc.new_tracker(), sc.tasks[0], sc.max_ticks)
    except NoFiniteBound:
        dt = None
    # later tasks depend on the switch time, see the runtime-bound command
    print(f"task 1 running-time bound: {'none within ' + str(sc.max_ticks) + ' ticks' if dt is None else dt}")
    return EXIT_OK


def cmd_runtime_bound(args, sc):
    k = args.task
    if not 1 <= k <= len(sc.tasks):
        print(f"task must be in 1..{len(sc.tasks)}", file=sys.stderr)
        return EXIT_INPUT
    if k == 1:
        try:
            dt = certify.task_runtime_bound(sc.new_tracker(), sc.tasks[0], sc.max_ticks)
        except NoFiniteBound:
            dt = None
    else:
        tr = run_episode(sc, args.seed)
        if k not in tr.runtime_bounds:
            print(f"task {k} was never started within {sc.max_ticks} ticks", file=sys.stderr)
            return EXIT_MAX_TICKS
        dt = tr.runtime_bounds[k]
    if dt is None:
        print(f"task {k}: no finite running-time bound within {sc.max_ticks} ticks")
        return EXIT_MAX_TICKS
    print(f"task {k}: {dt}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "certify": cmd_certify,
    "runtime-bound": cmd_runtime_bound,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = _load(args)
        return COMMANDS[args.command](args, sc)
    except AssumptionViolated as exc:
        print(f"assumption violated: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (SwitchnavError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
