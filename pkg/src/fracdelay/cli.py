"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 numeric or validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .ddpg.agent import DESK_HYPER, HyperParams
from .ddpg.io import AgentFileError
from .delay_augment import build_system
from .evaluation import (
    _atomic_write,
    compare_cases,
    emit_plot,
    evaluate,
    load_report,
    read_trajectory,
    render_table,
    save_report,
    table_csv,
)
from .experiments import reproduce, train_case
from .lti_core import PlantParams
from .plant_sim import SimulatorConfig, run_open_loop

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 1, 2

PROFILES = {"full": HyperParams(), "desk": DESK_HYPER}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _matrix_csv(m: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(m):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def cmd_discretize(args, cfg) -> int:
    params = cfgmod.plant_params(cfg)
    overrides = {k: v for k, v in (("t_p", args.tp), ("t_q", args.tq), ("k_z", args.kz),
                                   ("tau_i", args.tau_i), ("tau_o", args.tau_o)) if v is not None}
    params = PlantParams(**{**params.__dict__, **overrides})
    sys_ = build_system(params, args.h)
    out = Path(args.out)
    for name in ("a_e", "b_e", "c_e"):
        _atomic_write(out / f"{name}.csv", _matrix_csv(getattr(sys_, name)))
    lines = [f"h = {sys_.h!r}", f"tau_i = {params.tau_i!r}", f"tau_o = {params.tau_o!r}",
             f"n = {sys_.n}", "blocks:"]
    lines += [f"  {d}" for d in sys_.layout.describe()]
    with np.printoptions(precision=6, suppress=True, linewidth=160):
        lines += ["a_e:", str(sys_.a_e), "b_e:", str(sys_.b_e.T), "c_e:", str(sys_.c_e)]
    text = "\n".join(lines) + "\n"
    _atomic_write(out / "layout.txt", text)
    print(text, end="")
    return EXIT_OK


def _read_schedule(path) -> list[tuple[float, float]]:
    sched = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                value, duration = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: expected 'value,duration'") from None
            sched.append((value, duration))
    return sched


def cmd_simulate(args, cfg) -> int:
    params = cfgmod.plant_params(cfg)
    sim_cfg = SimulatorConfig(
        params=params,
        base_step=cfgmod.get_float(cfg, "base_step", 0.0005),
        episode_length=cfgmod.get_float(cfg, "episode_length", 12.6),
    )
    traj = run_open_loop(sim_cfg, _read_schedule(args.schedule))
    data = traj.state if args.true_state else traj.measured
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "z", "z_dot", "z_ddot", "u"])
    for t, y, u in zip(traj.time, data, traj.applied):
        w.writerow([repr(float(t)), *(repr(float(v)) for v in y), repr(float(u))])
    _atomic_write(args.out, buf.getvalue())
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    hyper = cfgmod.hyper_params(cfg, PROFILES[args.profile])
    def progress(e):
        logging.info("episode %d return %.1f", e.episode, e.episode_return)
    _, history = train_case(args.case, args.seed, hyper, args.episodes, args.out_agent,
                            args.log, callback=progress)
    if history:
        print(f"trained {len(history)} episodes, final return {history[-1].episode_return:.1f}")
    return EXIT_OK


def cmd_evaluate(args, cfg) -> int:
    report = evaluate(args.agent, args.case, args.plant, args.seed, out_traj=args.out_traj)
    save_report(report, args.out_report)
    if args.plot:
        emit_plot(read_trajectory(args.out_traj), args.plot,
                  title=f"{report.case} on {report.eval_plant} plant")
    for k, v in report.metrics.items():
        print(f"{k:>24}: {v}")
    return EXIT_OK


def cmd_compare(args, cfg) -> int:
    reports = [load_report(p) for p in args.reports]
    header, rows = compare_cases(reports)
    _atomic_write(args.out, table_csv(header, rows))
    print(render_table(header, rows), end="")
    return EXIT_OK


def cmd_plot(args, cfg) -> int:
    emit_plot(read_trajectory(args.trajectory), args.out)
    return EXIT_OK


def cmd_reproduce(args, cfg) -> int:
    hyper = cfgmod.hyper_params(cfg, PROFILES[args.profile])
    reports = reproduce(args.out, seeds=args.seeds, hyper=hyper, episodes=args.episodes,
                        cases=args.cases, retrain=args.retrain)
    header, rows = compare_cases(reports)
    _atomic_write(Path(args.out) / "comparison.csv", table_csv(header, rows))
    print(render_table(header, rows), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fracdelay", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("discretize", help="dump the exact discrete augmented model")
    d.add_argument("--tp", type=float)
    d.add_argument("--tq", type=float)
    d.add_argument("--kz", type=float)
    d.add_argument("--tau-i", type=float)
    d.add_argument("--tau-o", type=float)
    d.add_argument("--h", type=float, required=True)
    d.add_argument("--out", required=True, help="output directory")
    d.set_defaults(func=cmd_discretize)

    s = sub.add_parser("simulate", help="open-loop base-step simulation")
    s.add_argument("--config", dest="sub_config")
    s.add_argument("--schedule", required=True, help="CSV of value,duration rows")
    s.add_argument("--out", required=True)
    s.add_argument("--true-state", action="store_true",
                   help="write the undelayed plant state instead of the measurement")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="train a DDPG agent for one case")
    t.add_argument("--case", required=True, choices=["i", "ii", "iii", "iv"])
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--episodes", type=int)
    t.add_argument("--out-agent", required=True)
    t.add_argument("--log")
    t.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="noiseless step-following episode")
    e.add_argument("--agent", required=True)
    e.add_argument("--case", required=True, choices=["i", "ii", "iii", "iv"])
    e.add_argument("--plant", required=True, choices=["delayed", "delay-free", "training"])
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out-report", required=True)
    e.add_argument("--out-traj", required=True)
    e.add_argument("--plot")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="tabulate evaluation reports")
    c.add_argument("--reports", nargs="+", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)

    pl = sub.add_parser("plot", help="SVG of a trajectory CSV")
    pl.add_argument("--trajectory", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)

    r = sub.add_parser("reproduce", help="train and evaluate every case over several seeds")
    r.add_argument("--out", required=True, help="run directory")
    r.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    r.add_argument("--cases", nargs="+", default=["i", "ii", "iii", "iv"])
    r.add_argument("--episodes", type=int)
    r.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    r.add_argument("--retrain", action="store_true")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load_config(getattr(args, "sub_config", None) or args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (cfgmod.ConfigError, AgentFileError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
