"""Train one agent per (case, seed) and evaluate it on the plants shown in the study.

Agents, training logs, trajectories and reports are cached under a run
directory so that an interrupted reproduction resumes where it stopped.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path

from .ddpg.agent import DESK_HYPER, EpisodeLog, HyperParams, init_agent, train
from .ddpg.io import load_agent, save_agent
from .evaluation import CaseReport, _atomic_write, evaluate_agent, load_report, save_report
from .rl_env import CaseId, make_case_env

log = logging.getLogger(__name__)

SEEDS = (0, 1, 2)

# (case trained, plant evaluated on) pairs needed by the comparison
EVALUATIONS = (
    (CaseId.CASE_I, "delay_free"),
    (CaseId.CASE_I, "delayed"),
    (CaseId.CASE_II, "delayed"),
    (CaseId.CASE_II, "delay_free"),
    (CaseId.CASE_III, "delayed"),
    (CaseId.CASE_III, "delay_free"),
    (CaseId.CASE_IV, "delayed"),
    (CaseId.CASE_IV, "delay_free"),
)


def training_log_csv(history: list[EpisodeLog]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["episode", "return", "critic_loss_mean", "actor_objective_mean", "wall_time"])
    for e in history:
        w.writerow([e.episode, repr(e.episode_return), repr(e.critic_loss_mean),
                    repr(e.actor_objective_mean), f"{e.wall_time:.3f}"])
    return buf.getvalue()


def read_training_log(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: float(v) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]


@dataclass
class RunLayout:
    root: Path

    def agent(self, case: CaseId, seed: int) -> Path:
        return self.root / "agents" / f"{case.value}_seed{seed}.json"

    def train_log(self, case: CaseId, seed: int) -> Path:
        return self.root / "logs" / f"{case.value}_seed{seed}.csv"

    def trajectory(self, case: CaseId, plant: str, seed: int) -> Path:
        return self.root / "trajectories" / f"{case.value}_{plant}_seed{seed}.csv"

    def report(self, case: CaseId, plant: str, seed: int) -> Path:
        return self.root / "reports" / f"{case.value}_{plant}_seed{seed}.json"


def train_case(case, seed: int, hyper: HyperParams = DESK_HYPER, episodes: int | None = None,
               agent_path=None, log_path=None, callback=None):
    case = CaseId.parse(case)
    env = make_case_env(case, "training", seed=seed)
    agent = init_agent(env.obs_width, hyper, seed=seed, u_max=env.u_max)
    history = train(agent, env, episodes, callback=callback)
    if agent_path is not None:
        save_agent(agent, agent_path)
    if log_path is not None:
        _atomic_write(log_path, training_log_csv(history))
    return agent, history


def ensure_agent(layout: RunLayout, case: CaseId, seed: int, hyper: HyperParams,
                 episodes: int | None, retrain: bool = False):
    path = layout.agent(case, seed)
    if path.exists() and not retrain:
        return load_agent(path, expected_obs_width=case.obs_width)
    log.info("training %s seed %d", case.value, seed)
    agent, _ = train_case(case, seed, hyper, episodes, path, layout.train_log(case, seed))
    return agent


def reproduce(root, seeds=SEEDS, hyper: HyperParams = DESK_HYPER, episodes: int | None = None,
              cases=tuple(CaseId), retrain: bool = False) -> list[CaseReport]:
    layout = RunLayout(Path(root))
    reports = []
    for case in cases:
        case = CaseId.parse(case)
        for seed in seeds:
            agent = None
            for ev_case, plant in EVALUATIONS:
                if ev_case is not case:
                    continue
                rpath = layout.report(case, plant, seed)
                if rpath.exists() and not retrain and layout.agent(case, seed).exists():
                    reports.append(load_report(rpath))
                    continue
                if agent is None:
                    agent = ensure_agent(layout, case, seed, hyper, episodes, retrain)
                tpath = layout.trajectory(case, plant, seed)
                report, _ = evaluate_agent(agent, case, plant, seed, out_traj=tpath)
                report.agent_path = str(layout.agent(case, seed))
                save_report(report, rpath)
                reports.append(report)
    return reports
