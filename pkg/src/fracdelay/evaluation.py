"""Step-response metrics, noiseless evaluation runs, comparison tables and plots."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ddpg.agent import AgentBundle, select_action
from .ddpg.io import load_agent
from .lti_core import NOMINAL_U_MAX
from .rl_env import CaseId, EnvConfig, make_env, plant_for

TRAJECTORY_COLUMNS = ("time", "z", "z_dot", "z_ddot", "u", "reward")
SETTLE_WINDOW = 4.0
MIN_DURATION = 8.0
SATURATION_FRACTION = 0.99


class MetricsError(ValueError):
    pass


@dataclass
class Trajectory:
    """Closed-loop trajectory sampled at the agent period.

    Row ``k`` holds the true plant state at ``t_k``, the saturated command that
    was held over the interval ending at ``t_k`` and the reward received for it.
    Row 0 is the initial condition with zero command and reward.
    """

    time: np.ndarray
    z: np.ndarray
    z_dot: np.ndarray
    z_ddot: np.ndarray
    u: np.ndarray
    reward: np.ndarray

    def __len__(self) -> int:
        return len(self.time)

    def columns(self):
        return [getattr(self, c) for c in TRAJECTORY_COLUMNS]

    @classmethod
    def from_rows(cls, rows) -> "Trajectory":
        arr = np.asarray(rows, dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))
        return cls(*(arr[:, i].copy() for i in range(len(TRAJECTORY_COLUMNS))))

    def shifted(self, dt: float) -> "Trajectory":
        return Trajectory(self.time + dt, self.z, self.z_dot, self.z_ddot, self.u, self.reward)


@dataclass
class StepMetrics:
    rise_time: float
    rise_reached: bool
    overshoot: float
    settle_rms_pos: float
    settle_rms_vel: float
    settle_amplitude: float
    action_sign_change_rate: float
    saturation_duty: float
    dominant_period: float

    def as_dict(self) -> dict:
        return asdict(self)


def _first_crossing(t: np.ndarray, y: np.ndarray, level: float, rising: bool) -> float:
    """Linearly interpolated time ``y`` first reaches ``level``; ``inf`` if never."""
    hit = y >= level if rising else y <= level
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return math.inf
    k = int(idx[0])
    if k == 0:
        return float(t[0])
    y0, y1 = y[k - 1], y[k]
    frac = (level - y0) / (y1 - y0) if y1 != y0 else 1.0
    return float(t[k - 1] + frac * (t[k] - t[k - 1]))


def _crossing_times(t: np.ndarray, e: np.ndarray) -> np.ndarray:
    s = np.sign(e)
    out = []
    for k in np.flatnonzero(s[:-1] * s[1:] < 0):
        frac = e[k] / (e[k] - e[k + 1])
        out.append(t[k] + frac * (t[k + 1] - t[k]))
    return np.array(out)


def compute_metrics(traj: Trajectory, z_ref: float = 1.0, u_max: float = NOMINAL_U_MAX,
                    settle_window: float = SETTLE_WINDOW,
                    min_duration: float = MIN_DURATION) -> StepMetrics:
    """Quantify a step response.

    Rise time runs from 10% to 90% of the way from the initial altitude to
    ``z_ref``. Settling statistics, saturation duty, action sign changes and
    the oscillation period all use the final ``settle_window`` seconds.
    The dominant period is the mean spacing of crossings of ``z_ref`` in that
    window (half an oscillation cycle); it is ``inf`` with fewer than two
    crossings.
    """
    t = np.asarray(traj.time, dtype=float)
    if t.size < 3:
        raise MetricsError("trajectory has fewer than three samples")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * max(dt.mean(), 1e-12):
        raise MetricsError("trajectory must be uniformly sampled in increasing time")
    duration = t[-1] - t[0]
    if duration < min_duration - 1e-9:
        raise MetricsError(f"trajectory covers {duration:.3f} s, need at least {min_duration} s")

    z, z_dot, u = traj.z, traj.z_dot, traj.u
    z0 = z[0]
    span = z_ref - z0
    rising = span >= 0
    t10 = _first_crossing(t, z, z0 + 0.1 * span, rising)
    t90 = _first_crossing(t, z, z0 + 0.9 * span, rising)
    reached = math.isfinite(t90)
    rise = t90 - t10 if reached else math.inf
    if span != 0:
        peak = (z.max() - z_ref) if rising else (z_ref - z.min())
        overshoot = max(0.0, peak / abs(span))
    else:
        overshoot = 0.0

    # tolerance keeps the window edge stable against rounding of shifted time stamps
    in_window = t >= t[-1] - settle_window - 1e-9 * max(1.0, abs(t[-1]))
    tw, ew = t[in_window], z[in_window] - z_ref
    vw, uw = z_dot[in_window], u[in_window]
    rms_pos = float(np.sqrt(np.mean(ew ** 2)))
    rms_vel = float(np.sqrt(np.mean(vw ** 2)))
    amplitude = float(0.5 * np.ptp(z[in_window]))

    window_span = tw[-1] - tw[0]
    changes = int(np.count_nonzero(uw[:-1] * uw[1:] < 0))
    sign_rate = changes / window_span if window_span > 0 else 0.0
    duty = float(np.mean(np.abs(uw) >= SATURATION_FRACTION * u_max))

    crossings = _crossing_times(tw, ew)
    period = float(np.mean(np.diff(crossings))) if crossings.size >= 2 else math.inf

    return StepMetrics(
        rise_time=float(rise),
        rise_reached=bool(reached),
        overshoot=float(overshoot),
        settle_rms_pos=rms_pos,
        settle_rms_vel=rms_vel,
        settle_amplitude=amplitude,
        action_sign_change_rate=float(sign_rate),
        saturation_duty=duty,
        dominant_period=period,
    )


# --------------------------------------------------------------------------- files


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for row in zip(*traj.columns()):
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_trajectory(traj: Trajectory, path) -> None:
    _atomic_write(path, trajectory_csv(traj))


def read_trajectory(path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRAJECTORY_COLUMNS:
            raise MetricsError(f"{path}: expected header {','.join(TRAJECTORY_COLUMNS)}")
        rows = [[float(v) for v in r] for r in reader if r]
    if not rows:
        raise MetricsError(f"{path}: no samples")
    return Trajectory.from_rows(rows)


# --------------------------------------------------------------------------- evaluation


def rollout(agent: AgentBundle | None, env, policy_fn=None) -> Trajectory:
    """One noiseless episode; ``policy_fn(obs)`` overrides the agent when given."""
    obs = env.reset()
    x = env.sim.x
    rows = [(0.0, x[0], x[1], x[2], 0.0, 0.0)]
    done = False
    while not done:
        a = policy_fn(obs) if policy_fn is not None else select_action(agent, obs, explore=False)
        res = env.step(a)
        x = res.info["state"]
        rows.append((res.info["time"], x[0], x[1], x[2], res.info["applied"], res.reward))
        obs = res.observation
        done = res.done
    return Trajectory.from_rows(rows)


@dataclass
class CaseReport:
    case: str
    eval_plant: str
    seed: int
    metrics: dict
    trajectory_path: str | None = None
    agent_path: str | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            return v
        doc = asdict(self)
        doc["metrics"] = {k: clean(v) for k, v in self.metrics.items()}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CaseReport":
        doc = json.loads(text)
        metrics = {}
        for k, v in doc.get("metrics", {}).items():
            metrics[k] = float(v) if isinstance(v, str) else v
        doc["metrics"] = metrics
        return cls(**doc)


def save_report(report: CaseReport, path) -> None:
    _atomic_write(path, report.to_json())


def load_report(path) -> CaseReport:
    return CaseReport.from_json(Path(path).read_text())


def evaluation_env(case, eval_plant: str, seed: int = 0, **env_kw):
    case = CaseId.parse(case)
    return make_env(EnvConfig(case=case, params=plant_for(case, eval_plant), seed=seed, **env_kw))


def evaluate_agent(agent: AgentBundle, case, eval_plant: str, seed: int = 0,
                   out_traj=None, **env_kw) -> tuple[CaseReport, Trajectory]:
    case = CaseId.parse(case)
    eval_plant = eval_plant.replace("-", "_")
    env = evaluation_env(case, eval_plant, seed, **env_kw)
    if env.obs_width != agent.obs_width:
        raise ValueError(f"agent width {agent.obs_width} != {case.value} observation width "
                         f"{env.obs_width}")
    traj = rollout(agent, env)
    metrics = compute_metrics(traj, z_ref=env.config.z_ref, u_max=env.u_max)
    if out_traj is not None:
        write_trajectory(traj, out_traj)
    report = CaseReport(
        case=case.value,
        eval_plant=eval_plant,
        seed=seed,
        metrics=metrics.as_dict(),
        trajectory_path=str(out_traj) if out_traj is not None else None,
    )
    return report, traj


def evaluate(agent_path, case, eval_plant: str, seed: int = 0, out_traj=None,
             **env_kw) -> CaseReport:
    case = CaseId.parse(case)
    agent = load_agent(agent_path, expected_obs_width=case.obs_width)
    report, _ = evaluate_agent(agent, case, eval_plant, seed, out_traj, **env_kw)
    report.agent_path = str(agent_path)
    return report


# --------------------------------------------------------------------------- comparison


def compare_cases(reports: list[CaseReport]) -> tuple[list[str], list[list]]:
    """Aligned table of the metrics shared by every report.

    Adds ``rise_time_ratio`` relative to the mean case_i rise time when a
    case_i report is present.
    """
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    shared = set(reports[0].metrics)
    for r in reports[1:]:
        shared &= set(r.metrics)
    order = [k for k in reports[0].metrics if k in shared]
    if not order:
        raise ValueError("reports share no metrics")
    base = [r.metrics["rise_time"] for r in reports
            if r.case == CaseId.CASE_I.value and "rise_time" in r.metrics]
    ref = float(np.mean(base)) if base else math.nan
    header = ["case", "eval_plant", "seed", *order]
    if "rise_time" in shared:
        header.append("rise_time_ratio")
    rows = []
    for r in reports:
        row = [r.case, r.eval_plant, r.seed, *(r.metrics[k] for k in order)]
        if "rise_time" in shared:
            row.append(r.metrics["rise_time"] / ref if ref and math.isfinite(ref) else math.nan)
        rows.append(row)
    return header, rows


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def render_table(header, rows) -> str:
    cells = [list(map(str, header))] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------- plotting


def emit_plot(traj: Trajectory, output_path, title: str | None = None,
              z_ref: float = 1.0) -> None:
    """SVG with position, velocity, acceleration and command traces; byte-stable."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "fracdelay", "svg.fonttype": "path"}):
        fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 7))
        axes[0].plot(traj.time, traj.z, label="z")
        axes[0].axhline(z_ref, color="k", lw=0.6, ls="--", label="z_ref")
        axes[0].set_ylabel("position [m]")
        axes[1].plot(traj.time, traj.z_dot, label="z_dot")
        axes[1].plot(traj.time, traj.z_ddot, lw=0.6, label="z_ddot")
        axes[1].set_ylabel("vel / acc")
        axes[2].step(traj.time, traj.u, where="pre", lw=0.6)
        axes[2].set_ylabel("command")
        axes[2].set_xlabel("time [s]")
        for ax in axes:
            ax.set_xlim(traj.time[0], traj.time[-1])
            ax.grid(True, lw=0.3)
        axes[0].legend(loc="lower right")
        axes[1].legend(loc="upper right")
        if title:
            axes[0].set_title(title)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    _atomic_write(output_path, buf.getvalue())
