"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Criteria 1-7 are deterministic. Criteria 8-11 read the cached multi-seed
reproduction under ``results/reproduction`` (or ``$FRACDELAY_RUN_DIR``) and
train whatever is missing, which takes hours on one core.
"""

import itertools
import math
import os
from pathlib import Path

import numpy as np
import pytest

from fracdelay.ddpg import HyperParams, ReplayBuffer, init_agent, polyak_update, train, update
from fracdelay.ddpg.agent import actor_objective_and_grads, critic_loss_and_grads
from fracdelay.ddpg.networks import Actor, Critic
from fracdelay.delay_augment import build_augmented, observation_selector
from fracdelay.experiments import SEEDS, read_training_log, reproduce, RunLayout
from fracdelay.lti_core import PlantParams, build_continuous, decompose_delay, gamma, phi
from fracdelay.plant_sim import SimulatorConfig, sample_outputs
from fracdelay.rl_env import CaseId, make_case_env, reward_from_state

from oracles import gradient_mismatches
from verdicts import record

NOMINAL = PlantParams()
SYS = build_continuous(NOMINAL)
RUN_DIR = Path(os.environ.get("FRACDELAY_RUN_DIR", Path(__file__).parents[1] / "results" / "reproduction"))

# thresholds for the stochastic criteria
CHATTER_DUTY = 0.5
CHATTER_RATE = 20.0
CHATTER_AMPLITUDE = 0.05
CAUTIOUS_RMS_POS = 0.05
CAUTIOUS_RMS_VEL = 0.05
CAUTIOUS_DUTY = 0.05
RISE_SPREAD = 0.25
MAJORITY = 2


def test_criterion_01_discretization_matches_simulator():
    worst = 0.0
    for ti, to in itertools.product((0, 10, 25, 50), repeat=2):
        if (ti, to) == (0, 0):
            continue
        for h in (0.03, 0.06):
            params = NOMINAL.with_delays(ti / 1000, to / 1000)
            model = build_augmented(params, h)
            rng = np.random.default_rng(1000 * ti + to + int(h * 100))
            for _ in range(20):
                u = rng.uniform(-6.0, 6.0, 50)
                ref = sample_outputs(SimulatorConfig(params=params), u, h)
                worst = max(worst, float(np.max(np.abs(model.simulate(u) - ref))))
    assert record("1 discretization vs fine-step simulator", worst <= 1e-8, f"max err {worst:.2e}")


def test_criterion_02_phi_gamma_identities():
    rng = np.random.default_rng(2)
    ident = float(np.max(np.abs(phi(SYS, 0.0) - np.eye(3))))
    semi = split = 0.0
    for a, b in rng.uniform(1e-6, 0.5, size=(100, 2)):
        semi = max(semi, float(np.max(np.abs(phi(SYS, a + b) - phi(SYS, a) @ phi(SYS, b)))))
        rhs = phi(SYS, b) @ gamma(SYS, a) + gamma(SYS, b)
        split = max(split, float(np.max(np.abs(gamma(SYS, a + b) - rhs))))
    t = 1e-5
    lead = NOMINAL.k_z * t**3 / (6 * NOMINAL.t_p * NOMINAL.t_q)
    ratio = gamma(SYS, t)[0, 0] / lead
    ok = ident <= 1e-14 and semi <= 1e-10 and split <= 1e-10 and abs(ratio - 1) < 0.01
    assert record("2 Phi/Gamma identities", ok,
                  f"I {ident:.1e}, semigroup {semi:.1e}, split {split:.1e}, lead {ratio:.5f}")


def test_criterion_03_delay_decomposition():
    rng = np.random.default_rng(3)
    worst, in_range = 0.0, True
    for tau, h in zip(rng.uniform(1e-6, 1.0, 1000), rng.uniform(1e-4, 0.2, 1000)):
        dec = decompose_delay(tau, h)
        worst = max(worst, abs((dec.d - 1) * h + dec.tau_frac - tau))
        in_range &= 0 < dec.tau_frac <= h
    coarse = decompose_delay(0.05, 0.06)
    ok = worst <= 1e-12 and in_range and coarse.d == 1 and coarse.tau_frac == 0.05
    assert record("3 delay decomposition", ok, f"round trip {worst:.1e}, coarse d={coarse.d}")


def test_criterion_04_block_counts():
    ok = True
    for ti, to in itertools.product((10, 25, 50), repeat=2):
        for h in (0.005, 0.03, 0.06):
            m = build_augmented(NOMINAL.with_delays(ti / 1000, to / 1000), h)
            ok &= len(m.layout) == m.input_split.d + m.output_split.d + 1
    two_step = build_augmented(NOMINAL.with_delays(0.05, 0.05), 0.03)
    coarse = build_augmented(NOMINAL.with_delays(0.0, 0.05), 0.06)
    ok &= (len(two_step.layout), two_step.n, coarse.n) == (5, 11, 7)
    assert record("4 block counts", ok,
                  f"two-step {len(two_step.layout)} blocks/{two_step.n} scalars, coarse {coarse.n}")


def test_criterion_05_reward_units():
    vals = (reward_from_state(1.0, 0.0, 1.0), reward_from_state(0.0, 0.0, 1.0),
            reward_from_state(1.0, 1.0, 1.0))
    ok = vals[0] == 0 and math.isclose(vals[1], -100) and math.isclose(vals[2], -10)
    assert record("5 reward units", ok, ", ".join(f"{v:g}" for v in vals))


def test_criterion_06_ddpg_mechanics():
    rng = np.random.default_rng(6)
    bad = skipped = total = 0
    for _ in range(50):
        actor = Actor.init(4, (8, 6), rng, np.float64)
        critic = Critic.init(4, (5,), (3,), (8, 6), rng, np.float64)
        obs = rng.normal(size=(10, 4))
        act = rng.uniform(-6.57, 6.57, (10, 1))
        y = rng.normal(scale=5, size=(10, 1))
        _, cg = critic_loss_and_grads(critic, obs, act, y)
        _, ag = actor_objective_and_grads(actor, critic, obs, 6.57)
        for counts in (
            gradient_mismatches(cg, lambda: float(np.mean((critic(obs, act) - y) ** 2)),
                                critic.params()),
            gradient_mismatches(ag, lambda: float(np.mean(critic(obs, 6.57 * actor(obs)))),
                                actor.params()),
        ):
            bad, skipped, total = bad + counts[0], skipped + counts[1], total + counts[2]
    grads_ok = bad == 0 and skipped <= 0.01 * total

    hp = HyperParams(actor_hidden=(16, 16), critic_joint_hidden=(16, 16), batch_size=1,
                     buffer_capacity=1, dtype="float64")
    agent = init_agent(4, hp, seed=3)
    buf = ReplayBuffer(1, 4, np.float64)
    s = np.array([0.2, -0.1, 0.3, 1.0])
    buf.add(s, 2.0, -7.5, s, True)
    losses = [update(agent, buf)[0] for _ in range(500)]
    q = float(agent.critic(s[None], np.array([[2.0]]))[0, 0])
    bellman_ok = abs(q + 7.5) <= 1e-3 and np.all(np.diff(np.reshape(losses, (10, 50)).max(1)) < 0)

    fifo = ReplayBuffer(5, 2)
    for i in range(8):
        fifo.add(np.zeros(2), i, 0, np.zeros(2), False)
    idx = ReplayBuffer.sample_indices(fifo, 5, np.random.default_rng(0))
    fifo_ok = sorted(fifo.action[:, 0]) == [3, 4, 5, 6, 7] and len(set(idx.tolist())) == 5

    online = [np.ones((3, 3))]
    target = [np.zeros((3, 3))]
    dist = []
    for _ in range(20):
        polyak_update(target, online, 0.005)
        dist.append(np.linalg.norm(target[0] - online[0]))
    polyak_ok = bool(np.all(np.diff(dist) < 0))

    small = HyperParams(actor_hidden=(8, 6), critic_state_hidden=(5, 4), critic_action_hidden=(3,),
                        critic_joint_hidden=(8, 6), batch_size=16, buffer_capacity=256)
    runs = []
    for _ in range(2):
        a = init_agent(4, small, seed=21)
        log = train(a, make_case_env("iii", seed=21), 2)
        runs.append(([e.deterministic_part() for e in log], [p.copy() for p in a.actor.params()]))
    repro_ok = runs[0][0] == runs[1][0] and all(
        np.array_equal(x, y) for x, y in zip(runs[0][1], runs[1][1]))

    ok = grads_ok and bellman_ok and fifo_ok and polyak_ok and repro_ok
    assert record("6 DDPG mechanics", ok,
                  f"gradients {grads_ok} ({total} entries, {skipped} at kinks), Bellman {bellman_ok} (Q={q:.4f}), replay {fifo_ok}, "
                  f"Polyak {polyak_ok}, reproducible {repro_ok}")


def test_criterion_07_pomdp_witness():
    m3 = build_augmented(NOMINAL.with_delays(0.0, 0.05), 0.06)
    sel3 = observation_selector(m3, "reduced")
    shared = np.array([0.4, 0.8, -1.0, 2.0])
    s1 = np.concatenate([[0.45, 0.7, -0.5], shared])
    s2 = np.concatenate([[0.52, 0.9, 1.5], shared])
    gap = float(np.max(np.abs(m3.step(s1, 1.0)[sel3] - m3.step(s2, 1.0)[sel3])))
    witness = np.array_equal(s1[sel3], s2[sel3]) and gap > 1e-3

    env = make_case_env("iv")
    m4 = build_augmented(env.params, env.period)
    sel4 = observation_selector(m4, "reduced")
    rng = np.random.default_rng(7)
    obs = env.reset()
    worst = 0.0
    for a in rng.uniform(-6, 6, 100):
        x = np.concatenate([obs[:3], obs[:3], obs[3:]])
        nxt = env.step(a).observation
        worst = max(worst, float(np.max(np.abs(m4.step(x, a)[sel4] - nxt))))
        obs = nxt
    ok = witness and worst <= 1e-8
    assert record("7 POMDP witness", ok, f"case_iii gap {gap:.3f}, case_iv prediction err {worst:.1e}")


# --------------------------------------------------------------------------- stochastic


@pytest.fixture(scope="module")
def reports():
    found = reproduce(RUN_DIR)
    return {(r.case, r.eval_plant, r.seed): r.metrics for r in found}


def _majority(flags):
    return sum(flags) >= MAJORITY


@pytest.mark.slow
def test_criterion_08_case_i_chatters_on_delayed_plant(reports):
    flags, notes = [], []
    for seed in SEEDS:
        m = reports[("case_i", "delayed", seed)]
        flags.append(m["saturation_duty"] > CHATTER_DUTY
                     and m["action_sign_change_rate"] > CHATTER_RATE
                     and m["settle_amplitude"] > CHATTER_AMPLITUDE)
        notes.append(f"s{seed}: duty {m['saturation_duty']:.2f} rate "
                     f"{m['action_sign_change_rate']:.1f}/s amp {m['settle_amplitude']:.3f}")
    assert record("8 case_i chattering on delayed plant", _majority(flags), "; ".join(notes))


@pytest.mark.slow
def test_criterion_09_case_ii_slower_smaller_oscillation(reports):
    flags, notes = [], []
    for seed in SEEDS:
        one = reports[("case_i", "delayed", seed)]
        two = reports[("case_ii", "delayed", seed)]
        flags.append(two["dominant_period"] > one["dominant_period"]
                     and two["settle_amplitude"] < one["settle_amplitude"])
        notes.append(f"s{seed}: period {two['dominant_period']:.3g} vs {one['dominant_period']:.3g}, "
                     f"amp {two['settle_amplitude']:.3f} vs {one['settle_amplitude']:.3f}")
    assert record("9 case_ii longer period and smaller amplitude than case_i", _majority(flags),
                  "; ".join(notes))


@pytest.mark.slow
@pytest.mark.parametrize("case", ["case_iii", "case_iv"])
def test_criterion_10_cautious_actors(reports, case):
    flags, notes = [], []
    for seed in SEEDS:
        m = reports[(case, "delayed", seed)]
        flags.append(m["settle_rms_pos"] < CAUTIOUS_RMS_POS
                     and m["settle_rms_vel"] < CAUTIOUS_RMS_VEL
                     and m["saturation_duty"] < CAUTIOUS_DUTY)
        notes.append(f"s{seed}: pos {m['settle_rms_pos']:.3f} vel {m['settle_rms_vel']:.3f} "
                     f"duty {m['saturation_duty']:.2f}")
    assert record(f"10 {case} settles on delayed plant", _majority(flags), "; ".join(notes))


@pytest.mark.slow
def test_criterion_11_comparable_rise_times(reports):
    keys = [("case_i", "delay_free"), ("case_ii", "delayed"), ("case_iii", "delayed"),
            ("case_iv", "delayed")]
    flags, notes = [], []
    for seed in SEEDS:
        rises = np.array([reports[(c, p, seed)]["rise_time"] for c, p in keys])
        finite = bool(np.all(np.isfinite(rises)))
        med = float(np.median(rises))
        # an unreached rise has no meaningful spread; report it as unbounded
        spread = float(np.max(np.abs(rises - med)) / med) if finite else float("inf")
        flags.append(finite and spread <= RISE_SPREAD)
        notes.append(f"s{seed}: " + "/".join(f"{r:.2f}" for r in rises) + f" spread {spread:.0%}")
    assert record("11 comparable rise times", _majority(flags), "; ".join(notes))


@pytest.mark.slow
def test_case_iii_training_improves(reports):
    layout = RunLayout(RUN_DIR)
    flags, notes = [], []
    for seed in SEEDS:
        returns = [row["return"] for row in read_training_log(layout.train_log(CaseId.CASE_III, seed))]
        first, last = np.mean(returns[:20]), np.mean(returns[-20:])
        flags.append(last > first)
        notes.append(f"s{seed}: {first:.0f} -> {last:.0f}")
    assert record("case_iii training return improves (first vs last 20 episodes)",
                  _majority(flags), "; ".join(notes))
