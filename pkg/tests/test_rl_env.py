import numpy as np
import pytest

from fracdelay.delay_augment import build_augmented, observation_selector
from fracdelay.lti_core import PlantParams
from fracdelay.rl_env import (
    CaseId,
    EnvConfig,
    env_reset,
    env_step,
    make_case_env,
    make_env,
    plant_for,
    reward_from_state,
)


class TestMakeEnv:
    def test_case_iii_defaults(self):
        env = make_case_env("iii")
        assert env.obs_width == 4
        assert env.period == 0.06
        assert (env.params.tau_i, env.params.tau_o) == (0.0, 0.05)

    def test_case_i_defaults(self):
        env = make_case_env("i")
        assert env.obs_width == 3
        assert env.period == 0.005
        assert env.params.total_delay == 0

    def test_case_ii_observes_output_only(self):
        env = make_case_env("ii")
        assert env.obs_width == 3
        assert (env.params.tau_i, env.params.tau_o) == (0.0, 0.05)

    def test_case_iv_is_input_delay(self):
        env = make_case_env("iv")
        assert (env.params.tau_i, env.params.tau_o) == (0.05, 0.0)
        assert env.obs_width == 4

    def test_rejects_period_not_exceeding_delay(self):
        with pytest.raises(ValueError):
            make_env(EnvConfig(case="iii", params=PlantParams(tau_o=0.06)))
        with pytest.raises(ValueError):
            make_env(EnvConfig(case="iv", params=PlantParams(tau_i=0.03, tau_o=0.035)))

    def test_step_counts(self):
        assert make_case_env("i").n_steps == 2520
        for case in ("ii", "iii", "iv"):
            assert make_case_env(case).n_steps == 210

    def test_delayed_plant_for_case_i_is_output_delay(self):
        p = plant_for("i", "delayed")
        assert (p.tau_i, p.tau_o) == (0.0, 0.05)


class TestReward:
    def test_at_reference(self):
        assert reward_from_state(1.0, 0.0, 1.0) == 0.0

    def test_at_rest_on_ground(self):
        assert reward_from_state(0.0, 0.0, 1.0) == pytest.approx(-100.0)

    def test_velocity_weight(self):
        assert reward_from_state(1.0, 1.0, 1.0) == pytest.approx(-10.0)

    def test_non_positive(self):
        rng = np.random.default_rng(0)
        for z, v in rng.normal(size=(200, 2)) * 3:
            r = reward_from_state(z, v, 1.0)
            assert r < 0 or (z == 1.0 and v == 0.0)

    def test_env_reward_uses_true_state(self):
        env = make_case_env("iii")
        env.reset()
        res = env.step(6.57)
        x = res.info["state"]
        assert res.reward == pytest.approx(reward_from_state(x[0], x[1]))
        # the delayed measurement lags the true state
        assert res.observation[0] != x[0]


class TestEpisodes:
    @pytest.mark.parametrize("case,width", [("i", 3), ("ii", 3), ("iii", 4), ("iv", 4)])
    def test_reset_observation(self, case, width):
        obs = env_reset(make_case_env(case))
        np.testing.assert_array_equal(obs, np.zeros(width))

    def test_same_seed_same_trajectory(self):
        acts = np.random.default_rng(3).uniform(-8, 8, 50)
        outs = []
        for _ in range(2):
            env = make_case_env("iii", seed=11)
            env.reset()
            outs.append([env_step(env, a).observation for a in acts])
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_done_exactly_at_episode_end(self):
        env = make_case_env("ii")
        env.reset()
        flags = [env.step(0.0).done for _ in range(210)]
        assert flags[-1] and not any(flags[:-1])

    def test_prev_input_is_saturated_action(self):
        env = make_case_env("iv")
        env.reset()
        for a in (1.0, 12.0, -40.0, 0.3):
            obs = env.step(a).observation
            assert obs[3] == pytest.approx(float(np.clip(a, -6.57, 6.57)))

    def test_error_coordinates_switch(self):
        env = make_env(EnvConfig(case="i", error_coordinates=True))
        assert env.reset()[0] == -1.0


def _drive(case, actions):
    env = make_case_env(case)
    obs = [env.reset()]
    for a in actions:
        obs.append(env.step(a).observation)
    return env, np.array(obs)


class TestMarkovProperty:
    def test_case_iv_observation_is_sufficient(self):
        rng = np.random.default_rng(7)
        actions = rng.uniform(-6, 6, 60)
        env, obs = _drive("iv", actions)
        model = build_augmented(env.params, env.period)
        sel = observation_selector(model, "reduced")
        worst = 0.0
        for k, a in enumerate(actions):
            # the observation fixes every augmented state entry
            x = np.concatenate([obs[k][:3], obs[k][:3], obs[k][3:]])
            pred = model.step(x, a)[sel]
            worst = max(worst, np.max(np.abs(pred - obs[k + 1])))
        assert worst <= 1e-8

    def test_case_iii_full_augmented_state_predicts(self):
        rng = np.random.default_rng(8)
        actions = rng.uniform(-6, 6, 60)
        env, obs = _drive("iii", actions)
        model = build_augmented(env.params, env.period)
        sel = observation_selector(model, "reduced")
        x = np.zeros(model.n)
        for k, a in enumerate(actions):
            x = model.step(x, a)
            assert np.max(np.abs(x[sel] - obs[k + 1])) <= 1e-8

    def test_case_iii_observation_is_not_sufficient(self):
        env = make_case_env("iii")
        model = build_augmented(env.params, env.period)
        sel = observation_selector(model, "reduced")
        shared = np.array([0.4, 0.8, -1.0, 2.0])  # delayed output and previous input
        first = np.concatenate([[0.45, 0.7, -0.5], shared])
        second = np.concatenate([[0.52, 0.9, 1.5], shared])
        assert np.array_equal(first[sel], second[sel])
        nxt1 = model.step(first, 1.0)[sel]
        nxt2 = model.step(second, 1.0)[sel]
        assert np.max(np.abs(nxt1 - nxt2)) > 1e-3
