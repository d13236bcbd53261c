import numpy as np
import pytest

from reachbench.agents import save_agent
from reachbench.config import SEED_STREAMS, ConfigError, RunConfig, seed_streams, show_defaults
from reachbench.training import train

FAST = {"hidden": [16, 16], "batch_size": 8, "learning_starts": 8}


def small(**kw):
    base = dict(episodes=30, eval_every_steps=10, eval_episodes=5, final_eval_episodes=10,
                agent=dict(FAST))
    base.update(kw)
    return RunConfig(**base)


def test_seed_streams_named_and_stable():
    a, b = seed_streams(3), seed_streams(3)
    assert tuple(a) == SEED_STREAMS
    for k in SEED_STREAMS:
        assert a[k].generate_state(4).tolist() == b[k].generate_state(4).tolist()
    states = {tuple(s.generate_state(2)) for s in a.values()}
    assert len(states) == 4
    want = np.random.SeedSequence(3).spawn(4)[3].generate_state(2)
    assert a["eval"].generate_state(2).tolist() == want.tolist()


def test_run_config_round_trip_and_validation():
    cfg = small(stage="A2p", reward="sparse", her="no")
    assert cfg.stage == "A2'" and cfg.her is False
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        small(seeds=[])
    with pytest.raises(ConfigError):
        small(agent={"warp": 9})
    with pytest.raises(ConfigError):
        small(curriculum={"mode": "random"})
    with pytest.raises(ConfigError):
        small(her="maybe")


def test_defaults_expose_agent_settings():
    d = show_defaults()
    assert d["agent_defaults"]["td3"]["policy_delay"] == 2
    assert d["agent_defaults"]["td3"]["epsilon_random"] == 0.1
    assert d["agent_defaults"]["sac"]["entropy_alpha"] == 0.2


def test_training_is_reproducible():
    a = train(small(), seed=4, write_files=False)
    b = train(small(), seed=4, write_files=False)
    c = train(small(), seed=5, write_files=False)
    assert a.transcript() == b.transcript()
    assert a.final_report == b.final_report
    assert a.transcript() != c.transcript()
    assert len(a.records) == 30 and a.evaluations


def test_eval_stream_does_not_perturb_training():
    a = train(small(eval_episodes=5), seed=4, write_files=False)
    b = train(small(eval_episodes=9), seed=4, write_files=False)
    assert a.transcript() == b.transcript()


def test_success_rate_mode_moves_tau_on_evaluations():
    res = train(small(curriculum={"mode": "success_rate", "success_rate_trigger": 0.0}), seed=0,
                write_files=False)
    assert res.threshold_trace[:3] == [0.2, 0.18, 0.16]
    assert len(res.threshold_trace) - 1 == len(res.evaluations)


@pytest.mark.parametrize("algo", ["ddpg", "sac"])
def test_other_algorithms_train(algo):
    res = train(small(algorithm=algo, episodes=20), seed=0, write_files=False)
    assert res.agent.updates > 0


def test_continue_from_checkpoint_at_later_stage(tmp_path):
    first = train(small(), seed=0, write_files=False)
    ck = tmp_path / "a1.npz"
    save_agent(first.agent, ck)
    res = train(small(stage="A2'", init_checkpoint=str(ck)), seed=0, write_files=False)
    assert res.agent.action_space.name == "A2'"
    assert res.agent.updates > first.agent.updates


def test_continue_live_agent_keeps_buffer():
    first = train(small(), seed=0, write_files=False)
    agent = first.agent
    stored = len(agent.buffer)
    res = train(small(stage="A2'", episodes=5), seed=1, write_files=False, agent=agent)
    assert res.agent is agent and agent.action_space.name == "A2'"
    # 5 more one-step episodes, each stored once plus one HER copy
    assert len(agent.buffer) == stored + 10
    assert agent.actor.center[4] == 0.0 and agent.actor.scale[4] > 0
