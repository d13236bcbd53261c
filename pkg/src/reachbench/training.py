"""Training driver: episodes, curriculum, intermittent evaluation, artifacts."""
from dataclasses import dataclass, field
import logging
import os

import numpy as np

from . import kinematics
from .agents import load_agent, make_agent, save_agent
from .config import seed_streams
from .curriculum import (EVAL_THRESHOLDS, ThresholdScheduler, evaluate_policy, export_report,
                         stage_transition, write_csv)
from .environment import EpisodeConfig, ReachingEnv, builtin_action_space, run_episode_loop

log = logging.getLogger(__name__)

TRAIN_LOG_HEADER = ["episode", "steps", "threshold", "distance", "reward", "success", "tries",
                    "critic_loss", "actor_objective"]
EVAL_LOG_HEADER = ["steps", "episode", "threshold", "success_rate_at_threshold",
                   "average_distance"]


@dataclass
class TrainResult:
    agent: object
    records: list
    evaluations: list
    final_report: object = None
    threshold_trace: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)

    def transcript(self):
        """(threshold, distance, reward, success) per episode; used for diffing runs."""
        return [(r.threshold, r.distance, r.reward, r.success) for r in self.records]


def make_env(cfg, env_seed, geometry=None):
    chain, table = geometry or kinematics.load_geometry(cfg.geometry)
    ep = EpisodeConfig(cfg.reward, cfg.curriculum["initial_threshold"], cfg.max_tries,
                       builtin_action_space(cfg.stage))
    if cfg.remote:
        from .service import RemoteEnv
        env = RemoteEnv(cfg.remote)
        env.configure(seed=env_seed, reward=cfg.reward,
                      threshold=cfg.curriculum["initial_threshold"],
                      max_tries=cfg.max_tries, stage=cfg.stage, geometry=cfg.geometry)
        return env
    return ReachingEnv(ep, chain, table, seed=env_seed)


def _int_seed(seq):
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def train(cfg, seed=None, out_dir=None, env=None, write_files=True, hooks=None, agent=None):
    """Train one agent for ``cfg.episodes`` episodes under master ``seed``.

    ``agent`` continues a live agent (parameters and replay buffer kept,
    moved to ``cfg.stage`` if needed) instead of building or loading one.
    ``hooks`` is handed to :func:`environment.run_episode_loop` unchanged.
    """
    seed = cfg.seeds[0] if seed is None else seed
    streams = seed_streams(seed)
    geometry = kinematics.load_geometry(cfg.geometry)
    own_env = env is None
    if env is None:
        env = make_env(cfg, _int_seed(streams["env"]), geometry)
    eval_seq, final_seq = streams["eval"].spawn(2)
    eval_env = ReachingEnv(EpisodeConfig(cfg.reward, 0.05, 1, builtin_action_space(cfg.stage)),
                           *geometry, seed=np.random.default_rng(eval_seq).integers(2**63))

    if agent is not None or cfg.init_checkpoint:
        agent = agent if agent is not None else load_agent(cfg.init_checkpoint)
        agent.explore_rng = np.random.default_rng(streams["explore"])
        if agent.action_space.name != cfg.stage:
            stage_transition(agent, None, agent.action_space.name, cfg.stage)
    else:
        agent = make_agent(builtin_action_space(cfg.stage), cfg.agent_config(),
                           init_rng=np.random.default_rng(streams["init"]),
                           explore_rng=np.random.default_rng(streams["explore"]))

    cur = cfg.curriculum
    scheduler = ThresholdScheduler(tau=cur["initial_threshold"], mode=cur["mode"],
                                   tau_floor=cur["threshold_floor"],
                                   trigger_count=cur["consecutive_successes"],
                                   rate_trigger=cur["success_rate_trigger"], stage=cfg.stage)
    env.threshold = scheduler.tau
    episode_hook = scheduler if cur["mode"] == "consecutive" else None

    out_dir = out_dir or cfg.out_dir
    if write_files:
        os.makedirs(out_dir, exist_ok=True)
    records, evaluations, rows = [], [], []
    steps = 0
    next_eval = cfg.eval_every_steps
    for ep in range(cfg.episodes):
        rec = run_episode_loop(env, agent, episode_hook, episode=ep, hooks=hooks)
        steps += rec.tries
        records.append(rec)
        rows.append([ep, steps, rec.threshold, rec.distance, rec.reward, int(rec.success), rec.tries,
                     rec.diagnostics.get("critic_loss", ""), rec.diagnostics.get("actor_objective", "")])
        if steps >= next_eval:
            next_eval += cfg.eval_every_steps
            tau = scheduler.tau
            thresholds = tuple(sorted(set(EVAL_THRESHOLDS) | {round(tau, 6)}, reverse=True))
            report = evaluate_policy(agent, eval_env, cfg.eval_episodes, thresholds)
            rate = report.rate(tau)
            evaluations.append([steps, ep, tau, rate, report.average_distance])
            log.info("steps=%d episode=%d tau=%.2f eval_success=%.3f avg_dist=%.4f",
                     steps, ep, tau, rate, report.average_distance)
            if cur["mode"] == "success_rate":
                env.threshold = scheduler.on_evaluation(rate)
        if (write_files and cfg.checkpoint_every_episodes
                and (ep + 1) % cfg.checkpoint_every_episodes == 0 and ep + 1 < cfg.episodes):
            save_agent(agent, os.path.join(out_dir, f"checkpoint_ep{ep + 1}.npz"))

    final_env = ReachingEnv(EpisodeConfig(cfg.reward, 0.05, 1, builtin_action_space(cfg.stage)),
                            *geometry, seed=np.random.default_rng(final_seq).integers(2**63))
    final = evaluate_policy(agent, final_env, cfg.final_eval_episodes)
    result = TrainResult(agent, records, evaluations, final, list(scheduler.trace))
    if write_files:
        result.paths["train_log"] = os.path.join(out_dir, "train_log.csv")
        write_csv(result.paths["train_log"], TRAIN_LOG_HEADER, rows)
        result.paths["eval_log"] = os.path.join(out_dir, "eval_log.csv")
        write_csv(result.paths["eval_log"], EVAL_LOG_HEADER, evaluations)
        result.paths["checkpoint"] = os.path.join(out_dir, "checkpoint_final.npz")
        save_agent(agent, result.paths["checkpoint"])
        row_info = {"algorithm": cfg.algorithm, "stage": cfg.stage, "reward_kind": cfg.reward,
                    "her": cfg.her, "training_length": cfg.episodes}
        result.paths.update(export_report(final, out_dir, "final", row_info))
    if own_env and hasattr(env, "close"):
        env.close()
    return result
