"""Run configuration and seed handling.

A run is described by one JSON object; every key is optional and falls back to
:data:`DEFAULTS` (``reachbench config show-defaults`` prints them). Unknown keys
are rejected.

Seeds: each master seed expands through ``numpy.random.SeedSequence`` into
four named child streams, in this order: ``env`` (target spawning during
training), ``init`` (network initialisation), ``explore`` (action noise, batch
sampling, HER goal draws) and ``eval`` (evaluation targets). Child *i* is
``SeedSequence(master).spawn(4)[i]``, so evaluation draws never perturb the
training streams.
"""
import copy
from dataclasses import dataclass, field
import json

import numpy as np

from .agents.base import AgentConfig
from .environment import RewardKind, canonical_stage

SEED_STREAMS = ("env", "init", "explore", "eval")


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "algorithm": "td3",
    "reward": "dense",
    "her": True,
    "stage": "A1",
    "max_tries": 1,
    "curriculum": {
        "mode": "consecutive",
        "initial_threshold": 0.20,
        "threshold_floor": 0.03,
        "consecutive_successes": 15,
        "success_rate_trigger": 0.95,
    },
    "agent": {},
    "seeds": [0],
    "episodes": 10000,
    "eval_every_steps": 1000,
    "eval_episodes": 100,
    "final_eval_episodes": 500,
    "checkpoint_every_episodes": 5000,
    "remote": None,
    "out_dir": "runs/default",
    "init_checkpoint": None,
    "geometry": None,
}


def seed_streams(master):
    """Named ``SeedSequence`` children of one master seed."""
    children = np.random.SeedSequence(int(master)).spawn(len(SEED_STREAMS))
    return dict(zip(SEED_STREAMS, children))


@dataclass
class RunConfig:
    algorithm: str = DEFAULTS["algorithm"]
    reward: str = DEFAULTS["reward"]
    her: bool = DEFAULTS["her"]
    stage: str = DEFAULTS["stage"]
    max_tries: int = DEFAULTS["max_tries"]
    curriculum: dict = field(default_factory=lambda: dict(DEFAULTS["curriculum"]))
    agent: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    episodes: int = DEFAULTS["episodes"]
    eval_every_steps: int = DEFAULTS["eval_every_steps"]
    eval_episodes: int = DEFAULTS["eval_episodes"]
    final_eval_episodes: int = DEFAULTS["final_eval_episodes"]
    checkpoint_every_episodes: int = DEFAULTS["checkpoint_every_episodes"]
    remote: str = None
    out_dir: str = DEFAULTS["out_dir"]
    init_checkpoint: str = None
    geometry: str = None

    def __post_init__(self):
        try:
            if self.algorithm not in ("ddpg", "td3", "sac"):
                raise ConfigError(f"algorithm must be ddpg, td3 or sac, got {self.algorithm!r}")
            self.reward = RewardKind(self.reward).value
            self.stage = canonical_stage(self.stage)
            self.her = _as_bool(self.her)
            cur = dict(DEFAULTS["curriculum"])
            unknown = set(self.curriculum) - set(cur)
            if unknown:
                raise ConfigError(f"unknown curriculum keys {sorted(unknown)}")
            cur.update(self.curriculum)
            self.curriculum = cur
            if cur["mode"] not in ("consecutive", "success_rate"):
                raise ConfigError(f"unknown curriculum mode {cur['mode']!r}")
            if not cur["initial_threshold"] >= cur["threshold_floor"] > 0:
                raise ConfigError("need initial_threshold >= threshold_floor > 0")
            if int(self.episodes) <= 0:
                raise ConfigError("episode budget must be > 0")
            if not self.seeds:
                raise ConfigError("seed list must be non-empty")
            self.seeds = [int(s) for s in self.seeds]
            if int(self.max_tries) < 1:
                raise ConfigError("max_tries must be >= 1")
            for key in ("eval_every_steps", "eval_episodes", "final_eval_episodes"):
                if int(getattr(self, key)) < 1:
                    raise ConfigError(f"{key} must be >= 1")
            self.agent_config()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def agent_config(self):
        overrides = dict(self.agent)
        overrides["her"] = self.her
        try:
            return AgentConfig.defaults_for(self.algorithm, **overrides)
        except TypeError as exc:
            raise ConfigError(f"bad agent override: {exc}") from exc

    def to_dict(self):
        return {k: copy.deepcopy(getattr(self, k)) for k in DEFAULTS}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown run config keys {sorted(unknown)}")
        return cls(**copy.deepcopy(d))

    @classmethod
    def load(cls, path, **overrides):
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("run config must be a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)


def _as_bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("yes", "true", "on", "1"):
        return True
    if isinstance(v, str) and v.lower() in ("no", "false", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def show_defaults():
    """All declared defaults, including the per-algorithm agent settings."""
    out = copy.deepcopy(DEFAULTS)
    out["agent_defaults"] = {algo: AgentConfig.defaults_for(algo).to_dict()
                             for algo in ("ddpg", "td3", "sac")}
    return out
