from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..environment import ACT_DIM, OBS_DIM, Observation, clip_action
from .buffer import ReplayBuffer, Transition
from .her import her_relabel


class TrainingDivergedError(RuntimeError):
    """A loss or gradient went non-finite; the update was not applied."""


@dataclass
class AgentConfig:
    algorithm: str = "td3"
    gamma: float = 0.99
    batch_size: int = 256
    buffer_capacity: int = 100_000
    learning_starts: int = 1000
    hidden: tuple = (256, 256)
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    lr_value: float = 3e-4
    rho: float = 0.005
    gaussian_sigma: float = 0.1
    epsilon_random: float = 0.1
    target_noise_sigma: float = 0.2
    target_noise_clip: float = 0.5
    policy_delay: int = 2
    entropy_alpha: float = 0.2
    log_std_bounds: tuple = (-20.0, 2.0)
    her: bool = False
    her_strategy: str = "final"
    relabels_per_transition: int = 1

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.log_std_bounds = tuple(float(b) for b in self.log_std_bounds)
        if self.algorithm not in ("ddpg", "td3", "sac"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if not 0.0 <= self.epsilon_random <= 1.0:
            raise ValueError("epsilon_random must lie in [0, 1]")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")
        if min(self.lr_actor, self.lr_critic, self.lr_value) <= 0:
            raise ValueError("learning rates must be positive")
        if self.gaussian_sigma < 0 or self.target_noise_sigma < 0 or self.target_noise_clip < 0:
            raise ValueError("noise scales must be >= 0")
        if self.entropy_alpha < 0:
            raise ValueError("entropy_alpha must be >= 0")
        if self.relabels_per_transition < 0:
            raise ValueError("relabels_per_transition must be >= 0")

    @classmethod
    def defaults_for(cls, algorithm, **overrides):
        base = {"algorithm": algorithm}
        if algorithm == "sac":
            base.update(lr_actor=3e-4, lr_critic=3e-4, lr_value=3e-4)
        base.update(overrides)
        return cls(**base)

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["log_std_bounds"] = list(self.log_std_bounds)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown agent config keys: {sorted(unknown)}")
        return cls(**d)

    @property
    def warmup(self):
        """Number of stored transitions before gradient updates begin."""
        return max(self.batch_size, self.learning_starts)


def as_obs_array(obs):
    if isinstance(obs, Observation):
        return obs.to_array()
    arr = np.asarray(obs, dtype=np.float64)
    if arr.shape[-1] != OBS_DIM:
        raise ValueError(f"observations have {OBS_DIM} entries")
    return arr


def check_finite(**values):
    for name, v in values.items():
        parts = v if isinstance(v, (list, tuple)) else [v]
        if not all(np.all(np.isfinite(p)) for p in parts):
            raise TrainingDivergedError(f"non-finite {name} encountered; update aborted")


class Agent:
    """Shared plumbing: buffer, HER, exploration, remember/learn cadence.

    Subclasses build their networks in ``_build`` and implement ``policy``
    (noise-free action batch), ``_train_action`` and ``update``.
    """

    algorithm = None
    network_names = ()

    def __init__(self, action_space, config=None, seed=None, init_rng=None, explore_rng=None):
        self.config = config or AgentConfig.defaults_for(self.algorithm)
        if self.config.algorithm != self.algorithm:
            raise ValueError(f"config is for {self.config.algorithm}, agent is {self.algorithm}")
        seq = np.random.SeedSequence(seed)
        s_init, s_explore = seq.spawn(2)
        self.init_rng = init_rng or np.random.default_rng(s_init)
        self.explore_rng = explore_rng or np.random.default_rng(s_explore)
        self.action_space = action_space
        self.buffer = ReplayBuffer(self.config.buffer_capacity)
        self.updates = 0
        self.env_steps = 0
        self._episode = []
        self.optimizers = {}
        self._build()
        self.set_action_space(action_space)

    # -- acting -----------------------------------------------------------
    def set_action_space(self, space):
        self.action_space = space

    def policy(self, obs_batch):
        raise NotImplementedError

    def _train_action(self, obs):
        raise NotImplementedError

    def act(self, obs, mode="eval", rng=None):
        x = as_obs_array(obs)
        if mode == "eval":
            a = self.policy(x[None, :])[0]
        elif mode == "train":
            rng = rng or self.explore_rng
            if len(self.buffer) < self.config.warmup:
                a = self.action_space.sample(rng)
            else:
                a = self._train_action(x, rng)
        else:
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        return clip_action(a, self.action_space)

    def _gaussian_explore(self, x, rng):
        space = self.action_space
        a = self.policy(x[None, :])[0]
        a = a + rng.normal(size=ACT_DIM) * (self.config.gaussian_sigma * space.half_range)
        if rng.random() < self.config.epsilon_random:
            a = space.sample(rng)
        return a

    # -- memory -----------------------------------------------------------
    def remember(self, obs, action, reward, next_obs, done, info=None, tau=None, reward_kind=None):
        """Store one step; on episode end also store hindsight copies.

        Truncation (``info["truncated"]``) ends the episode without making the
        transition terminal for bootstrapping.
        """
        info = info or {}
        terminal = bool(done) and not info.get("truncated", False)
        t = Transition.from_step(as_obs_array(obs), action, reward, as_obs_array(next_obs), terminal)
        self.buffer.push(t)
        self.env_steps += 1
        self._episode.append(t)
        if done:
            cfg = self.config
            if cfg.her and cfg.relabels_per_transition > 0:
                if tau is None or reward_kind is None:
                    raise ValueError("HER needs the episode threshold and reward kind")
                extra = her_relabel(self._episode, cfg.her_strategy, tau, reward_kind,
                                    cfg.relabels_per_transition, self.explore_rng)
                for r in extra[len(self._episode):]:
                    self.buffer.push(r)
            self._episode = []

    def learn(self):
        if len(self.buffer) < self.config.warmup:
            return None
        batch = self.buffer.sample(self.config.batch_size, self.explore_rng)
        self.updates += 1
        return self.update(batch, self.updates)

    def update(self, batch, update_index):
        raise NotImplementedError

    # -- helpers for subclasses --------------------------------------------
    @staticmethod
    def _critic_input(obs, action):
        return np.concatenate([obs, action], axis=1)

    def networks(self):
        return {name: getattr(self, name) for name in self.network_names}
