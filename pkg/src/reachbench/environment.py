"""One-step reaching environment: observations, rewards, action spaces."""
from dataclasses import dataclass, field, replace
import enum
import math

import numpy as np

from . import kinematics
from .kinematics import N_JOINTS

OBS_DIM = 12
ACT_DIM = N_JOINTS


class UsageError(RuntimeError):
    """Environment called out of order (e.g. step after done)."""


class RewardKind(str, enum.Enum):
    SPARSE = "sparse"
    DENSE = "dense"


@dataclass(frozen=True)
class ActionSpace:
    low: np.ndarray
    high: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        low = np.asarray(self.low, dtype=np.float64).reshape(ACT_DIM)
        high = np.asarray(self.high, dtype=np.float64).reshape(ACT_DIM)
        if np.any(low > high):
            raise ValueError("action space needs low <= high")
        fixed = low == high
        if np.any(fixed & (low != 0.0)):
            raise ValueError("non-actuated joints must be pinned at 0")
        low.setflags(write=False)
        high.setflags(write=False)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def actuated_mask(self):
        return self.low < self.high

    @property
    def center(self):
        return 0.5 * (self.low + self.high)

    @property
    def half_range(self):
        return 0.5 * (self.high - self.low)

    def contains(self, a):
        a = np.asarray(a)
        return bool(np.all(a >= self.low) and np.all(a <= self.high))

    def sample(self, rng):
        return rng.uniform(self.low, self.high)


_PI = math.pi
STAGES = {
    "A1": ([-_PI / 2, -_PI / 2, 0, 0, 0, 0], [_PI / 2, 0, _PI, 0, 0, 0]),
    "A2": ([-_PI / 2, -2 * _PI / 3, 0, 0, 0, 0], [_PI / 2, 0, 3 * _PI / 4, 0, 0, 0]),
    "A2'": ([-_PI / 2, -2 * _PI / 3, 0, 0, -_PI / 2, 0], [_PI / 2, 0, 3 * _PI / 4, 0, _PI / 2, 0]),
    "A3": ([-_PI / 2, -2 * _PI / 3, 0, -_PI / 2, 0, -_PI], [_PI / 2, 0, 3 * _PI / 4, _PI / 2, _PI / 2, _PI]),
}
STAGE_ALIASES = {"A2p": "A2'", "A2prime": "A2'"}


def canonical_stage(stage):
    stage = STAGE_ALIASES.get(stage, stage)
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {sorted(STAGES)}")
    return stage


def builtin_action_space(stage):
    """Joint bounds for stage A1, A2, A2' (A2 with joint 5 opened) or A3."""
    stage = canonical_stage(stage)
    low, high = STAGES[stage]
    return ActionSpace(low, high, name=stage)


def clip_action(a, space):
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-1] != ACT_DIM:
        raise ValueError(f"actions have {ACT_DIM} entries, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("actions must be finite")
    return np.minimum(np.maximum(a, space.low), space.high)


def compute_reward(d, tau, kind):
    """Sparse: 1 inside the threshold else 0. Dense: 1 inside else -d."""
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    if tau <= 0:
        raise ValueError(f"threshold must be positive, got {tau}")
    if d < tau:
        return 1.0
    return 0.0 if RewardKind(kind) is RewardKind.SPARSE else -float(d)


@dataclass(frozen=True)
class Observation:
    ee_position: np.ndarray
    target_position: np.ndarray
    joint_angles: np.ndarray

    def to_array(self):
        return np.concatenate([self.ee_position, self.target_position, self.joint_angles])

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (OBS_DIM,):
            raise ValueError(f"observations have {OBS_DIM} entries, got shape {arr.shape}")
        return cls(arr[0:3].copy(), arr[3:6].copy(), arr[6:12].copy())

    def with_target(self, target):
        return replace(self, target_position=np.asarray(target, dtype=np.float64).copy())


@dataclass
class EpisodeConfig:
    reward_kind: RewardKind = RewardKind.DENSE
    threshold: float = 0.20
    max_tries: int = 1
    action_space: ActionSpace = field(default_factory=lambda: builtin_action_space("A1"))

    def __post_init__(self):
        self.reward_kind = RewardKind(self.reward_kind)
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if int(self.max_tries) < 1:
            raise ValueError("max_tries must be >= 1")
        self.max_tries = int(self.max_tries)


class ReachingEnv:
    """Kinematic reaching task: set the joints once, get scored on distance.

    Actions are absolute joint targets reached instantly. ``done`` comes from
    success or from running out of tries; ``info["exhausted"]`` tells the two
    apart.
    """

    def __init__(self, config=None, chain=None, table=None, seed=None):
        if chain is None or table is None:
            default_chain, default_table = kinematics.load_geometry()
            chain = chain or default_chain
            table = table or default_table
        self.chain = chain
        self.table = table
        self.config = config or EpisodeConfig()
        self.rng = np.random.default_rng(seed)
        self.joints = np.zeros(ACT_DIM)
        self.target = None
        self.tries = 0
        self.done = True
        self._home = kinematics.forward_kinematics(chain, np.zeros(ACT_DIM))

    @property
    def action_space(self):
        return self.config.action_space

    @action_space.setter
    def action_space(self, space):
        self.config.action_space = space

    @property
    def threshold(self):
        return self.config.threshold

    @threshold.setter
    def threshold(self, tau):
        if not tau > 0:
            raise ValueError("threshold must be > 0")
        self.config.threshold = float(tau)

    def seed(self, seed):
        self.rng = np.random.default_rng(seed)

    def observation(self):
        ee = kinematics.forward_kinematics(self.chain, self.joints)
        return Observation(ee, self.target.copy(), self.joints.copy())

    def reset(self):
        self.joints = np.zeros(ACT_DIM)
        self.target = kinematics.sample_target(self.table, self.rng)
        self.tries = 0
        self.done = False
        return Observation(self._home.copy(), self.target.copy(), self.joints.copy())

    def step(self, action):
        if self.done:
            raise UsageError("step() called on a finished episode; call reset() first")
        self.joints = clip_action(action, self.action_space)
        obs = self.observation()
        d = kinematics.distance_to_target(obs.ee_position, self.target)
        tau = self.config.threshold
        reward = compute_reward(d, tau, self.config.reward_kind)
        success = d < tau
        self.tries += 1
        exhausted = (not success) and self.tries >= self.config.max_tries
        self.done = success or exhausted
        info = {"distance": d, "success": success, "tries": self.tries, "exhausted": exhausted,
                # running out of several tries is a time limit, not a terminal state
                "truncated": exhausted and self.config.max_tries > 1}
        return obs, reward, self.done, info


@dataclass
class EpisodeRecord:
    episode: int
    threshold: float
    distance: float
    reward: float
    success: bool
    tries: int
    diagnostics: dict = field(default_factory=dict)


def run_episode_loop(env, agent, scheduler=None, episode=0, hooks=None):
    """Run one training episode.

    Control flow per try: act, execute, reward, done test, ``remember``,
    ``learn``; the threshold scheduler runs once when the episode ends.
    ``hooks`` may hold callables keyed ``on_step`` / ``on_episode``.
    """
    hooks = hooks or {}
    tau = env.threshold
    obs = env.reset()
    done = False
    diagnostics = {}
    total_reward = 0.0
    while not done:
        action = agent.act(obs, "train")
        next_obs, reward, done, info = env.step(action)
        agent.remember(obs, action, reward, next_obs, done, info, tau, env.config.reward_kind)
        diag = agent.learn()
        if diag:
            diagnostics = diag
        if "on_step" in hooks:
            hooks["on_step"](obs, action, reward, next_obs, done, info)
        total_reward = reward
        obs = next_obs
    record = EpisodeRecord(episode, tau, info["distance"], total_reward, bool(info["success"]),
                           info["tries"], diagnostics)
    if scheduler is not None:
        new_tau = scheduler(bool(info["success"]))
        if new_tau is not None:
            env.threshold = new_tau
    if "on_episode" in hooks:
        hooks["on_episode"](record)
    return record
