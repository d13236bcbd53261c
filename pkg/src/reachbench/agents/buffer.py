from dataclasses import dataclass

import numpy as np

from ..environment import ACT_DIM, OBS_DIM


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool
    desired_goal: np.ndarray
    achieved_goal: np.ndarray

    @classmethod
    def from_step(cls, obs, action, reward, next_obs, done):
        obs = np.asarray(obs, dtype=np.float64)
        next_obs = np.asarray(next_obs, dtype=np.float64)
        return cls(obs, np.asarray(action, dtype=np.float64), float(reward), next_obs, bool(done),
                   obs[3:6].copy(), next_obs[0:3].copy())


@dataclass
class Batch:
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray
    desired_goal: np.ndarray
    achieved_goal: np.ndarray

    def __len__(self):
        return self.reward.shape[0]

    def transitions(self):
        return [Transition(self.obs[i], self.action[i], float(self.reward[i]), self.next_obs[i],
                           bool(self.done[i]), self.desired_goal[i], self.achieved_goal[i])
                for i in range(len(self))]


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity, obs_dim=OBS_DIM, act_dim=ACT_DIM):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim))
        self.action = np.zeros((capacity, act_dim))
        self.reward = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.desired_goal = np.zeros((capacity, 3))
        self.achieved_goal = np.zeros((capacity, 3))
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, t):
        i = self.cursor
        self.obs[i] = t.obs
        self.action[i] = t.action
        self.reward[i] = t.reward
        self.next_obs[i] = t.next_obs
        self.done[i] = t.done
        self.desired_goal[i] = t.desired_goal
        self.achieved_goal[i] = t.achieved_goal
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __getitem__(self, k):
        """k-th stored transition, oldest first."""
        if not 0 <= k < self.size:
            raise IndexError(k)
        i = (self.cursor - self.size + k) % self.capacity
        return Transition(self.obs[i].copy(), self.action[i].copy(), float(self.reward[i]),
                          self.next_obs[i].copy(), bool(self.done[i]),
                          self.desired_goal[i].copy(), self.achieved_goal[i].copy())

    def sample_indices(self, n, rng):
        if self.size < n or self.size == 0:
            raise ValueError(f"cannot sample {n} transitions from a buffer holding {self.size}")
        return rng.integers(0, self.size, size=n)

    def sample(self, n, rng):
        """Uniform sample with replacement."""
        idx = self.sample_indices(n, rng)
        return Batch(self.obs[idx], self.action[idx], self.reward[idx], self.next_obs[idx],
                     self.done[idx], self.desired_goal[idx], self.achieved_goal[idx])
