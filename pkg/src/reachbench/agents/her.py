"""Hindsight relabelling: pretend the goal was wherever the arm ended up."""
from dataclasses import replace

import numpy as np

from ..environment import compute_reward

STRATEGIES = ("final", "future")


def _relabel(t, goal, tau, reward_kind):
    obs = t.obs.copy()
    next_obs = t.next_obs.copy()
    obs[3:6] = goal
    next_obs[3:6] = goal
    d = float(np.sqrt(np.sum((t.achieved_goal - goal) ** 2)))
    reward = compute_reward(d, tau, reward_kind)
    return replace(t, obs=obs, next_obs=next_obs, reward=reward,
                   done=bool(t.done or d < tau), desired_goal=np.array(goal, dtype=np.float64))


def her_relabel(episode, strategy="final", tau=0.2, reward_kind="sparse", k=1, rng=None):
    """Return the episode followed by ``k`` relabelled copies per transition.

    ``final`` substitutes the last achieved goal of the episode; ``future``
    draws goals from achieved goals at the same or a later step (needs ``rng``).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown HER strategy {strategy!r}")
    episode = list(episode)
    if not episode:
        raise ValueError("cannot relabel an empty episode")
    out = list(episode)
    if k <= 0:
        return out
    final_goal = episode[-1].achieved_goal
    for i, t in enumerate(episode):
        for _ in range(k):
            if strategy == "final":
                goal = final_goal
            else:
                goal = episode[int(rng.integers(i, len(episode)))].achieved_goal
            out.append(_relabel(t, goal, tau, reward_kind))
    return out
