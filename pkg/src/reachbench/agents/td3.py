"""Deterministic-policy learners: DDPG and its twin-critic, delayed variant TD3."""
import numpy as np

from ..environment import ACT_DIM, OBS_DIM
from ..nn import AdamState, adam_step, he_init, soft_update
from .base import Agent, check_finite


def td3_target(reward, done, q1_next, q2_next, gamma):
    """Clipped double-Q regression target."""
    return reward + gamma * (1.0 - done) * np.minimum(q1_next, q2_next)


def smoothed_target_action(mu, space, sigma, noise_clip, rng):
    """Target policy smoothing: clipped Gaussian noise, scaled per joint half-range."""
    eps = np.clip(rng.normal(size=mu.shape) * sigma, -noise_clip, noise_clip)
    return np.clip(mu + eps * space.half_range, space.low, space.high)


class DDPGAgent(Agent):
    algorithm = "ddpg"
    network_names = ("actor", "actor_target", "critic1", "critic1_target")
    n_critics = 1

    def _build(self):
        h = list(self.config.hidden)
        rng = self.init_rng
        self.actor = he_init([OBS_DIM] + h + [ACT_DIM], rng, head="tanh")
        self.actor_target = self.actor.copy()
        self.optimizers["actor"] = AdamState.for_network(self.actor, lr=self.config.lr_actor)
        for k in range(1, self.n_critics + 1):
            critic = he_init([OBS_DIM + ACT_DIM] + h + [1], rng)
            setattr(self, f"critic{k}", critic)
            setattr(self, f"critic{k}_target", critic.copy())
            self.optimizers[f"critic{k}"] = AdamState.for_network(critic, lr=self.config.lr_critic)

    def set_action_space(self, space):
        super().set_action_space(space)
        for net in (self.actor, self.actor_target):
            net.set_bounds(space.low, space.high)

    def policy(self, obs_batch):
        return self.actor(obs_batch)

    def _train_action(self, obs, rng):
        return self._gaussian_explore(obs, rng)

    def _critics(self, target=False):
        suffix = "_target" if target else ""
        return [getattr(self, f"critic{k}{suffix}") for k in range(1, self.n_critics + 1)]

    def compute_targets(self, batch, rng=None):
        """Regression targets; bootstraps only rows that are not terminal."""
        y = batch.reward.astype(np.float64).copy()
        live = ~batch.done
        if np.any(live):
            nxt = batch.next_obs[live]
            a_next = self._target_action(nxt, rng or self.explore_rng)
            x = self._critic_input(nxt, a_next)
            qs = [c(x)[:, 0] for c in self._critics(target=True)]
            q_next = qs[0] if len(qs) == 1 else np.minimum(qs[0], qs[1])
            y[live] = y[live] + self.config.gamma * q_next
        return y

    def _target_action(self, next_obs, rng):
        return self.actor_target(next_obs)

    def _actor_due(self, update_index):
        return True

    def update(self, batch, update_index=None):
        cfg = self.config
        n = len(batch)
        y = self.compute_targets(batch)
        x = self._critic_input(batch.obs, batch.action)
        critic_grads, losses = [], []
        for critic in self._critics():
            q, cache = critic.forward(x)
            err = q[:, 0] - y
            losses.append(float(np.mean(err * err)))
            grad, _ = critic.backward(cache, (2.0 / n) * err[:, None])
            critic_grads.append(grad)
        diag = {"critic_loss": float(np.mean(losses)), "actor_objective": None,
                "target_mean": float(np.mean(y))}
        actor_grad = None
        if self._actor_due(update_index):
            a, a_cache = self.actor.forward(batch.obs)
            q, q_cache = self.critic1.forward(self._critic_input(batch.obs, a))
            diag["actor_objective"] = float(np.mean(q))
            # ascend Q: loss = -mean(Q)
            _, dx = self.critic1.backward(q_cache, np.full((n, 1), -1.0 / n))
            actor_grad, _ = self.actor.backward(a_cache, dx[:, OBS_DIM:])
        check_finite(critic_loss=losses, critic_grads=critic_grads,
                     actor_grad=actor_grad if actor_grad is not None else 0.0)
        for k, (critic, grad) in enumerate(zip(self._critics(), critic_grads), start=1):
            adam_step(critic, grad, self.optimizers[f"critic{k}"])
        if actor_grad is not None:
            adam_step(self.actor, actor_grad, self.optimizers["actor"])
            soft_update(self.actor_target, self.actor, cfg.rho)
            for c, ct in zip(self._critics(), self._critics(target=True)):
                soft_update(ct, c, cfg.rho)
        return diag


class TD3Agent(DDPGAgent):
    algorithm = "td3"
    network_names = ("actor", "actor_target", "critic1", "critic1_target",
                     "critic2", "critic2_target")
    n_critics = 2

    def _target_action(self, next_obs, rng):
        cfg = self.config
        return smoothed_target_action(self.actor_target(next_obs), self.action_space,
                                      cfg.target_noise_sigma, cfg.target_noise_clip, rng)

    def _actor_due(self, update_index):
        if update_index is None:
            return True
        return update_index % self.config.policy_delay == 0
