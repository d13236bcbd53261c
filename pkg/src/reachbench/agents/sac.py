"""Soft actor-critic with a separate state-value network and fixed entropy weight."""
import math

import numpy as np

from ..environment import ACT_DIM, OBS_DIM
from ..nn import AdamState, adam_step, he_init, soft_update
from .base import Agent, check_finite

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG2 = math.log(2.0)


def log1m_tanh_sq(u):
    """log(1 - tanh(u)^2), stable for large |u|."""
    return 2.0 * (_LOG2 - u - np.logaddexp(0.0, -2.0 * u))


def squashed_gaussian(mean, log_std, xi, center, half_range):
    """Reparameterised sample and its log-density in joint-angle units.

    ``a = center + half_range * tanh(mean + exp(log_std) * xi)``. Joints with
    zero half-range are deterministic and left out of the density.
    Returns ``(action, log_prob, u)``.
    """
    std = np.exp(log_std)
    u = mean + std * xi
    action = center + half_range * np.tanh(u)
    active = half_range > 0
    per_dim = -0.5 * xi * xi - log_std - _HALF_LOG_2PI - log1m_tanh_sq(u)
    per_dim = per_dim - np.log(np.where(active, half_range, 1.0))
    log_prob = np.sum(np.where(active, per_dim, 0.0), axis=-1)
    return action, log_prob, u


class SACAgent(Agent):
    algorithm = "sac"
    network_names = ("actor", "critic1", "critic2", "value", "value_target")

    def _build(self):
        cfg = self.config
        h = list(cfg.hidden)
        rng = self.init_rng
        self.actor = he_init([OBS_DIM] + h + [ACT_DIM], rng, head="gaussian",
                             log_std_bounds=cfg.log_std_bounds)
        self.critic1 = he_init([OBS_DIM + ACT_DIM] + h + [1], rng)
        self.critic2 = he_init([OBS_DIM + ACT_DIM] + h + [1], rng)
        self.value = he_init([OBS_DIM] + h + [1], rng)
        self.value_target = self.value.copy()
        self.optimizers["actor"] = AdamState.for_network(self.actor, lr=cfg.lr_actor)
        self.optimizers["critic1"] = AdamState.for_network(self.critic1, lr=cfg.lr_critic)
        self.optimizers["critic2"] = AdamState.for_network(self.critic2, lr=cfg.lr_critic)
        self.optimizers["value"] = AdamState.for_network(self.value, lr=cfg.lr_value)

    def _split(self, out):
        return out[:, :ACT_DIM], out[:, ACT_DIM:]

    def policy(self, obs_batch):
        mean, _ = self._split(self.actor(obs_batch))
        space = self.action_space
        return space.center + space.half_range * np.tanh(mean)

    def sample(self, obs_batch, rng):
        mean, log_std = self._split(self.actor(obs_batch))
        xi = rng.normal(size=mean.shape)
        space = self.action_space
        action, logp, _ = squashed_gaussian(mean, log_std, xi, space.center, space.half_range)
        return action, logp

    def _train_action(self, obs, rng):
        return self.sample(obs[None, :], rng)[0][0]

    def actor_loss(self, obs, xi, alpha=None):
        """Value of ``mean(alpha * log_pi - min(Q1, Q2))`` for fixed noise ``xi``."""
        alpha = self.config.entropy_alpha if alpha is None else alpha
        mean, log_std = self._split(self.actor(obs))
        space = self.action_space
        a, logp, _ = squashed_gaussian(mean, log_std, xi, space.center, space.half_range)
        x = self._critic_input(obs, a)
        q = np.minimum(self.critic1(x)[:, 0], self.critic2(x)[:, 0])
        return float(np.mean(alpha * logp - q))

    def actor_objective(self, obs, xi, alpha=None):
        """The quantity the actor ascends, ``mean(min(Q1, Q2) - alpha * log_pi)``."""
        return -self.actor_loss(obs, xi, alpha)

    def update(self, batch, update_index=None, xi=None):
        cfg = self.config
        alpha = cfg.entropy_alpha
        n = len(batch)
        space = self.action_space
        obs = batch.obs

        # fresh reparameterised actions from the current policy
        out, a_cache = self.actor.forward(obs)
        mean, log_std = self._split(out)
        if xi is None:
            xi = self.explore_rng.normal(size=mean.shape)
        a_new, logp, u = squashed_gaussian(mean, log_std, xi, space.center, space.half_range)
        x_new = self._critic_input(obs, a_new)
        q1n, c1n = self.critic1.forward(x_new)
        q2n, c2n = self.critic2.forward(x_new)
        q1n, q2n = q1n[:, 0], q2n[:, 0]
        pick1 = q1n <= q2n
        q_min = np.where(pick1, q1n, q2n)

        # actor: d/d(theta) mean(alpha * logp - q_min)
        _, dx1 = self.critic1.backward(c1n, np.where(pick1, -1.0 / n, 0.0)[:, None])
        _, dx2 = self.critic2.backward(c2n, np.where(pick1, 0.0, -1.0 / n)[:, None])
        dq_da = dx1[:, OBS_DIM:] + dx2[:, OBS_DIM:]
        t = np.tanh(u)
        std = np.exp(log_std)
        active = (space.half_range > 0).astype(np.float64)
        du = dq_da * space.half_range * (1.0 - t * t) + (alpha / n) * 2.0 * t * active
        d_mean = du
        d_log_std = du * std * xi - (alpha / n) * active
        actor_grad, _ = self.actor.backward(a_cache, np.concatenate([d_mean, d_log_std], axis=1))
        actor_obj = float(np.mean(q_min - alpha * logp))

        # value: regress to min Q - alpha * log pi on the fresh actions
        v_tgt = q_min - alpha * logp
        v, v_cache = self.value.forward(obs)
        v_err = v[:, 0] - v_tgt
        value_grad, _ = self.value.backward(v_cache, (2.0 / n) * v_err[:, None])

        # critics: r + gamma * (1 - done) * V_target(s')
        y = batch.reward.astype(np.float64).copy()
        live = ~batch.done
        if np.any(live):
            y[live] = y[live] + cfg.gamma * self.value_target(batch.next_obs[live])[:, 0]
        x = self._critic_input(obs, batch.action)
        critic_grads, losses = [], []
        for critic in (self.critic1, self.critic2):
            q, cache = critic.forward(x)
            err = q[:, 0] - y
            losses.append(float(np.mean(err * err)))
            critic_grads.append(critic.backward(cache, (2.0 / n) * err[:, None])[0])

        value_loss = float(np.mean(v_err * v_err))
        check_finite(critic_loss=losses, value_loss=value_loss, actor_objective=actor_obj,
                     grads=[actor_grad, value_grad] + critic_grads)
        adam_step(self.actor, actor_grad, self.optimizers["actor"])
        adam_step(self.value, value_grad, self.optimizers["value"])
        adam_step(self.critic1, critic_grads[0], self.optimizers["critic1"])
        adam_step(self.critic2, critic_grads[1], self.optimizers["critic2"])
        soft_update(self.value_target, self.value, cfg.rho)
        return {"critic_loss": float(np.mean(losses)), "value_loss": value_loss,
                "actor_objective": actor_obj, "target_mean": float(np.mean(y)),
                "entropy": float(-np.mean(logp))}
