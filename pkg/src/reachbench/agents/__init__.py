from .base import Agent, AgentConfig, TrainingDivergedError
from .buffer import Batch, ReplayBuffer, Transition
from .checkpoint import CheckpointError, load_agent, save_agent
from .her import her_relabel
from .sac import SACAgent, squashed_gaussian
from .td3 import DDPGAgent, TD3Agent, smoothed_target_action, td3_target

AGENTS = {"ddpg": DDPGAgent, "td3": TD3Agent, "sac": SACAgent}


def make_agent(action_space, config, seed=None, init_rng=None, explore_rng=None):
    """Instantiate the learner named by ``config.algorithm``."""
    return AGENTS[config.algorithm](action_space, config, seed=seed, init_rng=init_rng,
                                    explore_rng=explore_rng)


__all__ = [
    "AGENTS", "Agent", "AgentConfig", "Batch", "CheckpointError", "DDPGAgent", "ReplayBuffer",
    "SACAgent", "TD3Agent", "TrainingDivergedError", "Transition", "her_relabel", "load_agent",
    "make_agent", "save_agent", "smoothed_target_action", "squashed_gaussian", "td3_target",
]
