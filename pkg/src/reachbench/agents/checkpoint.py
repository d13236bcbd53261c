"""Agent checkpoints as ``.npz`` archives.

Layout: one ``meta`` entry holding UTF-8 JSON (format version, algorithm,
agent config, action space, counters, network layer sizes) followed by raw
float64 arrays ``net/<name>/{flat,center,scale}`` and
``opt/<name>/{m,v}``. Arrays are stored row-major and load back bitwise.
"""
import io
import json
import zipfile

import numpy as np

from ..environment import ActionSpace
from .base import AgentConfig

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _agent_classes():
    from .sac import SACAgent
    from .td3 import DDPGAgent, TD3Agent
    return {"ddpg": DDPGAgent, "td3": TD3Agent, "sac": SACAgent}


def save_agent(agent, path):
    meta = {
        "format_version": FORMAT_VERSION,
        "algorithm": agent.algorithm,
        "config": agent.config.to_dict(),
        "action_space": {"low": agent.action_space.low.tolist(),
                         "high": agent.action_space.high.tolist(),
                         "name": agent.action_space.name},
        "updates": agent.updates,
        "env_steps": agent.env_steps,
        "networks": {name: {"sizes": net.sizes, "head": net.head}
                     for name, net in agent.networks().items()},
        "optimizers": {name: {"t": s.t, "lr": s.lr, "beta1": s.beta1, "beta2": s.beta2,
                              "eps": s.eps} for name, s in agent.optimizers.items()},
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    for name, net in agent.networks().items():
        for key, arr in net.state_dict().items():
            arrays[f"net/{name}/{key}"] = arr
    for name, state in agent.optimizers.items():
        arrays[f"opt/{name}/m"] = state.m
        arrays[f"opt/{name}/v"] = state.v
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_agent(path):
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
            if meta.get("format_version") != FORMAT_VERSION:
                raise CheckpointError(
                    f"checkpoint format {meta.get('format_version')} != supported {FORMAT_VERSION}")
            cls = _agent_classes()[meta["algorithm"]]
            space = ActionSpace(meta["action_space"]["low"], meta["action_space"]["high"],
                                meta["action_space"]["name"])
            agent = cls(space, AgentConfig.from_dict(meta["config"]), seed=0)
            for name, net in agent.networks().items():
                if net.sizes != meta["networks"][name]["sizes"]:
                    raise CheckpointError(f"layer sizes of {name} do not match the config")
                net.load_state_dict({k: data[f"net/{name}/{k}"] for k in ("flat", "center", "scale")})
            for name, state in agent.optimizers.items():
                info = meta["optimizers"][name]
                state.m[:] = data[f"opt/{name}/m"]
                state.v[:] = data[f"opt/{name}/v"]
                state.t = int(info["t"])
                state.lr, state.beta1, state.beta2, state.eps = (
                    info["lr"], info["beta1"], info["beta2"], info["eps"])
            agent.updates = int(meta["updates"])
            agent.env_steps = int(meta["env_steps"])
            return agent
    except CheckpointError:
        raise
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint {path} not found") from exc
    except (zipfile.BadZipFile, KeyError, ValueError, EOFError, OSError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt or incomplete checkpoint {path}: {exc}") from exc
