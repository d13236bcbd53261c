"""Threshold scheduling, staged action spaces, evaluation and report export."""
import csv
from dataclasses import dataclass, field, replace
import json
import math
import os

import numpy as np

from .environment import builtin_action_space, canonical_stage

EVAL_THRESHOLDS = (0.20, 0.15, 0.10, 0.07, 0.05, 0.03)
STAGE_ORDER = {"A1": 0, "A2": 1, "A2'": 1, "A3": 2}
STAGE_JOINTS = {"A1": "1-3", "A2": "1-3", "A2'": "1-3,5", "A3": "1-6"}
MODES = ("consecutive", "success_rate")


@dataclass(frozen=True)
class CurriculumState:
    tau: float = 0.20
    mode: str = "consecutive"
    consecutive_successes: int = 0
    tau_floor: float = 0.03
    stage: str = "A1"
    history: tuple = ()
    trigger_count: int = 15
    rate_trigger: float = 0.95
    coarse_step: float = 0.02
    fine_step: float = 0.01
    fine_below: float = 0.10

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown curriculum mode {self.mode!r}")
        if not self.tau_floor > 0 or self.tau < self.tau_floor:
            raise ValueError("need tau >= tau_floor > 0")
        object.__setattr__(self, "stage", canonical_stage(self.stage))


def next_threshold(state):
    """One scheduling step: coarse steps above ``fine_below``, fine at or below it."""
    step = state.coarse_step if state.tau > state.fine_below + 1e-9 else state.fine_step
    # round to micrometres so repeated subtraction lands on the printed grid
    return max(state.tau_floor, round(state.tau - step, 6))


def scheduler_step(state, episode_success=None, eval_success_rate=None, history_len=100):
    """Pure update of the curriculum state.

    Consecutive mode consumes per-episode success flags; success-rate mode
    consumes evaluation success rates.
    """
    if state.mode == "consecutive":
        if episode_success is None:
            return state
        history = (state.history + (bool(episode_success),))[-history_len:]
        if not episode_success:
            return replace(state, consecutive_successes=0, history=history)
        count = state.consecutive_successes + 1
        if count >= state.trigger_count:
            return replace(state, tau=next_threshold(state), consecutive_successes=0, history=history)
        return replace(state, consecutive_successes=count, history=history)
    if eval_success_rate is None:
        return state
    if eval_success_rate >= state.rate_trigger:
        return replace(state, tau=next_threshold(state))
    return state


class ThresholdScheduler:
    """Stateful wrapper used by the training loop."""

    def __init__(self, state=None, **kw):
        self.state = state or CurriculumState(**kw)
        self.trace = [self.state.tau]

    @property
    def tau(self):
        return self.state.tau

    def _record(self):
        if self.state.tau != self.trace[-1]:
            self.trace.append(self.state.tau)
        return self.state.tau

    def __call__(self, episode_success):
        self.state = scheduler_step(self.state, episode_success=episode_success)
        return self._record()

    def on_evaluation(self, success_rate):
        self.state = scheduler_step(self.state, eval_success_rate=success_rate)
        return self._record()


class StageError(ValueError):
    pass


def stage_transition(agent, env, from_stage, to_stage):
    """Swap the active action space of agent and env; parameters and buffer stay."""
    a, b = canonical_stage(from_stage), canonical_stage(to_stage)
    if STAGE_ORDER[b] < STAGE_ORDER[a]:
        raise StageError(f"stages only move forward (A1 -> A2' -> A3), got {a} -> {b}")
    space = builtin_action_space(b)
    agent.set_action_space(space)
    if env is not None:
        env.action_space = space
    return agent


@dataclass
class EvalReport:
    success_rate: dict
    average_distance: float
    episode_count: int
    scatter: list = field(default_factory=list)
    extraction_failures: int = 0

    def rate(self, threshold):
        return self.success_rate[_key(threshold)]

    def to_dict(self):
        return {"episode_count": self.episode_count,
                "average_distance": self.average_distance,
                "success_rate": dict(self.success_rate),
                "extraction_failures": self.extraction_failures,
                "scatter": [[x, y, None if math.isnan(d) else d] for x, y, d in self.scatter]}

    @classmethod
    def from_dict(cls, d):
        scatter = [(x, y, math.nan if dist is None else dist) for x, y, dist in d["scatter"]]
        return cls(dict(d["success_rate"]), d["average_distance"], d["episode_count"],
                   scatter, d.get("extraction_failures", 0))

    def __eq__(self, other):
        if not isinstance(other, EvalReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _key(threshold):
    return f"{float(threshold):.2f}"


def build_report(targets, distances, thresholds=EVAL_THRESHOLDS, extraction_failures=0):
    """Summarise per-episode (target, distance) pairs; NaN distance = failed episode."""
    d = np.asarray(distances, dtype=np.float64)
    n = d.size
    valid = ~np.isnan(d)
    rates = {_key(t): float(np.sum(d[valid] < t) / n) if n else 0.0 for t in thresholds}
    avg = float(np.mean(d[valid])) if np.any(valid) else math.nan
    scatter = [(float(p[0]), float(p[1]), float(x)) for p, x in zip(targets, d)]
    return EvalReport(rates, avg, int(n), scatter, int(extraction_failures))


def evaluate_policy(agent, env, n_episodes, thresholds=EVAL_THRESHOLDS, target_estimator=None):
    """Noise-free evaluation on freshly sampled targets.

    ``target_estimator(env, obs)`` may replace the target the agent sees
    (used by the image pipeline); returning ``None`` marks a failed
    extraction, which counts as a miss and is excluded from the average.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    targets, distances, failures = [], [], 0
    for _ in range(n_episodes):
        obs = env.reset()
        seen = obs
        if target_estimator is not None:
            est = target_estimator(env, obs)
            if est is None:
                failures += 1
                targets.append(obs.target_position)
                distances.append(math.nan)
                env.done = True
                continue
            seen = obs.with_target(est)
        action = agent.act(seen, "eval")
        _, _, _, info = env.step(action)
        targets.append(obs.target_position)
        distances.append(info["distance"])
    return build_report(targets, distances, thresholds, failures)


# -- export -------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def table_row(report, algorithm, stage, reward_kind, her, training_length):
    row = {"algorithm": algorithm, "joints": STAGE_JOINTS[canonical_stage(stage)],
           "reward_type": str(getattr(reward_kind, "value", reward_kind)),
           "her": "yes" if her else "no", "average_distance": report.average_distance}
    for key, rate in report.success_rate.items():
        row[f"success_{key}"] = rate
    row["training_length"] = training_length
    return row


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def export_report(report, out_dir, prefix="eval", row_info=None):
    """Write ``<prefix>_scatter.csv``, ``<prefix>_summary.json`` and optionally
    ``<prefix>_table.csv`` (when ``row_info`` carries algorithm/stage/... fields).
    Returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    paths["scatter"] = os.path.join(out_dir, f"{prefix}_scatter.csv")
    write_csv(paths["scatter"], ["target_x", "target_y", "distance"], report.scatter)
    paths["summary"] = os.path.join(out_dir, f"{prefix}_summary.json")
    with open(paths["summary"], "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if row_info is not None:
        row = table_row(report, **row_info)
        paths["table"] = os.path.join(out_dir, f"{prefix}_table.csv")
        write_csv(paths["table"], list(row), [list(row.values())])
    return paths


def load_summary(path):
    with open(path, encoding="utf-8") as fh:
        return EvalReport.from_dict(json.load(fh))
