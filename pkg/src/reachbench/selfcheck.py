"""Independent oracles and the bundled self-check.

The oracles deliberately avoid the code paths they check: forward kinematics
is recomputed with 4x4 homogeneous matrices built from unit quaternions, the
reward with a plain branch, and the squashed-Gaussian density by complex-step
differentiating the squashing map.
"""
from dataclasses import dataclass, field
import math
import time

import numpy as np

from . import kinematics, nn
from .agents.buffer import Transition
from .agents.her import her_relabel
from .agents.sac import squashed_gaussian
from .environment import ACT_DIM, RewardKind, compute_reward


def _quat_matrix(axis, angle):
    w = math.cos(angle / 2.0)
    s = math.sin(angle / 2.0)
    x, y, z = (s * a for a in axis)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def _homogeneous(rot=None, trans=None):
    T = np.eye(4)
    if rot is not None:
        T[:3, :3] = rot
    if trans is not None:
        T[:3, 3] = trans
    return T


def fk_oracle(chain, q):
    """End-effector position via a product of homogeneous transforms."""
    T = np.array(chain.base_pose, dtype=np.float64)
    for axis, t, angle in zip(chain.axes, chain.translations, q):
        T = T @ _homogeneous(_quat_matrix(axis, float(angle))) @ _homogeneous(trans=t)
    return (T @ np.append(chain.ee_offset, 1.0))[:3]


def reward_oracle(d, tau, kind):
    if d < tau:
        return 1.0
    return 0.0 if str(getattr(kind, "value", kind)) == "sparse" else -d


def squash_logprob_oracle(mean, log_std, xi, center, half_range, h=1e-20):
    """Gaussian log-density minus log |da/du|.

    The derivative of the squashing map is taken by complex step, which has
    no cancellation error even deep in the saturated tails.
    """
    std = math.exp(log_std)
    u = mean + std * xi
    gauss = -0.5 * xi * xi - log_std - 0.5 * math.log(2 * math.pi)
    jac = (center + half_range * np.tanh(complex(u, h))).imag / h
    return gauss - math.log(jac)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass
class SelfCheckReport:
    results: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    def lines(self):
        return [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<16} {r.detail}  ({r.seconds:.1f}s)"
                for r in self.results]


def check_gradients(backward=None):
    rep = nn.gradient_check(backward=backward)
    return rep.passed, f"max relative error {rep.max_rel_error:.2e} over {len(rep.cases)} cases"


def check_fk(n=1000, seed=0, tol=1e-9):
    chain = kinematics.default_chain()
    rng = np.random.default_rng(seed)
    q = rng.uniform(-math.pi, math.pi, size=(n, ACT_DIM))
    fast = kinematics.forward_kinematics(chain, q)
    worst = max(float(np.max(np.abs(fast[i] - fk_oracle(chain, q[i])))) for i in range(n))
    return worst <= tol, f"max deviation {worst:.1e} m over {n} configurations"


def check_reward(n=10000, seed=0):
    rng = np.random.default_rng(seed)
    bad = 0
    for i in range(n):
        tau = float(rng.choice([0.03, 0.05, 0.07, 0.10, 0.15, 0.20]))
        d = tau if i % 10 == 0 else float(rng.uniform(0.0, 1.5))
        kind = RewardKind.SPARSE if i % 2 else RewardKind.DENSE
        bad += compute_reward(d, tau, kind) != reward_oracle(d, tau, kind)
    return bad == 0, f"{bad} mismatches over {n} pairs"


def check_squashed_gaussian(n=2000, seed=0, tol=1e-6):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        mean, xi = rng.normal(0, 1.5), rng.normal()
        log_std = rng.uniform(-3, 1)
        lo = rng.uniform(-3, 0)
        hi = lo + rng.uniform(0.1, 4)
        c, hr = 0.5 * (lo + hi), 0.5 * (hi - lo)
        cv = np.zeros(ACT_DIM)
        hv = np.zeros(ACT_DIM)
        cv[0], hv[0] = c, hr
        mv = np.zeros(ACT_DIM)
        lv = np.zeros(ACT_DIM)
        xv = np.zeros(ACT_DIM)
        mv[0], lv[0], xv[0] = mean, log_std, xi
        _, logp, _ = squashed_gaussian(mv, lv, xv, cv, hv)
        worst = max(worst, abs(float(logp) - squash_logprob_oracle(mean, log_std, xi, c, hr)))
    return worst <= tol, f"max log-density deviation {worst:.1e}"


def check_her(n=10000, seed=0):
    table = kinematics.default_table()
    chain = kinematics.default_chain()
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        q = rng.uniform(-math.pi, math.pi, ACT_DIM)
        ee = kinematics.forward_kinematics(chain, q)
        target = kinematics.sample_target(table, rng)
        tau = float(rng.uniform(0.03, 0.2))
        obs = np.concatenate([kinematics.forward_kinematics(chain, np.zeros(ACT_DIM)), target,
                              np.zeros(ACT_DIM)])
        nxt = np.concatenate([ee, target, q])
        d = float(np.linalg.norm(ee - target))
        t = Transition.from_step(obs, q, compute_reward(d, tau, "sparse"), nxt, True)
        relabelled = her_relabel([t], "final", tau, "sparse")[1:]
        bad += sum(r.reward != 1 for r in relabelled)
    return bad == 0, f"{bad} relabelled transitions without reward 1 over {n} episodes"


def check_framing(n=20000, seed=0):
    from .service import fuzz_decoder
    crashes = fuzz_decoder(n, seed)
    return not crashes, f"{len(crashes)} untyped failures over {n} fuzz cases"


CHECKS = (("gradients", check_gradients), ("fk-oracle", check_fk), ("reward-oracle", check_reward),
          ("squash-density", check_squashed_gaussian), ("her-final", check_her),
          ("framing-fuzz", check_framing))


def run_selfcheck(overrides=None):
    """Run every check; ``overrides`` maps check names to replacement callables."""
    overrides = overrides or {}
    report = SelfCheckReport()
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = overrides.get(name, fn)()
        except Exception as exc:
            ok, detail = False, f"raised {exc!r}"
        report.results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return report
