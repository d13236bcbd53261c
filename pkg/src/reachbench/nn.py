"""Small float64 MLP stack with hand-written backprop and Adam.

All parameters of a network live in one flat array; per-layer weight and
bias arrays are views into it. Adam and soft target updates therefore run
over a single contiguous buffer.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels

HEADS = ("linear", "tanh", "gaussian")
LOG_STD_BOUNDS = (-20.0, 2.0)


class StaleCacheError(RuntimeError):
    pass


class MLP:
    """ReLU MLP with a linear, tanh-scaled or mean/log-std output head.

    ``sizes`` lists layer widths from input to output. For the ``gaussian``
    head the last width is the action dimension and the final layer emits
    twice that: means followed by log-stds (clamped to ``log_std_bounds``).
    For the ``tanh`` head the output is ``center + scale * tanh(z)``.
    """

    def __init__(self, sizes, head="linear", log_std_bounds=LOG_STD_BOUNDS):
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"invalid layer sizes {sizes}")
        self.sizes = sizes
        self.head = head
        self.log_std_bounds = tuple(float(b) for b in log_std_bounds)
        out = sizes[-1]
        self.shapes = [(a, b) for a, b in zip(sizes[:-2], sizes[1:-1])]
        self.shapes.append((sizes[-2], 2 * out if head == "gaussian" else out))
        self.flat = np.zeros(sum(i * o + o for i, o in self.shapes))
        self.weights, self.biases = self._views(self.flat)
        self.center = np.zeros(out)
        self.scale = np.ones(out)
        self.version = 0

    def _views(self, buf):
        ws, bs, pos = [], [], 0
        for i, o in self.shapes:
            ws.append(buf[pos:pos + i * o].reshape(i, o))
            pos += i * o
            bs.append(buf[pos:pos + o])
            pos += o
        return ws, bs

    @property
    def n_params(self):
        return self.flat.size

    @property
    def in_dim(self):
        return self.sizes[0]

    @property
    def out_dim(self):
        return self.sizes[-1]

    def set_bounds(self, low, high):
        """Configure the tanh head to map onto ``[low, high]``."""
        low = np.asarray(low, dtype=np.float64)
        high = np.asarray(high, dtype=np.float64)
        self.center = 0.5 * (low + high)
        self.scale = 0.5 * (high - low)

    def copy(self):
        other = MLP(self.sizes, self.head, self.log_std_bounds)
        other.flat[:] = self.flat
        other.center = self.center.copy()
        other.scale = self.scale.copy()
        return other

    def touch(self):
        """Mark parameters as modified; outstanding caches become stale."""
        self.version += 1

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.in_dim:
            raise ValueError(f"expected input width {self.in_dim}, got {h.shape[1]}")
        inputs, pre = [], []
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ W + b
            pre.append(z)
            h = np.maximum(z, 0.0) if k < last else z
        z = h
        if self.head == "tanh":
            t = np.tanh(z)
            out = self.center + self.scale * t
            extra = t
        elif self.head == "gaussian":
            d = self.out_dim
            lo, hi = self.log_std_bounds
            log_std = np.clip(z[:, d:], lo, hi)
            out = np.concatenate([z[:, :d], log_std], axis=1)
            extra = (z[:, d:] >= lo) & (z[:, d:] <= hi)
        else:
            out = z
            extra = None
        cache = {"inputs": inputs, "pre": pre, "extra": extra, "version": self.version,
                 "single": single}
        return (out[0] if single else out), cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, dout):
        """Gradients of ``sum(dout * output)``: returns ``(flat_grad, d_input)``."""
        if cache["version"] != self.version:
            raise StaleCacheError("parameters changed since the forward pass")
        g = np.asarray(dout, dtype=np.float64)
        if cache["single"]:
            g = g[None, :]
        if self.head == "tanh":
            g = g * self.scale * (1.0 - cache["extra"] ** 2)
        elif self.head == "gaussian":
            d = self.out_dim
            g = np.concatenate([g[:, :d], g[:, d:] * cache["extra"]], axis=1)
        grad = np.empty_like(self.flat)
        gws, gbs = self._views(grad)
        for k in range(len(self.weights) - 1, -1, -1):
            if k < len(self.weights) - 1:
                g = g * (cache["pre"][k] > 0.0)
            gws[k][...] = cache["inputs"][k].T @ g
            gbs[k][...] = g.sum(axis=0)
            g = g @ self.weights[k].T
        return grad, (g[0] if cache["single"] else g)

    def state_dict(self):
        return {"flat": self.flat.copy(), "center": self.center.copy(), "scale": self.scale.copy()}

    def load_state_dict(self, state):
        if state["flat"].shape != self.flat.shape:
            raise ValueError("parameter shape mismatch")
        self.flat[:] = state["flat"]
        self.center = np.array(state["center"], dtype=np.float64)
        self.scale = np.array(state["scale"], dtype=np.float64)
        self.touch()


def he_init(sizes, rng, head="linear", log_std_bounds=LOG_STD_BOUNDS):
    """New MLP with weights drawn from N(0, 2 / fan_in) and zero biases."""
    net = MLP(sizes, head, log_std_bounds)
    for W in net.weights:
        W[...] = rng.normal(0.0, np.sqrt(2.0 / W.shape[0]), size=W.shape)
    return net


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def for_network(cls, net, lr=1e-3, **kw):
        return cls(np.zeros_like(net.flat), np.zeros_like(net.flat), lr=lr, **kw)


def adam_step(net, grad, state):
    """Bias-corrected Adam update of ``net`` in place."""
    if grad.shape != net.flat.shape:
        raise ValueError("gradient shape mismatch")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    kernels.adam_update(net.flat, np.ascontiguousarray(grad), state.m, state.v,
                        state.lr, state.beta1, state.beta2, state.eps, bc1, bc2)
    net.touch()


def soft_update(target, online, rho):
    """target <- rho * online + (1 - rho) * target."""
    if target.flat.shape != online.flat.shape:
        raise ValueError("network shape mismatch")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if rho == 1.0:
        target.flat[:] = online.flat
    elif rho > 0.0:
        target.flat *= 1.0 - rho
        target.flat += rho * online.flat
    target.touch()


def _relative_error(a, b, floor=1e-6):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    cases: list = field(default_factory=list)

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance


def numerical_gradient(net, x, direction, h=1e-5):
    """Central finite differences of ``sum(direction * net(x))`` per parameter."""
    grad = np.empty_like(net.flat)
    for i in range(net.flat.size):
        orig = net.flat[i]
        net.flat[i] = orig + h
        up = np.sum(direction * net(x))
        net.flat[i] = orig - h
        down = np.sum(direction * net(x))
        net.flat[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    net.touch()
    return grad


def gradient_check(seeds=range(10), heads=HEADS, sizes=(5, 8, 7, 3), batch=4,
                   tolerance=1e-4, h=1e-5, backward=None):
    """Compare backprop against central differences on random networks.

    Relative error is ``|a - f| / max(|a|, |f|, 1e-6)`` per parameter and per
    input entry. ``backward`` can replace :meth:`MLP.backward` to check a
    deliberately broken implementation.
    """
    worst, cases = 0.0, []
    for seed in seeds:
        for head in heads:
            rng = np.random.default_rng(seed)
            net = he_init(sizes, rng, head=head)
            for b in net.biases:
                b[...] = rng.normal(0.0, 0.1, size=b.shape)
            if head == "tanh":
                net.set_bounds(-rng.uniform(0.5, 2.0, sizes[-1]), rng.uniform(0.5, 2.0, sizes[-1]))
            x = rng.normal(size=(batch, sizes[0]))
            out, cache = net.forward(x)
            direction = rng.normal(size=out.shape)
            bwd = backward or MLP.backward
            analytic, dx = bwd(net, cache, direction)
            numeric = numerical_gradient(net, x, direction, h)
            num_dx = np.empty_like(x)
            for idx in np.ndindex(x.shape):
                xp, xm = x.copy(), x.copy()
                xp[idx] += h
                xm[idx] -= h
                num_dx[idx] = (np.sum(direction * net(xp)) - np.sum(direction * net(xm))) / (2 * h)
            err = max(_relative_error(analytic, numeric).max(), _relative_error(dx, num_dx).max())
            cases.append({"seed": int(seed), "head": head, "max_rel_error": float(err)})
            worst = max(worst, float(err))
    return GradCheckReport(worst, tolerance, cases)
