"""Small multilayer perceptrons with hand-written backpropagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


def _act(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_grad(kind: str, z: np.ndarray, out: np.ndarray, g: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return g * (out > 0)
    if kind == "tanh":
        # sech^2 from the pre-activation: 1 - out**2 rounds to exactly zero once
        # |z| > 9 in float32, which freezes a saturated actor for good
        e = np.exp(-2.0 * np.abs(z))
        out = g * (4.0 * e / (1.0 + e) ** 2)
        # anything this small is far below Adam's epsilon and would turn subnormal
        # further down the backward pass, which slows every matmul by orders of magnitude
        out[np.abs(out) < np.sqrt(np.finfo(out.dtype).tiny)] = 0
        return out
    return g


def _column_sum(g: np.ndarray) -> np.ndarray:
    # BLAS reduction is several times faster than ndarray.sum(axis=0) here
    return np.ones(g.shape[0], dtype=g.dtype) @ g


@dataclass
class Layer:
    w: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)
    activation: str


class Mlp:
    """Dense feed-forward network operating on row batches."""

    def __init__(self, layers: list[Layer]):
        for prev, nxt in zip(layers, layers[1:]):
            if prev.w.shape[1] != nxt.w.shape[0]:
                raise ValueError("layer shapes do not chain")
        for layer in layers:
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {layer.activation!r}")
        self.layers = layers

    @classmethod
    def init(cls, sizes, activations, rng: np.random.Generator, dtype=np.float32,
             final_scale: float | None = None) -> "Mlp":
        """Uniform +-1/sqrt(fan_in) weights; the last layer uses ``final_scale`` if given."""
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            limit = 1.0 / np.sqrt(fan_in)
            if final_scale is not None and i == len(sizes) - 2:
                limit = final_scale
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
            b = rng.uniform(-limit, limit, size=fan_out).astype(dtype)
            layers.append(Layer(w, b, activations[i]))
        return cls(layers)

    @property
    def in_width(self) -> int:
        return self.layers[0].w.shape[0]

    @property
    def out_width(self) -> int:
        return self.layers[-1].w.shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.w, layer.b]
        return out

    def named_params(self, prefix: str) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            out += [(f"{prefix}.{i}.w", layer.w), (f"{prefix}.{i}.b", layer.b)]
        return out

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.w.copy(), l.b.copy(), l.activation) for l in self.layers])

    def forward(self, x: np.ndarray, keep: bool = False):
        cache = []
        h = x
        for layer in self.layers:
            if layer.w.shape[0] == 1:
                # outer product; avoids the slow K=1 matmul path
                z = h * layer.w[0] + layer.b
            else:
                z = h @ layer.w + layer.b
            out = _act(layer.activation, z)
            if keep:
                cache.append((h, z, out))
            h = out
        return (h, cache) if keep else h

    def backward(self, cache, grad_out: np.ndarray, need_input: bool = False,
                 need_params: bool = True):
        """Gradients for every parameter (same order as ``params``) and optionally the input."""
        grads = [None] * (2 * len(self.layers))
        g = grad_out
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            h, z, out = cache[i]
            g = _act_grad(layer.activation, z, out, g)
            if need_params:
                grads[2 * i] = h.T @ g
                grads[2 * i + 1] = _column_sum(g)
            if i > 0 or need_input:
                if layer.w.shape[1] == 1:
                    g = g * layer.w[:, 0]
                else:
                    g = g @ layer.w.T
        return grads, (g if need_input else None)


class Actor:
    """Deterministic policy in [-1, 1]; callers scale by the actuator limit."""

    def __init__(self, net: Mlp):
        if net.layers[-1].activation != "tanh":
            raise ValueError("actor output layer must be tanh")
        self.net = net

    @classmethod
    def init(cls, obs_width, hidden, rng, dtype=np.float32) -> "Actor":
        sizes = [obs_width, *hidden, 1]
        acts = ["relu"] * len(hidden) + ["tanh"]
        return cls(Mlp.init(sizes, acts, rng, dtype, final_scale=3e-3))

    def params(self):
        return self.net.params()

    def named_params(self):
        return self.net.named_params("actor")

    def copy(self):
        return Actor(self.net.copy())

    def __call__(self, obs):
        return self.net.forward(obs)


class Critic:
    """Q(s, a): separate state and action branches merged into a joint trunk."""

    def __init__(self, state_branch: Mlp, action_branch: Mlp, joint: Mlp):
        if state_branch.out_width + action_branch.out_width != joint.in_width:
            raise ValueError("branch widths do not match the joint input")
        self.state_branch = state_branch
        self.action_branch = action_branch
        self.joint = joint

    @classmethod
    def init(cls, obs_width, state_hidden, action_hidden, joint_hidden, rng,
             dtype=np.float32) -> "Critic":
        sb = Mlp.init([obs_width, *state_hidden], ["relu"] * len(state_hidden), rng, dtype)
        ab = Mlp.init([1, *action_hidden], ["relu"] * len(action_hidden), rng, dtype)
        joint_sizes = [state_hidden[-1] + action_hidden[-1], *joint_hidden, 1]
        jn = Mlp.init(joint_sizes, ["relu"] * len(joint_hidden) + ["linear"], rng, dtype)
        return cls(sb, ab, jn)

    def parts(self):
        return (self.state_branch, self.action_branch, self.joint)

    def params(self):
        return [p for part in self.parts() for p in part.params()]

    def named_params(self):
        return (self.state_branch.named_params("critic.state")
                + self.action_branch.named_params("critic.action")
                + self.joint.named_params("critic.joint"))

    def copy(self):
        return Critic(*(p.copy() for p in self.parts()))

    def forward(self, obs, action, keep: bool = False):
        if keep:
            hs, cs = self.state_branch.forward(obs, keep=True)
            ha, ca = self.action_branch.forward(action, keep=True)
            q, cj = self.joint.forward(np.concatenate([hs, ha], axis=1), keep=True)
            return q, (cs, ca, cj, hs.shape[1])
        hs = self.state_branch.forward(obs)
        ha = self.action_branch.forward(action)
        return self.joint.forward(np.concatenate([hs, ha], axis=1))

    def __call__(self, obs, action):
        return self.forward(obs, action)

    def backward(self, cache, grad_q, need_action: bool = False, need_params: bool = True):
        """Parameter gradients (``params`` order) and optionally dQ/d(action)."""
        cs, ca, cj, split = cache
        gj, gin = self.joint.backward(cj, grad_q, need_input=True, need_params=need_params)
        gs = []
        if need_params:
            gs, _ = self.state_branch.backward(cs, gin[:, :split])
        ga, g_action = self.action_branch.backward(ca, gin[:, split:], need_input=need_action,
                                                   need_params=need_params)
        if not need_params:
            return [], g_action
        return gs + ga + gj, g_action
