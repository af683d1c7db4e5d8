"""Small MLP with residual skips, reverse-mode gradients, and Adam.

One network implementation is shared by the radiance-distribution student,
the point-query teacher, and the direct-RGB baseline; only the output head
interpretation differs.  Hidden layers are ReLU, the output layer is
linear.  A residual add is applied after each hidden layer whose input and
output widths match ("skip connections between neighboring layers").

Parameters are treated as read-only during forward/backward so concurrent
evaluation on shared weights is safe; `adam_step` is the single writer.

Forward evaluations are counted by row in `FORWARD_COUNTER` so tests can
assert how many network evaluations a rendering path really used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InputError, StructuralError


class ForwardCounter:
    """Counts network evaluations: one unit per input row forwarded."""

    def __init__(self):
        self.rows = 0
        self.calls = 0

    def reset(self):
        self.rows = 0
        self.calls = 0

    def add(self, rows: int):
        self.rows += rows
        self.calls += 1


FORWARD_COUNTER = ForwardCounter()


@dataclass
class MLPParams:
    weights: list  # [(fan_in, fan_out) arrays]
    biases: list  # [(fan_out,) arrays]
    skips: tuple  # residual-add flag per hidden layer

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise StructuralError("weights and biases must pair up")
        if len(self.skips) != len(self.weights) - 1:
            raise StructuralError("need one skip flag per hidden layer")
        for i in range(len(self.weights) - 1):
            if self.weights[i].shape[1] != self.weights[i + 1].shape[0]:
                raise StructuralError(f"layer {i} output dim != layer {i + 1} input dim")
            if self.skips[i] and self.weights[i].shape[0] != self.weights[i].shape[1]:
                raise StructuralError(f"residual add at layer {i} needs matching widths")
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != b.shape[0]:
                raise StructuralError("bias width does not match layer width")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InputError("parameters must be finite")

    @property
    def widths(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def input_dim(self):
        return self.weights[0].shape[0]

    @property
    def output_dim(self):
        return self.weights[-1].shape[1]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self):
        return MLPParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.skips)

    def astype(self, dtype):
        return MLPParams(
            [w.astype(dtype) for w in self.weights], [b.astype(dtype) for b in self.biases], self.skips
        )


@dataclass
class Tape:
    """Activations recorded by one forward pass; single use per backward."""

    xs: list  # input to each layer
    zs: list  # pre-activations of hidden layers
    consumed: bool = False


@dataclass
class MLPGrads:
    weights: list
    biases: list

    def max_abs(self):
        return max(max(np.abs(w).max() for w in self.weights), max(np.abs(b).max() for b in self.biases))


def init_mlp(sizes, rng: np.random.Generator, skips="auto", dtype=np.float32, sigma_dc_bias=None) -> MLPParams:
    """Uniform fan-in init, zero biases.

    `sigma_dc_bias`, when given, is written to output bias channel 0 (the
    opacity DC coefficient) so freshly initialized fields start near-empty.
    `skips="auto"` enables the residual add on every hidden layer whose
    widths allow it.
    """
    n_layers = len(sizes) - 1
    if skips == "auto":
        skips = tuple(sizes[i] == sizes[i + 1] for i in range(n_layers - 1))
    weights, biases = [], []
    for i in range(n_layers):
        bound = 1.0 / np.sqrt(sizes[i])
        weights.append(rng.uniform(-bound, bound, size=(sizes[i], sizes[i + 1])).astype(dtype))
        biases.append(np.zeros(sizes[i + 1], dtype=dtype))
    if sigma_dc_bias is not None:
        biases[-1][0] = sigma_dc_bias
    return MLPParams(weights, biases, tuple(skips))


def mlp_forward(params: MLPParams, x: np.ndarray, record: bool = False):
    """Forward pass on (n, d) or (d,) input. Returns (output, tape or None)."""
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != params.input_dim:
        raise StructuralError(f"input dim {h.shape[1]} != network input dim {params.input_dim}")
    FORWARD_COUNTER.add(h.shape[0])
    xs, zs = ([h], []) if record else (None, None)
    n_layers = len(params.weights)
    for i in range(n_layers - 1):
        z = h @ params.weights[i] + params.biases[i]
        a = np.maximum(z, 0)
        if params.skips[i]:
            a = a + h
        if record:
            zs.append(z)
            xs.append(a)
        h = a
    y = h @ params.weights[-1] + params.biases[-1]
    tape = Tape(xs, zs) if record else None
    return (y[0] if squeeze else y), tape


def mlp_backward(params: MLPParams, tape: Tape, output_grad: np.ndarray, need_input_grad: bool = False):
    """Exact reverse-mode gradients. Returns (MLPGrads, input gradient).

    The input gradient costs one extra first-layer matmul, so it is only
    computed on request (parameter gradients are unaffected).
    """
    if tape.consumed:
        raise StructuralError("tape already consumed by a previous backward pass")
    tape.consumed = True
    squeeze = output_grad.ndim == 1
    g = output_grad[None, :] if squeeze else output_grad
    n_layers = len(params.weights)
    if len(tape.xs) != n_layers or g.shape[1] != params.output_dim:
        raise StructuralError("tape/params/grad mismatch")
    gw = [None] * n_layers
    gb = [None] * n_layers
    gw[-1] = tape.xs[-1].T @ g
    gb[-1] = g.sum(axis=0)
    dx = g @ params.weights[-1].T
    for i in range(n_layers - 2, -1, -1):
        dz = dx * (tape.zs[i] > 0)
        gw[i] = tape.xs[i].T @ dz
        gb[i] = dz.sum(axis=0)
        if i == 0 and not need_input_grad:
            dx = None
            break
        dnext = dz @ params.weights[i].T
        if params.skips[i]:
            dnext = dnext + dx
        dx = dnext
    if dx is None:
        return MLPGrads(gw, gb), None
    return MLPGrads(gw, gb), (dx[0] if squeeze else dx)


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_w: list = field(default_factory=list)
    v_w: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)


def init_adam(params: MLPParams, lr: float = 5e-4) -> AdamState:
    st = AdamState(lr=lr)
    st.m_w = [np.zeros_like(w) for w in params.weights]
    st.v_w = [np.zeros_like(w) for w in params.weights]
    st.m_b = [np.zeros_like(b) for b in params.biases]
    st.v_b = [np.zeros_like(b) for b in params.biases]
    return st


def adam_step(params: MLPParams, grads: MLPGrads, state: AdamState):
    """One Adam update with bias correction; mutates params and state."""
    for g in grads.weights + grads.biases:
        # a single reduction; any inf/nan poisons the sum
        if not np.isfinite(g.sum()):
            raise DivergenceError("non-finite gradient in optimizer step")
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for p, g, m, v in (
        list(zip(params.weights, grads.weights, state.m_w, state.v_w))
        + list(zip(params.biases, grads.biases, state.m_b, state.v_b))
    ):
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * np.square(g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
