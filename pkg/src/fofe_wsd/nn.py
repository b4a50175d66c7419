"""Minimal fully-connected network kernel: forward, loss, exact backprop,
optimizer step, finite-difference gradient verification.

All arithmetic is float64. Hidden layers apply an affine map followed by a
rectifier max(0, x); the final layer is affine only and produces logits.
Inputs may be a single vector ``(d,)`` or a batch ``(n, d)``; batch losses
and gradients are means over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class NetworkParams:
    """Embedding matrix plus the ordered (weight, bias) stack.

    Weights have shape (fan_in, fan_out); the forward pass is ``x @ W + b``.
    ``embedding`` may be empty for networks that take raw input vectors.
    """

    embedding: np.ndarray
    layers: list[tuple[np.ndarray, np.ndarray]]

    @property
    def layer_dims(self) -> list[int]:
        if not self.layers:
            return []
        return [self.layers[0][0].shape[0]] + [w.shape[1] for w, _ in self.layers]


@dataclass
class ForwardTrace:
    """Per-layer pre-activations and activations of one forward pass.

    ``activations[0]`` is the input, ``activations[-1]`` the logits; the
    held-out layer is the activation of the second-last layer.
    """

    activations: list[np.ndarray]
    preacts: list[np.ndarray]

    @property
    def logits(self) -> np.ndarray:
        return self.activations[-1]

    @property
    def held_out(self) -> np.ndarray:
        return self.activations[-2]


@dataclass
class Gradients:
    """Loss gradients mirroring NetworkParams, plus the input gradient."""

    embedding: np.ndarray | None
    layers: list[tuple[np.ndarray, np.ndarray]]
    input: np.ndarray


def init_network(
    layer_dims: list[int], seed: int | np.random.SeedSequence, embed_shape: tuple[int, int] | None = None
) -> NetworkParams:
    """Deterministically initialize parameters.

    Weights are uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero,
    embedding rows uniform in +-0.05. The embedding is drawn first, then the
    layers in order, from one seeded generator.
    """
    if len(layer_dims) < 2:
        raise ValueError("need at least input and output dimensions")
    if any(d < 1 for d in layer_dims):
        raise ValueError(f"layer dimensions must be >= 1, got {layer_dims}")
    rng = np.random.default_rng(seed)
    if embed_shape is None:
        embedding = np.zeros((0, 0))
    else:
        embedding = rng.uniform(-0.05, 0.05, size=embed_shape)
    layers = []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        layers.append((w, b))
    return NetworkParams(embedding=embedding, layers=layers)


def forward(params: NetworkParams, x: np.ndarray) -> ForwardTrace:
    """Affine + rectifier through the hidden layers, affine logits at the end."""
    x = np.asarray(x, dtype=np.float64)
    if params.layers:
        fan_in = params.layers[0][0].shape[0]
        if x.shape[-1] != fan_in:
            raise ValueError(f"input dimension {x.shape[-1]} does not match first layer ({fan_in})")
    activations = [x]
    preacts = []
    a = x
    last = len(params.layers) - 1
    for li, (w, b) in enumerate(params.layers):
        h = a @ w + b
        preacts.append(h)
        a = h if li == last else np.maximum(h, 0.0)
        activations.append(a)
    return ForwardTrace(activations=activations, preacts=preacts)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def loss_softmax_xent(logits: np.ndarray, target: int | np.ndarray) -> float:
    """-log softmax(logits)[target], via max-shifted log-sum-exp.

    For a batch of logits with a vector of targets, returns the mean.
    """
    logits = np.asarray(logits, dtype=np.float64)
    shift = np.max(logits, axis=-1, keepdims=True)
    lse = shift[..., 0] + np.log(np.sum(np.exp(logits - shift), axis=-1))
    if logits.ndim == 1:
        t = int(target)
        if not 0 <= t < logits.shape[0]:
            raise ValueError(f"target {t} out of range for {logits.shape[0]} logits")
        return float(lse - logits[t])
    targets = np.asarray(target, dtype=np.intp)
    if targets.shape != logits.shape[:-1]:
        raise ValueError(f"targets shape {targets.shape} does not match logits {logits.shape}")
    if np.any(targets < 0) or np.any(targets >= logits.shape[-1]):
        raise ValueError("target out of range")
    picked = np.take_along_axis(logits, targets[..., None], axis=-1)[..., 0]
    return float(np.mean(lse - picked))


def backward(params: NetworkParams, trace: ForwardTrace, target: int | np.ndarray) -> Gradients:
    """Exact gradients of ``loss_softmax_xent`` for every layer and the input.

    The embedding slot is returned zeroed (same shape as the parameter);
    callers that built the input from embedding rows propagate
    ``Gradients.input`` through that linear map themselves.
    """
    logits = trace.logits
    single = logits.ndim == 1
    logits2 = logits[None, :] if single else logits
    targets = np.atleast_1d(np.asarray(target, dtype=np.intp))
    n = logits2.shape[0]
    if targets.shape != (n,):
        raise ValueError(f"targets shape {targets.shape} does not match batch of {n}")

    delta = softmax(logits2)
    delta[np.arange(n), targets] -= 1.0
    delta /= n

    layer_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.layers)  # type: ignore[list-item]
    for li in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[li]
        a_prev = trace.activations[li]
        if a_prev.shape[-1] != w.shape[0]:
            raise ValueError("trace does not match parameters (dimension mismatch)")
        a_prev2 = a_prev[None, :] if single else a_prev
        layer_grads[li] = (a_prev2.T @ delta, delta.sum(axis=0))
        delta = delta @ w.T
        if li > 0:
            pre = trace.preacts[li - 1]
            pre2 = pre[None, :] if single else pre
            delta = delta * (pre2 > 0.0)
    input_grad = delta[0] if single else delta
    embed_grad = np.zeros_like(params.embedding) if params.embedding.size else None
    return Gradients(embedding=embed_grad, layers=layer_grads, input=input_grad)


@dataclass
class OptimizerState:
    """Step rule plus per-parameter moment accumulators for the adaptive rule."""

    rule: str = "adam"  # "adam" or "sgd"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict | None = field(default=None, repr=False)
    v: dict | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.rule not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer rule {self.rule!r}")


def _zero_like_params(params: NetworkParams) -> dict:
    return {
        "embedding": np.zeros_like(params.embedding),
        "layers": [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers],
    }


def apply_update(params: NetworkParams, grads: Gradients, state: OptimizerState) -> None:
    """Apply one optimizer step in place. Must not run concurrently."""
    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    if grads.embedding is not None:
        if grads.embedding.shape != params.embedding.shape:
            raise ValueError("embedding gradient shape mismatch")
        pairs.append((params.embedding, grads.embedding))
    for (w, b), (gw, gb) in zip(params.layers, grads.layers):
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ValueError("layer gradient shape mismatch")
        pairs.append((w, gw))
        pairs.append((b, gb))

    if state.rule == "sgd":
        state.step += 1
        for p, g in pairs:
            p -= state.learning_rate * g
        return

    if state.m is None:
        state.m = _zero_like_params(params)
        state.v = _zero_like_params(params)
    moments: list[tuple[np.ndarray, np.ndarray]] = []
    if grads.embedding is not None:
        moments.append((state.m["embedding"], state.v["embedding"]))
    for (mw, mb), (vw, vb) in zip(state.m["layers"], state.v["layers"]):
        moments.append((mw, vw))
        moments.append((mb, vb))

    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for (p, g), (m, v) in zip(pairs, moments):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)


def gradient_check(
    params: NetworkParams, x: np.ndarray, target: int | np.ndarray, epsilon: float = 1e-5
) -> float:
    """Max relative error between backprop and central finite differences.

    Perturbs every layer weight and bias by +-epsilon; the error for one
    entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    analytic = backward(params, forward(params, x), target)

    def numeric(arr: np.ndarray, idx: tuple) -> float:
        orig = arr[idx]
        arr[idx] = orig + epsilon
        plus = loss_softmax_xent(forward(params, x).logits, target)
        arr[idx] = orig - epsilon
        minus = loss_softmax_xent(forward(params, x).logits, target)
        arr[idx] = orig
        return (plus - minus) / (2.0 * epsilon)

    worst = 0.0
    for (w, b), (gw, gb) in zip(params.layers, analytic.layers):
        for arr, grad in ((w, gw), (b, gb)):
            for idx in np.ndindex(arr.shape):
                n = numeric(arr, idx)
                a = grad[idx]
                rel = abs(a - n) / max(abs(a), abs(n), 1e-12)
                worst = max(worst, rel)
    return worst
