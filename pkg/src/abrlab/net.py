"""Minimal dense feed-forward network with per-neuron telemetry.

Forward passes record every hidden pre/post-activation; backward passes
record, per sample, the gradient of the target scalar with respect to each
hidden post-activation. That second signal, taken against the sum of all
network outputs over a batch, is the loss-independent per-neuron gradient
used by the plasticity metrics.

Everything is plain float64 numpy; batches are row-major (samples in rows).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NumericalError, UsageError, ValidationError

ACTIVATIONS = ("relu", "tanh", "identity")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValidationError("layer dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )


def _apply_activation(kind: str, pre: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(pre, 0.0)
    if kind == "tanh":
        return np.tanh(pre)
    return pre


def _activation_derivative(kind: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    if kind == "relu":
        # subgradient 0 at exactly 0, so a never-positive neuron has an
        # exactly-zero Jacobian on the batch
        return (pre > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - post * post
    return np.ones_like(pre)


@dataclass
class ActivationTape:
    """Per-layer pre/post-activations for one batch, plus the batch inputs."""

    inputs: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]

    @property
    def batch_size(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def hidden_post(self) -> list[np.ndarray]:
        """Post-activations of hidden layers (all but the output layer)."""
        return self.post[:-1]


@dataclass
class GradientTape:
    """Per-parameter gradients plus per-sample hidden-neuron gradients.

    ``hidden_grads[l][n, i]`` is the derivative of the target scalar with
    respect to the post-activation of hidden neuron (l, i) on sample n.
    """

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    hidden_grads: list[np.ndarray]
    input_grad: np.ndarray

    @property
    def batch_size(self) -> int:
        return int(self.input_grad.shape[0])


class DenseNetwork:
    """Layered affine-plus-activation map with explicit parameters.

    Weight matrices are (out_dim, in_dim); row i of layer l holds the
    afferent weights of neuron (l, i), column i of layer l+1 its efferent
    weights.
    """

    def __init__(
        self,
        specs: Sequence[LayerSpec],
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        seed: int = 0,
    ) -> None:
        specs = tuple(specs)
        if not specs:
            raise ValidationError("network needs at least one layer")
        for a, b in zip(specs, specs[1:]):
            if a.out_dim != b.in_dim:
                raise ValidationError(
                    f"shape chain broken: out_dim {a.out_dim} feeds in_dim {b.in_dim}"
                )
        if len(weights) != len(specs) or len(biases) != len(specs):
            raise ValidationError("one weight matrix and bias vector per layer")
        for spec, w, bias in zip(specs, weights, biases):
            if w.shape != (spec.out_dim, spec.in_dim) or bias.shape != (spec.out_dim,):
                raise ValidationError(f"parameter shapes do not match spec {spec}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(bias))):
                raise ValidationError("parameters must be finite")
        self.specs = specs
        self.weights = weights
        self.biases = biases
        self.seed = seed

    @property
    def num_layers(self) -> int:
        return len(self.specs)

    @property
    def num_hidden_layers(self) -> int:
        return len(self.specs) - 1

    @property
    def input_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.specs[-1].out_dim

    def hidden_width(self, layer: int) -> int:
        return self.specs[layer].out_dim

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            self.specs,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            seed=self.seed,
        )

    def forward(self, batch: np.ndarray) -> tuple[np.ndarray, ActivationTape]:
        """Run the batch through every layer, taping all activations."""
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise UsageError(
                f"batch must be (n, {self.input_dim}), got {x.shape}"
            )
        pres: list[np.ndarray] = []
        posts: list[np.ndarray] = []
        h = x
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            pre = h @ w.T + b
            h = _apply_activation(spec.activation, pre)
            pres.append(pre)
            posts.append(h)
        return h, ActivationTape(inputs=x, pre=pres, post=posts)

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """Forward pass without taping (hot path for rollouts)."""
        h = batch
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            h = _apply_activation(spec.activation, h @ w.T + b)
        return h

    def backward_loss(self, tape: ActivationTape, output_grad: np.ndarray) -> GradientTape:
        """Reverse-mode pass for a scalar whose output sensitivity is ``output_grad``."""
        output_grad = np.asarray(output_grad, dtype=np.float64)
        if output_grad.shape != tape.post[-1].shape:
            raise UsageError(
                f"output_grad shape {output_grad.shape} != outputs {tape.post[-1].shape}"
            )
        n_layers = self.num_layers
        weight_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
        bias_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
        hidden_grads: list[np.ndarray] = [None] * (n_layers - 1)  # type: ignore[list-item]
        grad_post = output_grad
        for l in range(n_layers - 1, -1, -1):
            spec = self.specs[l]
            grad_pre = grad_post * _activation_derivative(
                spec.activation, tape.pre[l], tape.post[l]
            )
            layer_input = tape.inputs if l == 0 else tape.post[l - 1]
            weight_grads[l] = grad_pre.T @ layer_input
            bias_grads[l] = grad_pre.sum(axis=0)
            grad_post = grad_pre @ self.weights[l]
            if l > 0:
                hidden_grads[l - 1] = grad_post
        return GradientTape(
            weight_grads=weight_grads,
            bias_grads=bias_grads,
            hidden_grads=hidden_grads,
            input_grad=grad_post,
        )


def _init_bound(spec: LayerSpec) -> float:
    if spec.activation == "relu":
        return math.sqrt(6.0 / spec.in_dim)
    return math.sqrt(6.0 / (spec.in_dim + spec.out_dim))


def init_network(
    specs: Sequence[LayerSpec], seed: int, scheme: str = "uniform-fan"
) -> DenseNetwork:
    """Uniform fan-scaled weights, zero biases; deterministic per seed."""
    if scheme != "uniform-fan":
        raise ValidationError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for spec in specs:
        bound = _init_bound(spec)
        weights.append(rng.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim)))
        biases.append(np.zeros(spec.out_dim))
    return DenseNetwork(specs, weights, biases, seed=seed)


def aggregate_output_gradients(net: DenseNetwork, batch: np.ndarray) -> GradientTape:
    """Per-neuron gradients of the summed network outputs over the batch.

    Backward with an all-ones output sensitivity, i.e. the derivative of
    sum-over-samples-and-outputs; loss-independent by construction.
    """
    outputs, tape = net.forward(batch)
    return net.backward_loss(tape, np.ones_like(outputs))


def reinit_afferent(
    net: DenseNetwork, layer: int, neuron: int, rng: np.random.Generator
) -> None:
    """Redraw the neuron's incoming weight row from the init scheme; zero its bias."""
    _check_hidden(net, layer, neuron)
    bound = _init_bound(net.specs[layer])
    net.weights[layer][neuron, :] = rng.uniform(
        -bound, bound, size=net.specs[layer].in_dim
    )
    net.biases[layer][neuron] = 0.0


def zero_efferent(net: DenseNetwork, layer: int, neuron: int) -> None:
    """Zero the neuron's outgoing column in the next layer's weights."""
    _check_hidden(net, layer, neuron)
    net.weights[layer + 1][:, neuron] = 0.0


def _check_hidden(net: DenseNetwork, layer: int, neuron: int) -> None:
    if not (0 <= layer < net.num_hidden_layers):
        raise UsageError(
            f"layer {layer} is not a hidden layer (network has "
            f"{net.num_hidden_layers} hidden layers)"
        )
    if not (0 <= neuron < net.hidden_width(layer)):
        raise UsageError(f"neuron {neuron} outside layer {layer} width")


class AdamState:
    """Per-parameter first/second moments for one network."""

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, net: DenseNetwork) -> None:
        self.m_w = [np.zeros_like(w) for w in net.weights]
        self.v_w = [np.zeros_like(w) for w in net.weights]
        self.m_b = [np.zeros_like(b) for b in net.biases]
        self.v_b = [np.zeros_like(b) for b in net.biases]
        self.t = 0

    def zero_neuron_moments(self, layer: int, neuron: int) -> None:
        """Forget moments of a reset neuron's afferent row, bias and efferent column."""
        self.m_w[layer][neuron, :] = 0.0
        self.v_w[layer][neuron, :] = 0.0
        self.m_b[layer][neuron] = 0.0
        self.v_b[layer][neuron] = 0.0
        if layer + 1 < len(self.m_w):
            self.m_w[layer + 1][:, neuron] = 0.0
            self.v_w[layer + 1][:, neuron] = 0.0


def apply_update(
    net: DenseNetwork, grads: GradientTape, state: AdamState, lr: float
) -> None:
    """One Adam step over all parameters; rejects non-finite gradients."""
    for g in grads.weight_grads + grads.bias_grads:
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient; update rejected")
    state.t += 1
    b1, b2, eps = AdamState.BETA1, AdamState.BETA2, AdamState.EPS
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for l in range(net.num_layers):
        for params, grad, m, v in (
            (net.weights[l], grads.weight_grads[l], state.m_w[l], state.v_w[l]),
            (net.biases[l], grads.bias_grads[l], state.m_b[l], state.v_b[l]),
        ):
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * grad * grad
            params -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def clip_gradient_norm(grads: GradientTape, max_norm: float) -> float:
    """Scale all gradients so their joint 2-norm is at most ``max_norm``."""
    total = 0.0
    for g in grads.weight_grads + grads.bias_grads:
        total += float(np.sum(g * g))
    total = math.sqrt(total)
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads.weight_grads + grads.bias_grads:
            g *= scale
    return total


def save_network(net: DenseNetwork, basepath: str | Path, step: int = 0) -> None:
    """Checkpoint: JSON manifest + little-endian float64 blob (per-layer W then b)."""
    base = Path(basepath)
    manifest = {
        "format_version": 1,
        "specs": [
            {"in_dim": s.in_dim, "out_dim": s.out_dim, "activation": s.activation}
            for s in net.specs
        ],
        "seed": net.seed,
        "step": step,
    }
    base.with_suffix(".json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    chunks = []
    for w, b in zip(net.weights, net.biases):
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    base.with_suffix(".bin").write_bytes(b"".join(chunks))


def load_network(basepath: str | Path) -> tuple[DenseNetwork, int]:
    """Load a checkpoint written by :func:`save_network`; returns (net, step)."""
    base = Path(basepath)
    manifest = json.loads(base.with_suffix(".json").read_text(encoding="utf-8"))
    specs = [
        LayerSpec(s["in_dim"], s["out_dim"], s["activation"])
        for s in manifest["specs"]
    ]
    blob = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f8")
    weights, biases = [], []
    offset = 0
    for spec in specs:
        n = spec.out_dim * spec.in_dim
        weights.append(
            blob[offset : offset + n].reshape(spec.out_dim, spec.in_dim).copy()
        )
        offset += n
        biases.append(blob[offset : offset + spec.out_dim].copy())
        offset += spec.out_dim
    if offset != blob.size:
        raise ValidationError("checkpoint blob size does not match manifest specs")
    net = DenseNetwork(specs, weights, biases, seed=int(manifest["seed"]))
    return net, int(manifest["step"])
