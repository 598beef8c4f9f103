"""Per-neuron activity metrics from forward/gradient tapes.

Expectations are means over the evaluation batch (the only available
sample of the input distribution). All metrics cover hidden layers only;
output neurons are never reset and are excluded from ratios.

The layer means in the denominators get a degeneracy floor: if a layer's
mean forward magnitude is below it, every index in that layer reports as 0
and the layer is flagged degenerate rather than dividing by ~0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import UsageError, ValidationError
from .net import ActivationTape, GradientTape

DEGENERACY_FLOOR = 1e-12

#: Default detection thresholds (ablatable via the harness).
DEFAULT_EPS = 0.025


def _batch_mean_abs(per_sample: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [np.mean(np.abs(layer), axis=0) for layer in per_sample]


def _normalized_indices(
    mean_abs: list[np.ndarray],
) -> tuple[list[np.ndarray], list[float], list[bool]]:
    indices, means, degenerate = [], [], []
    for m in mean_abs:
        layer_mean = float(m.mean())
        means.append(layer_mean)
        if layer_mean < DEGENERACY_FLOOR:
            indices.append(np.zeros_like(m))
            degenerate.append(True)
        else:
            indices.append(m / layer_mean)
            degenerate.append(False)
    return indices, means, degenerate


def dormancy_index(tape: ActivationTape) -> list[np.ndarray]:
    """Per-neuron forward index: E|h| normalized by the layer mean of E|h|."""
    if tape.batch_size == 0:
        raise UsageError("dormancy_index needs a non-empty batch")
    indices, _, _ = _normalized_indices(_batch_mean_abs(tape.hidden_post))
    return indices


def gradient_index(gtape: GradientTape) -> list[np.ndarray]:
    """Per-neuron gradient index: E|g| normalized by the layer mean of E|g|."""
    if gtape.batch_size == 0:
        raise UsageError("gradient_index needs a non-empty batch")
    indices, _, _ = _normalized_indices(_batch_mean_abs(gtape.hidden_grads))
    return indices


def activity_index(tape: ActivationTape, gtape: GradientTape) -> list[np.ndarray]:
    """Joint index: (E|h| * E|g|) / layer mean of E|h|, per neuron."""
    _check_same_batch(tape, gtape)
    mean_h = _batch_mean_abs(tape.hidden_post)
    mean_g = _batch_mean_abs(gtape.hidden_grads)
    out = []
    for mh, mg in zip(mean_h, mean_g):
        layer_mean = float(mh.mean())
        if layer_mean < DEGENERACY_FLOOR:
            out.append(np.zeros_like(mh))
        else:
            out.append(mh * mg / layer_mean)
    return out


def _check_same_batch(tape: ActivationTape, gtape: GradientTape) -> None:
    if tape.batch_size != gtape.batch_size:
        raise UsageError("activation and gradient tapes come from different batches")
    if len(tape.hidden_post) != len(gtape.hidden_grads):
        raise UsageError("tapes disagree on the number of hidden layers")
    for h, g in zip(tape.hidden_post, gtape.hidden_grads):
        if h.shape != g.shape:
            raise UsageError("tapes disagree on hidden layer widths")


@dataclass(frozen=True)
class LayerActivity:
    """All activity metrics of one hidden layer."""

    mean_abs_h: np.ndarray
    mean_abs_g: np.ndarray
    s: np.ndarray
    xi_g: np.ndarray
    xi: np.ndarray
    layer_mean_abs_h: float
    layer_mean_abs_g: float
    degenerate_h: bool
    degenerate_g: bool

    @property
    def width(self) -> int:
        return int(self.s.size)


@dataclass(frozen=True)
class NeuronActivityReport:
    """Per-hidden-layer activity metrics for one (network, probe batch) pair."""

    layers: tuple[LayerActivity, ...]

    @property
    def num_hidden_layers(self) -> int:
        return len(self.layers)

    def neuron_rows(self) -> Iterable[tuple[int, int, LayerActivity]]:
        for l, layer in enumerate(self.layers):
            for i in range(layer.width):
                yield l, i, layer


def build_report(tape: ActivationTape, gtape: GradientTape) -> NeuronActivityReport:
    """Compute every per-neuron metric for one probe batch."""
    _check_same_batch(tape, gtape)
    mean_h = _batch_mean_abs(tape.hidden_post)
    mean_g = _batch_mean_abs(gtape.hidden_grads)
    s_all, h_means, h_degenerate = _normalized_indices(mean_h)
    xig_all, g_means, g_degenerate = _normalized_indices(mean_g)
    xi_all = activity_index(tape, gtape)
    layers = tuple(
        LayerActivity(
            mean_abs_h=mh,
            mean_abs_g=mg,
            s=s,
            xi_g=xg,
            xi=xi,
            layer_mean_abs_h=hm,
            layer_mean_abs_g=gm,
            degenerate_h=hd,
            degenerate_g=gd,
        )
        for mh, mg, s, xg, xi, hm, gm, hd, gd in zip(
            mean_h, mean_g, s_all, xig_all, xi_all,
            h_means, g_means, h_degenerate, g_degenerate,
        )
    )
    return NeuronActivityReport(layers=layers)


@dataclass(frozen=True)
class NeuronSet:
    """A tagged set of (hidden-layer, neuron) pairs."""

    members: frozenset[tuple[int, int]]
    tag: str

    def __len__(self) -> int:
        return len(self.members)

    def restrict_to_layer(self, layer: int) -> frozenset[tuple[int, int]]:
        return frozenset(m for m in self.members if m[0] == layer)


def detect_dormant(report: NeuronActivityReport, eps: float) -> NeuronSet:
    """Neurons whose forward index is at or below the threshold."""
    if eps < 0:
        raise ValidationError("threshold must be >= 0")
    members = {
        (l, i)
        for l, layer in enumerate(report.layers)
        for i in np.flatnonzero(layer.s <= eps)
    }
    return NeuronSet(frozenset(members), tag="dormant")


def detect_zero_grad(report: NeuronActivityReport, eps: float) -> NeuronSet:
    """Neurons whose gradient index is at or below the threshold."""
    if eps < 0:
        raise ValidationError("threshold must be >= 0")
    members = {
        (l, i)
        for l, layer in enumerate(report.layers)
        for i in np.flatnonzero(layer.xi_g <= eps)
    }
    return NeuronSet(frozenset(members), tag="zero_grad")


def detect_silent(
    report: NeuronActivityReport, eps_g: float, eps_d: float
) -> NeuronSet:
    """Neurons jointly below the gradient and forward thresholds."""
    if eps_g < 0 or eps_d < 0:
        raise ValidationError("thresholds must be >= 0")
    members = {
        (l, i)
        for l, layer in enumerate(report.layers)
        for i in np.flatnonzero((layer.xi_g <= eps_g) & (layer.s <= eps_d))
    }
    return NeuronSet(frozenset(members), tag="silent")


def overlap_coefficient(a: NeuronSet, b: NeuronSet) -> float | None:
    """|A intersect B| / min(|A|, |B|); None when either set is empty.

    None marks the undefined case so persistence curves are never biased by
    a silently coerced 0 or 1; it is logged as NA downstream.
    """
    if a.tag != b.tag:
        raise ValidationError(f"cannot overlap {a.tag!r} with {b.tag!r} sets")
    denom = min(len(a), len(b))
    if denom == 0:
        return None
    return len(a.members & b.members) / denom


def _layer_overlap(
    current: NeuronSet, previous: NeuronSet | None, layer: int
) -> float | None:
    if previous is None:
        return None
    cur = NeuronSet(current.restrict_to_layer(layer), tag=current.tag)
    prev = NeuronSet(previous.restrict_to_layer(layer), tag=previous.tag)
    return overlap_coefficient(cur, prev)


@dataclass(frozen=True)
class LayerRatios:
    """One hidden layer's inactive-neuron ratios plus persistence vs the previous snapshot."""

    layer: int
    dormant_ratio: float
    zero_grad_ratio: float
    silent_ratio: float
    dormant_overlap: float | None
    zero_grad_overlap: float | None
    silent_overlap: float | None


def layer_ratios(
    report: NeuronActivityReport,
    sets: Mapping[str, NeuronSet],
    previous_sets: Mapping[str, NeuronSet] | None = None,
) -> list[LayerRatios]:
    """Per-layer inactive ratios and overlap-vs-previous series."""
    for tag in ("dormant", "zero_grad", "silent"):
        if tag not in sets:
            raise UsageError(f"sets mapping is missing the {tag!r} set")
    prev = previous_sets or {}
    out = []
    for l, layer in enumerate(report.layers):
        width = layer.width
        out.append(
            LayerRatios(
                layer=l,
                dormant_ratio=len(sets["dormant"].restrict_to_layer(l)) / width,
                zero_grad_ratio=len(sets["zero_grad"].restrict_to_layer(l)) / width,
                silent_ratio=len(sets["silent"].restrict_to_layer(l)) / width,
                dormant_overlap=_layer_overlap(sets["dormant"], prev.get("dormant"), l),
                zero_grad_overlap=_layer_overlap(sets["zero_grad"], prev.get("zero_grad"), l),
                silent_overlap=_layer_overlap(sets["silent"], prev.get("silent"), l),
            )
        )
    return out
