"""Periodic neuron resets driven by the activity metrics.

Every ``frequency`` optimizer updates, the controller probes the network
on a recent observation batch, scores every hidden neuron, and resets the
ones selected by the configured mode: fresh afferent weights, zeroed
efferent weights, optimizer moments forgotten. A neuron reset in one sweep
is exempt from the immediately following sweep (its efferent column is
structurally zero there) so it cannot thrash; training can revive it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError, ValidationError
from .net import AdamState, DenseNetwork, reinit_afferent, zero_efferent
from .plasticity import (
    NeuronActivityReport,
    build_report,
    detect_dormant,
    detect_silent,
    detect_zero_grad,
)

MODES = ("silent", "dormant_only", "gradient_only", "off")


@dataclass(frozen=True)
class ResinConfig:
    eps_g: float = 0.025
    eps_d: float = 0.025
    frequency: int = 10
    mode: str = "silent"
    probe_batch_size: int = 256

    def __post_init__(self) -> None:
        if self.eps_g < 0 or self.eps_d < 0:
            raise ValidationError("reset thresholds must be >= 0")
        if self.frequency < 1:
            raise ValidationError("frequency must be >= 1")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.probe_batch_size < 1:
            raise ValidationError("probe_batch_size must be >= 1")


@dataclass(frozen=True)
class ResetEvent:
    step: int
    network_role: str
    layer: int
    neuron: int
    s: float
    xi_g: float
    mode: str


def select_for_reset(
    report: NeuronActivityReport, cfg: ResinConfig
) -> frozenset[tuple[int, int]]:
    """Neuron (layer, index) pairs the configured mode would reset."""
    if cfg.mode == "silent":
        return detect_silent(report, cfg.eps_g, cfg.eps_d).members
    if cfg.mode == "dormant_only":
        return detect_dormant(report, cfg.eps_d).members
    if cfg.mode == "gradient_only":
        return detect_zero_grad(report, cfg.eps_g).members
    return frozenset()


class ResinController:
    """Applies the reset policy to one or more networks on a shared schedule."""

    def __init__(self, cfg: ResinConfig) -> None:
        self.cfg = cfg
        self._exempt: dict[str, frozenset[tuple[int, int]]] = {}

    def maybe_reset(
        self,
        net: DenseNetwork,
        probe_batch: np.ndarray,
        step: int,
        rng: np.random.Generator,
        opt_state: AdamState | None = None,
        role: str = "actor",
    ) -> list[ResetEvent]:
        """Run one sweep if the schedule and mode say so; returns the reset events."""
        if step < 1:
            raise UsageError("step counts from 1")
        if self.cfg.mode == "off" or step % self.cfg.frequency != 0:
            return []
        probe = np.asarray(probe_batch, dtype=np.float64)
        if probe.ndim != 2 or probe.shape[0] == 0:
            raise UsageError("probe batch must be a non-empty (n, d) array")
        probe = probe[-self.cfg.probe_batch_size :]

        outputs, tape = net.forward(probe)
        gtape = net.backward_loss(tape, np.ones_like(outputs))
        report = build_report(tape, gtape)

        selected = select_for_reset(report, self.cfg) - self._exempt.get(role, frozenset())
        events: list[ResetEvent] = []
        for layer, neuron in sorted(selected):
            events.append(
                ResetEvent(
                    step=step,
                    network_role=role,
                    layer=layer,
                    neuron=neuron,
                    s=float(report.layers[layer].s[neuron]),
                    xi_g=float(report.layers[layer].xi_g[neuron]),
                    mode=self.cfg.mode,
                )
            )
            reinit_afferent(net, layer, neuron, rng)
            zero_efferent(net, layer, neuron)
            if opt_state is not None:
                opt_state.zero_neuron_moments(layer, neuron)
        # exemption lasts exactly one sweep
        self._exempt[role] = frozenset(selected)
        return events
