"""The adaptive-video-streaming MDP: download dynamics, buffer, QoE reward.

An episode downloads a fixed number of chunks. Each step picks one rung of
the bitrate ladder; the chunk's transfer time is solved against the trace
capacity (fixed-point iteration on the held speed signal), stretched by
multiplicative uniform noise, and fed through the buffer recursion:

    rebuffer = (t_delay - buffer)+
    wait     = ((buffer - t_delay)+ + chunk - buffer_max)+
    buffer'  = ((buffer - t_delay)+ + chunk - wait)+

Per-chunk reward decomposes the episode QoE: quality, minus a weighted
switching penalty, minus a weighted rebuffer penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import UsageError, ValidationError
from .trace import BandwidthTrace, integrate_speed, sample_speed

#: De-facto public ABR ladder (Mbps), six rungs.
DEFAULT_LADDER: tuple[float, ...] = (0.3, 0.75, 1.2, 1.85, 2.85, 4.3)

# Fixed-point solve of transfer time against cumulative trace capacity.
_TRANSFER_MAX_ITERS = 50
_TRANSFER_TOL_S = 1e-6


@dataclass(frozen=True)
class QoEWeights:
    """Weights of the QoE objective: quality log-offset/penalty and the two trade-off multipliers."""

    mu1: float = 1.0
    mu2: float = 4.3
    alpha: float = 1.0
    beta: float = 0.3

    def __post_init__(self) -> None:
        if not (self.alpha > 0):
            raise ValidationError(f"alpha must be > 0, got {self.alpha}")
        if self.mu1 < 0 or self.mu2 < 0 or self.beta < 0:
            raise ValidationError("mu1, mu2 and beta must be non-negative")


@dataclass(frozen=True)
class SessionConfig:
    chunk_duration_s: float = 4.0
    num_chunks: int = 48
    bitrate_ladder: tuple[float, ...] = DEFAULT_LADDER
    buffer_max_s: float = 30.0
    rtt_s: float = 0.08
    eta_low: float = 0.9
    eta_high: float = 1.1
    qoe: QoEWeights = field(default_factory=QoEWeights)
    throughput_history_len: int = 8

    def __post_init__(self) -> None:
        ladder = tuple(float(b) for b in self.bitrate_ladder)
        object.__setattr__(self, "bitrate_ladder", ladder)
        if len(ladder) < 2 or any(b <= 0 for b in ladder):
            raise ValidationError("bitrate_ladder needs >= 2 positive rungs")
        if any(b1 >= b2 for b1, b2 in zip(ladder, ladder[1:])):
            raise ValidationError("bitrate_ladder must be strictly ascending")
        if not (self.chunk_duration_s > 0):
            raise ValidationError("chunk_duration_s must be > 0")
        if self.num_chunks < 1:
            raise ValidationError("num_chunks must be >= 1")
        if self.buffer_max_s < self.chunk_duration_s:
            raise ValidationError("buffer_max_s must be >= chunk_duration_s")
        if self.rtt_s < 0:
            raise ValidationError("rtt_s must be >= 0")
        if not (0 < self.eta_low <= self.eta_high):
            raise ValidationError("need 0 < eta_low <= eta_high")
        if self.throughput_history_len < 1:
            raise ValidationError("throughput_history_len must be >= 1")

    @property
    def num_levels(self) -> int:
        return len(self.bitrate_ladder)

    @property
    def observation_dim(self) -> int:
        return 3 + self.throughput_history_len + self.num_levels


@dataclass(frozen=True)
class SessionState:
    """Streaming MDP state between steps. Immutable; ``step`` returns a successor."""

    config: SessionConfig
    chunk_index: int = 0
    buffer_s: float = 0.0
    clock_s: float = 0.0
    last_level: int | None = None
    last_quality: float | None = None
    throughput_history: tuple[float, ...] = ()  # most-recent-first
    total_quality: float = 0.0
    total_switch_penalty: float = 0.0
    total_rebuffer_s: float = 0.0
    total_wait_s: float = 0.0

    @property
    def done(self) -> bool:
        return self.chunk_index >= self.config.num_chunks

    @property
    def last_bitrate(self) -> float | None:
        if self.last_level is None:
            return None
        return self.config.bitrate_ladder[self.last_level]


@dataclass(frozen=True)
class StepOutcome:
    """Everything one chunk download produced, for logging and QoE accounting."""

    chunk_index: int
    action: int
    bitrate_mbps: float
    download_s: float  # transfer + RTT, pre-noise
    t_delay_s: float  # noised total delay
    rebuffer_s: float
    wait_s: float
    throughput_mbps: float
    buffer_after_s: float
    quality: float
    switch_penalty: float  # raw |quality step|, un-weighted
    reward: float


def quality(bitrate: float, w: QoEWeights) -> float:
    """Perceived quality of one chunk: log(alpha + b) - beta / b."""
    if not (bitrate > 0):
        raise ValidationError(f"bitrate must be > 0, got {bitrate}")
    return math.log(w.alpha + bitrate) - w.beta / bitrate


def _solve_transfer_time(trace: BandwidthTrace, t0: float, mbits: float) -> float:
    """Fixed-point solve of ``integral of speed over [t0, t0+tau] == mbits``."""
    tau = mbits / sample_speed(trace, t0)
    for _ in range(_TRANSFER_MAX_ITERS):
        avg = integrate_speed(trace, t0, t0 + tau) / tau
        new_tau = mbits / avg
        done = abs(new_tau - tau) < _TRANSFER_TOL_S
        tau = new_tau
        if done:
            break
    return tau


def reset(
    config: SessionConfig, trace: BandwidthTrace, seed: int = 0
) -> tuple[SessionState, np.ndarray]:
    """Fresh session: empty buffer, clock at zero, zeroed history."""
    del trace, seed  # the initial state is the same for any trace and seed
    state = SessionState(config=config)
    return state, observe(state, config)


def observe(state: SessionState, config: SessionConfig) -> np.ndarray:
    """Observation vector, length 3 + history + ladder size.

    Layout: [last quality level / (M-1), buffer / buffer_max,
    throughput history (most-recent-first, zero-padded),
    next-chunk sizes per rung (Mbits), remaining chunks / total].
    """
    k = config.throughput_history_len
    m = config.num_levels
    vec = np.zeros(config.observation_dim, dtype=np.float64)
    if state.last_level is not None:
        vec[0] = state.last_level / (m - 1)
    vec[1] = state.buffer_s / config.buffer_max_s
    hist = state.throughput_history[:k]
    vec[2 : 2 + len(hist)] = hist
    vec[2 + k : 2 + k + m] = np.asarray(config.bitrate_ladder) * config.chunk_duration_s
    vec[2 + k + m] = (config.num_chunks - state.chunk_index) / config.num_chunks
    return vec


def step(
    state: SessionState,
    action: int,
    trace: BandwidthTrace,
    rng: np.random.Generator,
) -> tuple[SessionState, np.ndarray, float, bool, StepOutcome]:
    """Download one chunk at ``bitrate_ladder[action]`` and advance the session."""
    cfg = state.config
    if not (0 <= action < cfg.num_levels):
        raise UsageError(f"action {action} outside ladder of {cfg.num_levels} rungs")
    if state.done:
        raise UsageError("cannot step a finished session")

    bitrate = cfg.bitrate_ladder[action]
    mbits = bitrate * cfg.chunk_duration_s
    transfer_s = _solve_transfer_time(trace, state.clock_s, mbits)
    download_s = transfer_s + cfg.rtt_s
    eta = rng.uniform(cfg.eta_low, cfg.eta_high)
    t_delay = download_s * eta

    rebuffer = max(0.0, t_delay - state.buffer_s)
    drained = max(0.0, state.buffer_s - t_delay)
    wait = max(0.0, drained + cfg.chunk_duration_s - cfg.buffer_max_s)
    new_buffer = max(0.0, drained + cfg.chunk_duration_s - wait)
    throughput = integrate_speed(trace, state.clock_s, state.clock_s + t_delay) / t_delay

    q = quality(bitrate, cfg.qoe)
    switch = abs(q - state.last_quality) if state.last_quality is not None else 0.0
    reward = q - cfg.qoe.mu1 * switch - cfg.qoe.mu2 * rebuffer

    new_state = replace(
        state,
        chunk_index=state.chunk_index + 1,
        buffer_s=new_buffer,
        # parenthesized so the episode clock telescopes bitwise against
        # a replayed sum of (t_delay + wait) pairs
        clock_s=state.clock_s + (t_delay + wait),
        last_level=action,
        last_quality=q,
        throughput_history=(throughput,)
        + state.throughput_history[: cfg.throughput_history_len - 1],
        total_quality=state.total_quality + q,
        total_switch_penalty=state.total_switch_penalty + switch,
        total_rebuffer_s=state.total_rebuffer_s + rebuffer,
        total_wait_s=state.total_wait_s + wait,
    )
    outcome = StepOutcome(
        chunk_index=state.chunk_index,
        action=action,
        bitrate_mbps=bitrate,
        download_s=download_s,
        t_delay_s=t_delay,
        rebuffer_s=rebuffer,
        wait_s=wait,
        throughput_mbps=throughput,
        buffer_after_s=new_buffer,
        quality=q,
        switch_penalty=switch,
        reward=reward,
    )
    return new_state, observe(new_state, cfg), reward, new_state.done, outcome


def episode_qoe(outcomes: Sequence[StepOutcome], weights: QoEWeights) -> float:
    """Episode QoE recomputed from raw per-chunk quality and rebuffer logs.

    Equals the sum of per-step rewards by construction of the per-chunk
    decomposition; kept independent of the stored rewards so the identity
    is checkable.
    """
    if not outcomes:
        raise UsageError("episode_qoe needs at least one outcome")
    total_q = sum(o.quality for o in outcomes)
    switching = sum(
        abs(b.quality - a.quality) for a, b in zip(outcomes, outcomes[1:])
    )
    stalls = sum(o.rebuffer_s for o in outcomes)
    return total_q - weights.mu1 * switching - weights.mu2 * stalls


class Session:
    """Owns one live MDP instance: config, active trace(s), state, noise RNG.

    With several traces, each reset draws one uniformly (the stationary
    mixture used by the MBW scenario). ``set_traces`` swaps the pool
    immediately, modelling an abrupt regime change mid-session.
    """

    def __init__(
        self,
        config: SessionConfig,
        traces: BandwidthTrace | Sequence[BandwidthTrace],
        seed: int,
    ) -> None:
        self.config = config
        if isinstance(traces, BandwidthTrace):
            traces = [traces]
        if not traces:
            raise ValidationError("session needs at least one trace")
        self._traces = list(traces)
        self._rng = np.random.default_rng(seed)
        self.trace = self._traces[0]
        self.state, self.current_obs = reset(config, self.trace)
        self.episode_outcomes: list[StepOutcome] = []

    def set_traces(self, traces: BandwidthTrace | Sequence[BandwidthTrace]) -> None:
        if isinstance(traces, BandwidthTrace):
            traces = [traces]
        self._traces = list(traces)
        self.trace = self._traces[0] if len(self._traces) == 1 else self.trace

    def reset(self) -> np.ndarray:
        if len(self._traces) > 1:
            self.trace = self._traces[int(self._rng.integers(len(self._traces)))]
        else:
            self.trace = self._traces[0]
        self.state, self.current_obs = reset(self.config, self.trace)
        self.episode_outcomes = []
        return self.current_obs

    def step(self, action: int) -> tuple[np.ndarray, float, bool, StepOutcome]:
        self.state, obs, reward, done, outcome = step(
            self.state, action, self.trace, self._rng
        )
        self.current_obs = obs
        self.episode_outcomes.append(outcome)
        return obs, reward, done, outcome
