"""Bandwidth traces: synthesis, regime composition, file I/O, and replay.

A trace is a time-indexed download-speed signal with zero-order-hold
semantics between samples and wrap-around past its end, so an episode can
outlive the trace it replays. Synthetic traces are drawn around a profile
mean with truncated-Gaussian jitter; non-stationary traces concatenate
per-regime segments on a continuous time axis.

The on-disk format is plain CSV (``t_seconds,speed_mbps``); regime labels
are an in-memory annotation and are not persisted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import TraceParseError, UsageError, ValidationError

# Synthetic speeds never drop below this fraction of the profile mean, so a
# generated trace cannot report zero or negative capacity.
MIN_SPEED_FRACTION = 0.05


@dataclass(frozen=True)
class BandwidthProfile:
    """A stationary bandwidth regime: mean rate plus relative per-sample jitter."""

    name: str
    mean_mbps: float
    jitter_fraction: float = 0.0
    sample_period_s: float = 1.0

    def __post_init__(self) -> None:
        if not self.name:
            raise ValidationError("profile name must be non-empty")
        if not (self.mean_mbps > 0):
            raise ValidationError(f"mean_mbps must be > 0, got {self.mean_mbps}")
        if not (0 <= self.jitter_fraction < 1):
            raise ValidationError(
                f"jitter_fraction must be in [0, 1), got {self.jitter_fraction}"
            )
        if not (self.sample_period_s > 0):
            raise ValidationError(
                f"sample_period_s must be > 0, got {self.sample_period_s}"
            )


#: Defaults chosen to straddle the default bitrate ladder (see the env module).
DEFAULT_PROFILES: dict[str, BandwidthProfile] = {
    "HBW": BandwidthProfile("HBW", mean_mbps=4.5, jitter_fraction=0.15),
    "LBW": BandwidthProfile("LBW", mean_mbps=0.8, jitter_fraction=0.15),
}


@dataclass(frozen=True)
class RegimeSchedule:
    """An ordered list of (profile-name, duration_s) segments."""

    segments: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValidationError("schedule must contain at least one segment")
        for name, duration in self.segments:
            if not name:
                raise ValidationError("segment profile name must be non-empty")
            if not (duration > 0):
                raise ValidationError(
                    f"segment duration must be > 0, got {duration} for {name!r}"
                )

    @property
    def total_duration_s(self) -> float:
        return float(sum(d for _, d in self.segments))


@dataclass(frozen=True, eq=False)
class BandwidthTrace:
    """An immutable download-speed signal sampled at strictly increasing times.

    ``duration_s`` defines the wrap period; if omitted it extends the last
    sample by the final inter-sample gap.
    """

    times_s: np.ndarray
    speeds_mbps: np.ndarray
    regime_ids: tuple[str, ...]
    duration_s: float = field(default=0.0)

    def __post_init__(self) -> None:
        times = np.asarray(self.times_s, dtype=np.float64)
        speeds = np.asarray(self.speeds_mbps, dtype=np.float64)
        object.__setattr__(self, "times_s", times)
        object.__setattr__(self, "speeds_mbps", speeds)
        if times.ndim != 1 or speeds.shape != times.shape:
            raise ValidationError("times and speeds must be 1-d arrays of equal length")
        if times.size < 2:
            raise ValidationError("a trace needs at least 2 samples")
        if times[0] < 0:
            raise ValidationError("sample times must be non-negative")
        if not np.all(np.diff(times) > 0):
            raise ValidationError("sample times must be strictly increasing")
        if not np.all(speeds > 0):
            raise ValidationError("every sample speed must be > 0")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(speeds))):
            raise ValidationError("trace samples must be finite")
        if len(self.regime_ids) != times.size:
            raise ValidationError("regime_ids must label every sample")
        if self.duration_s == 0.0:
            inferred = float(times[-1] + (times[-1] - times[-2]))
            object.__setattr__(self, "duration_s", inferred)
        if not (self.duration_s > times[-1]):
            raise ValidationError(
                f"duration_s ({self.duration_s}) must exceed the last sample time"
            )
        times.flags.writeable = False
        speeds.flags.writeable = False

    def __len__(self) -> int:
        return int(self.times_s.size)

    @cached_property
    def _cumulative_mbits(self) -> np.ndarray:
        """cum[i] = integral of the held speed over [0, times[i]] (Mbits)."""
        gaps = np.diff(self.times_s)
        cum = np.empty(len(self), dtype=np.float64)
        # Before the first sample the first speed is held.
        cum[0] = self.speeds_mbps[0] * self.times_s[0]
        np.cumsum(self.speeds_mbps[:-1] * gaps, out=cum[1:])
        cum[1:] += cum[0]
        return cum

    @cached_property
    def _mbits_per_period(self) -> float:
        tail = self.speeds_mbps[-1] * (self.duration_s - self.times_s[-1])
        return float(self._cumulative_mbits[-1] + tail)

    def _wrap(self, t: float) -> tuple[int, float]:
        """Reduce t to (full periods, remainder in [0, duration))."""
        if t < self.duration_s:
            return 0, t
        rem = math.fmod(t, self.duration_s)
        full = int(round((t - rem) / self.duration_s))
        return full, rem

    def _antiderivative(self, t: float) -> float:
        """Integral of the held speed over [0, t], with wrap (Mbits)."""
        full, rem = self._wrap(t)
        idx = int(np.searchsorted(self.times_s, rem, side="right")) - 1
        if idx < 0:
            partial = float(self.speeds_mbps[0]) * rem
        else:
            partial = float(
                self._cumulative_mbits[idx]
                + self.speeds_mbps[idx] * (rem - self.times_s[idx])
            )
        return full * self._mbits_per_period + partial

    def samples_equal(self, other: "BandwidthTrace") -> bool:
        return (
            np.array_equal(self.times_s, other.times_s)
            and np.array_equal(self.speeds_mbps, other.speeds_mbps)
            and self.duration_s == other.duration_s
        )


def _synthesize(
    profile: BandwidthProfile, duration_s: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample speeds on the half-open grid [0, duration_s) at the profile period."""
    n = max(1, int(math.ceil(duration_s / profile.sample_period_s - 1e-9)))
    times = np.arange(n, dtype=np.float64) * profile.sample_period_s
    noise = rng.standard_normal(n) * profile.jitter_fraction
    speeds = profile.mean_mbps * (1.0 + noise)
    np.maximum(speeds, MIN_SPEED_FRACTION * profile.mean_mbps, out=speeds)
    return times, speeds


def generate_synthetic(
    profile: BandwidthProfile, duration_s: float, seed: int
) -> BandwidthTrace:
    """Generate a stationary trace for one profile; bit-identical per (profile, duration, seed)."""
    if not (duration_s > 0) or not math.isfinite(duration_s):
        raise ValidationError(f"duration_s must be a positive real, got {duration_s}")
    if duration_s < 2 * profile.sample_period_s:
        raise ValidationError(
            "duration_s must span at least two sample periods "
            f"({duration_s} < 2 x {profile.sample_period_s})"
        )
    rng = np.random.default_rng(seed)
    times, speeds = _synthesize(profile, duration_s, rng)
    return BandwidthTrace(
        times_s=times,
        speeds_mbps=speeds,
        regime_ids=(profile.name,) * len(times),
        duration_s=float(duration_s),
    )


def compose_nonstationary(
    profiles: Mapping[str, BandwidthProfile],
    schedule: RegimeSchedule,
    seed: int,
) -> BandwidthTrace:
    """Concatenate per-regime segments on a continuous time axis.

    A single-segment schedule reproduces ``generate_synthetic`` for that
    profile exactly (same seed, same draws).
    """
    for name, _ in schedule.segments:
        if name not in profiles:
            raise ValidationError(f"schedule references unknown profile {name!r}")
    rng = np.random.default_rng(seed)
    all_times: list[np.ndarray] = []
    all_speeds: list[np.ndarray] = []
    regimes: list[str] = []
    offset = 0.0
    for name, duration in schedule.segments:
        profile = profiles[name]
        times, speeds = _synthesize(profile, duration, rng)
        all_times.append(times + offset)
        all_speeds.append(speeds)
        regimes.extend([name] * len(times))
        offset += duration
    return BandwidthTrace(
        times_s=np.concatenate(all_times),
        speeds_mbps=np.concatenate(all_speeds),
        regime_ids=tuple(regimes),
        duration_s=float(offset),
    )


def sample_speed(trace: BandwidthTrace, t: float) -> float:
    """Speed at time t: hold of the most recent sample, wrapping past the end."""
    if t < 0:
        raise UsageError(f"t must be >= 0, got {t}")
    _, rem = trace._wrap(t)
    idx = int(np.searchsorted(trace.times_s, rem, side="right")) - 1
    if idx < 0:
        idx = 0
    return float(trace.speeds_mbps[idx])


def integrate_speed(trace: BandwidthTrace, t0: float, t1: float) -> float:
    """Mbits deliverable over [t0, t1] under the held (wrapping) speed signal."""
    if t0 < 0 or t1 < t0:
        raise UsageError(f"need 0 <= t0 <= t1, got [{t0}, {t1}]")
    return trace._antiderivative(t1) - trace._antiderivative(t0)


def save_trace(trace: BandwidthTrace, path: str | Path) -> None:
    """Write a trace as CSV. The wrap period is kept in a metadata comment."""
    lines = ["t_seconds,speed_mbps", f"# duration_s={trace.duration_s!r}"]
    for t, s in zip(trace.times_s, trace.speeds_mbps):
        lines.append(f"{float(t)!r},{float(s)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trace(path: str | Path) -> BandwidthTrace:
    """Parse a CSV trace file, enforcing all trace invariants.

    Rows are ``t_seconds,speed_mbps``; ``#`` comment lines and an optional
    header are skipped. Malformed rows are reported with their line number.
    """
    path = Path(path)
    times: list[float] = []
    speeds: list[float] = []
    duration: float | None = None
    header_allowed = True
    with path.open("r", encoding="utf-8", newline=None) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                meta = line[1:].strip()
                if meta.startswith("duration_s="):
                    try:
                        duration = float(meta.split("=", 1)[1])
                    except ValueError:
                        raise TraceParseError(
                            f"bad duration metadata at line {lineno}"
                        ) from None
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise TraceParseError(
                    f"expected 't,speed' row at line {lineno}, got {line!r}"
                )
            try:
                t, s = float(parts[0]), float(parts[1])
            except ValueError:
                if header_allowed:
                    header_allowed = False
                    continue
                raise TraceParseError(
                    f"non-numeric row at line {lineno}: {line!r}"
                ) from None
            header_allowed = False
            if times and t <= times[-1]:
                raise TraceParseError(f"non-increasing timestamp at line {lineno}")
            if s <= 0:
                raise TraceParseError(f"non-positive speed at line {lineno}")
            times.append(t)
            speeds.append(s)
    if len(times) < 2:
        raise TraceParseError(f"{path}: a trace needs at least 2 samples")
    return BandwidthTrace(
        times_s=np.asarray(times),
        speeds_mbps=np.asarray(speeds),
        regime_ids=(path.stem,) * len(times),
        duration_s=float(duration) if duration is not None else 0.0,
    )


def regime_boundaries(trace: BandwidthTrace) -> list[tuple[float, str]]:
    """(start_time, regime) pairs in order, one per contiguous regime run."""
    out: list[tuple[float, str]] = []
    for t, rid in zip(trace.times_s, trace.regime_ids):
        if not out or out[-1][1] != rid:
            out.append((float(t), rid))
    return out
