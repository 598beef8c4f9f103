"""Experiment orchestration: config files, seeded runs, metric persistence.

One TOML document fully determines a run. Six scenarios are supported:

* ``HBW`` / ``LBW``  - stationary high / low bandwidth
* ``MBW``            - stationary mixture, per-episode draw between the two
* ``NS``             - regimes alternate every ``regime_period_updates``
* ``NS_OR``          - NS plus forward-only (dormant) resets
* ``NS_RESIN``       - NS plus joint forward+gradient (silent) resets

A run directory holds ``config.snapshot``, ``summary.json``, one
``seed_<n>/`` directory of CSVs per seed, and ``plotdata/`` tidy files.
Identical configs produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agent import (
    AgentBundle,
    PPOConfig,
    collect_rollout,
    evaluate_greedy,
    make_bundle,
    ppo_update,
)
from .env import QoEWeights, Session, SessionConfig, StepOutcome
from .errors import NumericalError, UsageError, ValidationError
from .net import DenseNetwork
from .plasticity import (
    build_report,
    detect_dormant,
    detect_silent,
    detect_zero_grad,
    layer_ratios,
)
from .resin import ResinConfig, ResinController
from .trace import BandwidthProfile, BandwidthTrace, generate_synthetic

SCENARIOS = ("HBW", "LBW", "MBW", "NS", "NS_OR", "NS_RESIN")

#: Reset mode each scenario forces unless the config overrides it explicitly.
SCENARIO_MODES = {
    "HBW": "off",
    "LBW": "off",
    "MBW": "off",
    "NS": "off",
    "NS_OR": "dormant_only",
    "NS_RESIN": "silent",
}

ARTIFACT_FORMAT_VERSION = 1

# Named sub-streams of a run seed, so every RNG consumer is independent.
_STREAMS = {
    "trace_hbw": 11,
    "trace_lbw": 12,
    "env": 13,
    "bundle": 14,
    "rollout": 15,
    "update": 16,
    "resin": 17,
    "eval_env": 18,
}


def _derive_seed(seed: int, stream: str) -> int:
    return int(np.random.SeedSequence([seed, _STREAMS[stream]]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    session: SessionConfig
    profiles: Mapping[str, BandwidthProfile]
    ppo: PPOConfig
    resin: ResinConfig
    total_updates: int
    seeds: tuple[int, ...]
    output_dir: Path
    eval_every: int = 10
    eval_episodes: int = 2
    regime_period_updates: int = 200
    trace_duration_s: float = 400.0

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValidationError(
                f"experiment.scenario must be one of {SCENARIOS}, got {self.scenario!r}"
            )
        if self.total_updates < 1:
            raise ValidationError("experiment.total_updates must be >= 1")
        if not self.seeds:
            raise ValidationError("experiment.seeds must be non-empty")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ValidationError("experiment.eval_every and eval_episodes must be >= 1")
        if self.regime_period_updates < 1:
            raise ValidationError("experiment.regime_period_updates must be >= 1")
        for name in ("HBW", "LBW"):
            if name not in self.profiles:
                raise ValidationError(f"profiles must define {name}")
        if self.trace_duration_s < 2 * max(
            p.sample_period_s for p in self.profiles.values()
        ):
            raise ValidationError("experiment.trace_duration_s too short for profiles")


def _dataclass_dict(obj: Any) -> dict[str, Any]:
    out = {}
    for f in fields(obj):
        val = getattr(obj, f.name)
        if isinstance(val, tuple):
            val = list(val)
        out[f.name] = val
    return out


def resolved_config_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    """Canonical nested dict of the fully-resolved config (output_dir excluded)."""
    return {
        "experiment": {
            "scenario": cfg.scenario,
            "total_updates": cfg.total_updates,
            "seeds": list(cfg.seeds),
            "eval_every": cfg.eval_every,
            "eval_episodes": cfg.eval_episodes,
            "regime_period_updates": cfg.regime_period_updates,
            "trace_duration_s": cfg.trace_duration_s,
        },
        "session": {
            k: v
            for k, v in _dataclass_dict(cfg.session).items()
            if k != "qoe"
        },
        "qoe": _dataclass_dict(cfg.session.qoe),
        "profiles": {
            name: _dataclass_dict(p) for name, p in sorted(cfg.profiles.items())
        },
        "ppo": _dataclass_dict(cfg.ppo),
        "resin": _dataclass_dict(cfg.resin),
    }


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(resolved_config_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _build_section(doc: Mapping[str, Any], name: str) -> dict[str, Any]:
    section = doc.get(name, {})
    if not isinstance(section, Mapping):
        raise ValidationError(f"section [{name}] must be a table")
    return dict(section)


def config_from_dict(
    doc: Mapping[str, Any],
    scenario_override: str | None = None,
    seeds_override: Sequence[int] | None = None,
    output_dir_override: str | Path | None = None,
) -> ExperimentConfig:
    """Materialize an ExperimentConfig from a parsed TOML document."""
    exp = _build_section(doc, "experiment")
    scenario = scenario_override or exp.get("scenario")
    if scenario is None:
        raise ValidationError("experiment.scenario is required")

    qoe_kwargs = _build_section(doc, "qoe")
    session_kwargs = _build_section(doc, "session")
    try:
        qoe = QoEWeights(**qoe_kwargs)
        if "bitrate_ladder" in session_kwargs:
            session_kwargs["bitrate_ladder"] = tuple(session_kwargs["bitrate_ladder"])
        session = SessionConfig(qoe=qoe, **session_kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad session/qoe key: {exc}") from None

    profiles_doc = _build_section(doc, "profiles")
    profiles = {}
    for name, body in profiles_doc.items():
        try:
            profiles[name] = BandwidthProfile(name=name, **dict(body))
        except TypeError as exc:
            raise ValidationError(f"bad profiles.{name} key: {exc}") from None
    if not profiles:
        profiles = {
            "HBW": BandwidthProfile("HBW", mean_mbps=4.5, jitter_fraction=0.15),
            "LBW": BandwidthProfile("LBW", mean_mbps=0.8, jitter_fraction=0.15),
        }

    ppo_kwargs = _build_section(doc, "ppo")
    if "hidden_sizes" in ppo_kwargs:
        ppo_kwargs["hidden_sizes"] = tuple(ppo_kwargs["hidden_sizes"])
    resin_kwargs = _build_section(doc, "resin")
    if "mode" not in resin_kwargs:
        if scenario not in SCENARIO_MODES:
            raise ValidationError(
                f"experiment.scenario must be one of {SCENARIOS}, got {scenario!r}"
            )
        resin_kwargs["mode"] = SCENARIO_MODES[scenario]
    try:
        ppo = PPOConfig(**ppo_kwargs)
        resin = ResinConfig(**resin_kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad ppo/resin key: {exc}") from None

    seeds = seeds_override if seeds_override is not None else exp.get("seeds", [0])
    output_dir = output_dir_override or exp.get("output_dir", "runs/experiment")
    return ExperimentConfig(
        scenario=scenario,
        session=session,
        profiles=profiles,
        ppo=ppo,
        resin=resin,
        total_updates=int(exp.get("total_updates", 100)),
        seeds=tuple(int(s) for s in seeds),
        output_dir=Path(output_dir),
        eval_every=int(exp.get("eval_every", 10)),
        eval_episodes=int(exp.get("eval_episodes", 2)),
        regime_period_updates=int(exp.get("regime_period_updates", 200)),
        trace_duration_s=float(exp.get("trace_duration_s", 400.0)),
    )


def load_config(
    path: str | Path,
    scenario_override: str | None = None,
    seeds_override: Sequence[int] | None = None,
    output_dir_override: str | Path | None = None,
) -> ExperimentConfig:
    """Parse and validate a TOML experiment file."""
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return config_from_dict(
        doc,
        scenario_override=scenario_override,
        seeds_override=seeds_override,
        output_dir_override=output_dir_override,
    )


# --------------------------------------------------------------------------
# CSV plumbing


def _fmt(value: Any) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        if math.isnan(value):
            return "NA"
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    text = path.read_text(encoding="utf-8").strip()
    if not text:
        return [], []
    lines = text.split("\n")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


EPISODE_LOG_COLUMNS = (
    "chunk",
    "action",
    "bitrate_mbps",
    "throughput_mbps",
    "t_delay_s",
    "rebuffer_s",
    "wait_s",
    "buffer_s",
    "quality",
    "reward",
)


def _episode_log_row(o: StepOutcome) -> tuple:
    return (
        o.chunk_index,
        o.action,
        o.bitrate_mbps,
        o.throughput_mbps,
        o.t_delay_s,
        o.rebuffer_s,
        o.wait_s,
        o.buffer_after_s,
        o.quality,
        o.reward,
    )


# --------------------------------------------------------------------------
# Scenario plumbing


def _regime_for_update(cfg: ExperimentConfig, update: int) -> str | None:
    if cfg.scenario not in ("NS", "NS_OR", "NS_RESIN"):
        return None
    return ("HBW", "LBW")[((update - 1) // cfg.regime_period_updates) % 2]


def _trace_pool(
    cfg: ExperimentConfig,
    traces: Mapping[str, BandwidthTrace],
    regime: str | None,
) -> list[BandwidthTrace]:
    if cfg.scenario == "MBW":
        return [traces["HBW"], traces["LBW"]]
    if regime is not None:
        return [traces[regime]]
    return [traces[cfg.scenario]] if cfg.scenario in traces else [traces["HBW"]]


# --------------------------------------------------------------------------
# Plasticity snapshotting

PLASTICITY_COLUMNS = (
    "step",
    "network",
    "layer",
    "neuron",
    "mean_abs_h",
    "mean_abs_g",
    "s",
    "xi_g",
    "xi",
    "is_dormant",
    "is_zero_grad",
    "is_silent",
)

PLASTICITY_LAYER_COLUMNS = (
    "step",
    "network",
    "layer",
    "dormant_ratio",
    "zero_grad_ratio",
    "silent_ratio",
    "dormant_overlap",
    "zero_grad_overlap",
    "silent_overlap",
)


def _snapshot_network(
    net: DenseNetwork,
    role: str,
    probe: np.ndarray,
    resin_cfg: ResinConfig,
    update: int,
    prev_sets: dict | None,
) -> tuple[list[tuple], list[tuple], dict]:
    outputs, tape = net.forward(probe)
    gtape = net.backward_loss(tape, np.ones_like(outputs))
    report = build_report(tape, gtape)
    sets = {
        "dormant": detect_dormant(report, resin_cfg.eps_d),
        "zero_grad": detect_zero_grad(report, resin_cfg.eps_g),
        "silent": detect_silent(report, resin_cfg.eps_g, resin_cfg.eps_d),
    }
    neuron_rows = []
    for l, i, layer in report.neuron_rows():
        neuron_rows.append(
            (
                update,
                role,
                l,
                i,
                float(layer.mean_abs_h[i]),
                float(layer.mean_abs_g[i]),
                float(layer.s[i]),
                float(layer.xi_g[i]),
                float(layer.xi[i]),
                int((l, i) in sets["dormant"].members),
                int((l, i) in sets["zero_grad"].members),
                int((l, i) in sets["silent"].members),
            )
        )
    layer_rows = [
        (
            update,
            role,
            r.layer,
            r.dormant_ratio,
            r.zero_grad_ratio,
            r.silent_ratio,
            r.dormant_overlap,
            r.zero_grad_overlap,
            r.silent_overlap,
        )
        for r in layer_ratios(report, sets, prev_sets)
    ]
    return neuron_rows, layer_rows, sets


# --------------------------------------------------------------------------
# Single-seed training run

TRAINING_COLUMNS = (
    "update",
    "step",
    "mean_reward",
    "mean_qoe",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "resets_actor",
    "resets_critic",
)

EVAL_COLUMNS = ("update", "qoe", "reward", "quality_sum", "switch_sum", "rebuffer_sum")

RESET_COLUMNS = ("step", "role", "layer", "neuron", "s", "xi_g", "mode")


def run_seed(cfg: ExperimentConfig, seed: int, seed_dir: Path) -> dict[str, Any]:
    """Train one seed to completion and persist its CSV artifacts."""
    seed_dir.mkdir(parents=True, exist_ok=True)
    traces = {
        "HBW": generate_synthetic(
            cfg.profiles["HBW"], cfg.trace_duration_s, _derive_seed(seed, "trace_hbw")
        ),
        "LBW": generate_synthetic(
            cfg.profiles["LBW"], cfg.trace_duration_s, _derive_seed(seed, "trace_lbw")
        ),
    }
    regime = _regime_for_update(cfg, 1)
    session = Session(
        cfg.session, _trace_pool(cfg, traces, regime), _derive_seed(seed, "env")
    )
    bundle = make_bundle(
        cfg.session.observation_dim,
        cfg.session.num_levels,
        _derive_seed(seed, "bundle"),
        hidden_sizes=cfg.ppo.hidden_sizes,
    )
    rollout_rng = np.random.default_rng(_derive_seed(seed, "rollout"))
    update_rng = np.random.default_rng(_derive_seed(seed, "update"))
    resin_rng = np.random.default_rng(_derive_seed(seed, "resin"))
    eval_env_seed = _derive_seed(seed, "eval_env")
    controller = ResinController(cfg.resin)

    training_rows: list[tuple] = []
    eval_rows: list[tuple] = []
    episode_rows: list[tuple] = []
    plasticity_rows: list[tuple] = []
    plasticity_layer_rows: list[tuple] = []
    reset_rows: list[tuple] = []
    prev_sets: dict[str, dict] = {}
    reset_counts = {"actor": 0, "critic": 0}
    status, failure = "completed", None
    active_regime = regime

    for update in range(1, cfg.total_updates + 1):
        new_regime = _regime_for_update(cfg, update)
        if new_regime != active_regime:
            active_regime = new_regime
            session.set_traces(_trace_pool(cfg, traces, active_regime))

        rollout = collect_rollout(session, bundle, cfg.ppo.rollout_horizon, rollout_rng)
        try:
            diag = ppo_update(bundle, rollout, cfg.ppo, update_rng)
        except NumericalError as exc:
            status, failure = "failed", str(exc)
            break

        probe = rollout.obs[-cfg.resin.probe_batch_size :]
        if update % cfg.resin.frequency == 0:
            for role, net in (("actor", bundle.actor), ("critic", bundle.critic)):
                n_rows, l_rows, sets = _snapshot_network(
                    net, role, probe, cfg.resin, update, prev_sets.get(role)
                )
                plasticity_rows.extend(n_rows)
                plasticity_layer_rows.extend(l_rows)
                prev_sets[role] = sets

        for role, net, opt in (
            ("actor", bundle.actor, bundle.actor_opt),
            ("critic", bundle.critic, bundle.critic_opt),
        ):
            events = controller.maybe_reset(
                net, probe, step=update, rng=resin_rng, opt_state=opt, role=role
            )
            reset_counts[role] += len(events)
            reset_rows.extend(
                (e.step, e.network_role, e.layer, e.neuron, e.s, e.xi_g, e.mode)
                for e in events
            )

        if update % cfg.eval_every == 0:
            eval_session = Session(
                cfg.session, _trace_pool(cfg, traces, active_regime), eval_env_seed
            )
            result = evaluate_greedy(eval_session, bundle, cfg.eval_episodes)
            eval_rows.append(
                (
                    update,
                    result.qoe,
                    result.reward,
                    result.quality_sum,
                    result.switch_sum,
                    result.rebuffer_sum,
                )
            )
            for episode in result.episodes:
                episode_rows.extend(_episode_log_row(o) for o in episode)

        mean_qoe = (
            float(np.mean(rollout.episode_qoes)) if rollout.episode_qoes else None
        )
        training_rows.append(
            (
                update,
                update * cfg.ppo.rollout_horizon,
                float(rollout.rewards.mean()),
                mean_qoe,
                diag.policy_loss,
                diag.value_loss,
                diag.entropy,
                diag.clip_fraction,
                reset_counts["actor"],
                reset_counts["critic"],
            )
        )

    _write_csv(seed_dir / "training.csv", TRAINING_COLUMNS, training_rows)
    _write_csv(seed_dir / "eval.csv", EVAL_COLUMNS, eval_rows)
    _write_csv(seed_dir / "episodes.csv", EPISODE_LOG_COLUMNS, episode_rows)
    _write_csv(seed_dir / "plasticity.csv", PLASTICITY_COLUMNS, plasticity_rows)
    _write_csv(
        seed_dir / "plasticity_layers.csv", PLASTICITY_LAYER_COLUMNS, plasticity_layer_rows
    )
    _write_csv(seed_dir / "resets.csv", RESET_COLUMNS, reset_rows)

    eval_updates = [row[0] for row in eval_rows]
    eval_qoes = [row[1] for row in eval_rows]
    window = max(1, math.ceil(len(eval_qoes) * 0.1))
    final_window = eval_qoes[-window:] if eval_qoes else []

    def window_mean(col: int) -> float | None:
        if not eval_rows:
            return None
        return float(np.mean([row[col] for row in eval_rows[-window:]]))

    return {
        "seed": seed,
        "status": status,
        "failure": failure,
        "episodes_completed": int(
            sum(1 for row in training_rows if row[3] is not None)
        ),
        "reset_counts": dict(reset_counts),
        "eval_updates": eval_updates,
        "eval_qoes": eval_qoes,
        "eval_rewards": [row[2] for row in eval_rows],
        "final_window_qoe_mean": float(np.mean(final_window)) if final_window else None,
        "final_window_reward_mean": window_mean(2),
        "final_window_components": {
            "quality_sum": window_mean(3),
            "switch_sum": window_mean(4),
            "rebuffer_sum": window_mean(5),
        },
    }


# --------------------------------------------------------------------------
# Aggregation


def compute_iqm(values: Sequence[float]) -> float:
    """Interquartile mean: average of values inside [Q1, Q3] (linear quartiles)."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise UsageError("compute_iqm needs at least one value")
    if arr.size == 1:
        return float(arr[0])
    q1, q3 = np.percentile(arr, [25.0, 75.0])
    inside = arr[(arr >= q1) & (arr <= q3)]
    if inside.size == 0:
        return float(np.median(arr))
    return float(inside.mean())


@dataclass
class RunSummary:
    run_dir: Path
    payload: dict[str, Any]

    @property
    def final_window_iqm_qoe(self) -> float | None:
        return self.payload["iqm"]["final_window_qoe"]


def run_experiment(cfg: ExperimentConfig) -> RunSummary:
    """Execute every seed sequentially and persist all artifacts."""
    run_dir = cfg.output_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    snapshot = json.dumps(resolved_config_dict(cfg), indent=2, sort_keys=True)
    (run_dir / "config.snapshot").write_text(snapshot + "\n", encoding="utf-8")

    per_seed = []
    for seed in cfg.seeds:
        per_seed.append(run_seed(cfg, seed, run_dir / f"seed_{seed}"))

    completed = [s for s in per_seed if s["status"] == "completed"]
    iqm_curve: list[tuple[int, float]] = []
    if completed:
        eval_updates = completed[0]["eval_updates"]
        for idx, update in enumerate(eval_updates):
            point = [s["eval_qoes"][idx] for s in completed if idx < len(s["eval_qoes"])]
            if point:
                iqm_curve.append((int(update), compute_iqm(point)))
    final_qoe_means = [
        s["final_window_qoe_mean"]
        for s in completed
        if s["final_window_qoe_mean"] is not None
    ]
    payload = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "config_hash": config_hash(cfg),
        "scenario": cfg.scenario,
        "total_updates": cfg.total_updates,
        "seeds": list(cfg.seeds),
        "per_seed": {
            str(s["seed"]): {
                "status": s["status"],
                "failure": s["failure"],
                "episodes_completed": s["episodes_completed"],
                "reset_counts": s["reset_counts"],
                "final_window_qoe_mean": s["final_window_qoe_mean"],
                "final_window_reward_mean": s["final_window_reward_mean"],
                "final_window_components": s["final_window_components"],
            }
            for s in per_seed
        },
        "iqm": {
            "final_window_qoe": compute_iqm(final_qoe_means) if final_qoe_means else None,
            "curve": [[u, v] for u, v in iqm_curve],
        },
    }
    (run_dir / "summary.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    emit_plot_data(run_dir)
    return RunSummary(run_dir=run_dir, payload=payload)


# --------------------------------------------------------------------------
# Plot data emission


def _seed_dirs(run_dir: Path) -> list[tuple[int, Path]]:
    out = []
    for child in sorted(run_dir.glob("seed_*")):
        try:
            out.append((int(child.name.split("_", 1)[1]), child))
        except ValueError:
            continue
    return out


def emit_plot_data(run_dir: str | Path) -> Path:
    """Write tidy per-figure CSVs for a completed run directory."""
    run_dir = Path(run_dir)
    missing = []
    if not (run_dir / "summary.json").exists():
        missing.append("summary.json")
    seed_dirs = _seed_dirs(run_dir)
    if not seed_dirs:
        missing.append("seed_*/")
    for _, sd in seed_dirs:
        for name in ("training.csv", "eval.csv", "plasticity_layers.csv", "resets.csv"):
            if not (sd / name).exists():
                missing.append(f"{sd.name}/{name}")
    if missing:
        raise ValidationError(
            f"{run_dir} is not a completed run directory; missing: {', '.join(missing)}"
        )

    plot_dir = run_dir / "plotdata"
    plot_dir.mkdir(exist_ok=True)

    curve_rows, comp_rows = [], []
    by_update: dict[str, dict[int, list[float]]] = {"qoe": {}, "reward": {}}
    for seed, sd in seed_dirs:
        _, rows = _read_csv(sd / "eval.csv")
        for row in rows:
            update = int(row[0])
            qoe, reward = float(row[1]), float(row[2])
            curve_rows.append((seed, update, qoe, reward))
            comp_rows.append((seed, update, row[3], row[4], row[5]))
            by_update["qoe"].setdefault(update, []).append(qoe)
            by_update["reward"].setdefault(update, []).append(reward)
    _write_csv(
        plot_dir / "learning_curves.csv", ("seed", "update", "qoe", "reward"), curve_rows
    )
    iqm_rows = [
        (u, compute_iqm(by_update["qoe"][u]), compute_iqm(by_update["reward"][u]))
        for u in sorted(by_update["qoe"])
    ]
    _write_csv(
        plot_dir / "learning_curves_iqm.csv", ("update", "iqm_qoe", "iqm_reward"), iqm_rows
    )
    _write_csv(
        plot_dir / "qoe_components.csv",
        ("seed", "update", "quality_sum", "switch_sum", "rebuffer_sum"),
        comp_rows,
    )

    overlap_rows = []
    for seed, sd in seed_dirs:
        _, rows = _read_csv(sd / "plasticity_layers.csv")
        for row in rows:
            overlap_rows.append(
                (seed, row[1], int(row[2]), int(row[0]), row[3], row[6], row[4], row[7], row[5], row[8])
            )
    _write_csv(
        plot_dir / "overlap_series.csv",
        ("seed", "network", "layer", "step", "LD", "LDO", "LZG", "LZGO",
         "silent_ratio", "silent_overlap"),
        overlap_rows,
    )

    reset_rows = []
    for seed, sd in seed_dirs:
        _, rows = _read_csv(sd / "resets.csv")
        for row in rows:
            reset_rows.append((seed, *row))
    _write_csv(
        plot_dir / "reset_timeline.csv",
        ("seed", "step", "role", "layer", "neuron", "s", "xi_g", "mode"),
        reset_rows,
    )
    return plot_dir
