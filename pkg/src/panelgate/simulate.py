"""Synthetic judge-panel generator and pluggable judge-backend runner.

The generator produces a full record set from declared true scores plus
controllable bias mechanisms (per-judge offsets, per-composer preferences,
family halo, anchor ambiguity noise, and a terse-rationale penalty below a
token threshold). Latent scores are Gaussian around the true mean and then
rounded and clipped to the 1-5 ordinal scale. Identical configs regenerate
identical record sets; every trajectory owns an RNG substream keyed by its
index, so generation order and parallelism cannot change the output.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .config import GateConfig, PanelJudge
from .errors import DimensionSchemaError, InfeasibleTargetError, ScoreValidationError
from .records import (
    Cell,
    JudgeCallRecord,
    RecordSet,
    TrajectoryRecord,
    ordinal_round,
)

FIXTURE_SCHEMA = "panelgate.fixture.v1"


@dataclass(frozen=True)
class TersePenalty:
    threshold: int
    magnitude: float


@dataclass(frozen=True)
class SimJudge:
    judge_id: str
    family: str
    trials: int = 1
    bias: float = 0.0
    noise_sd: dict[str, float] = field(default_factory=dict)
    composer_bias: dict[str, float] = field(default_factory=dict)
    # Per-dimension multipliers for composer_bias (mean 1 over the rubric
    # keeps the aggregate-level bias equal to composer_bias's value).
    bias_dimension_weights: dict[str, float] = field(default_factory=dict)
    halo: float = 0.0
    anchor_noise: dict[str, float] = field(default_factory=dict)
    terse_penalty: TersePenalty | None = None


@dataclass(frozen=True)
class SimComposer:
    composer_id: str
    family: str
    regime_means: dict[str, dict[str, float]]  # regime -> dimension -> mean
    quality_sd: float = 0.0
    # How strongly the shared per-trajectory quality shift loads on each
    # dimension (default 1.0); lets a dimension behave as its own construct.
    quality_loading: dict[str, float] = field(default_factory=dict)
    # Per-trajectory true-score jitter; a scalar applies to every dimension,
    # a mapping sets each dimension's spread separately.
    dimension_sd: float | dict[str, float] = 0.0
    token_mean: float = 120.0
    token_sd: float = 20.0


@dataclass(frozen=True)
class SimRegime:
    regime_id: str
    asset_cycles: dict[str, int]  # asset -> cycles per composer


@dataclass(frozen=True)
class SimCell:
    cell: Cell
    composer_id: str
    n: int
    means: dict[str, float]
    quality_sd: float = 0.0
    token_mean: float = 100.0
    token_sd: float = 10.0


@dataclass(frozen=True)
class SimProbe:
    judge: SimJudge
    composer_means: dict[str, float]
    n_per_composer: int
    quality_sd: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    composers: tuple[SimComposer, ...]
    regimes: tuple[SimRegime, ...]
    judges: tuple[SimJudge, ...]
    cells: tuple[SimCell, ...] = ()
    probe: SimProbe | None = None
    seed: int = 0
    rubric_dimensions: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        dims = self.rubric_dimensions
        for composer in self.composers:
            for regime, means in composer.regime_means.items():
                if set(means) != set(dims):
                    raise DimensionSchemaError(
                        f"composer {composer.composer_id!r} regime {regime!r} means "
                        "do not match the rubric"
                    )
                for dim, mean in means.items():
                    if not 1.0 <= mean <= 5.0:
                        raise ValueError(
                            f"true mean {mean} for {composer.composer_id}/{regime}/{dim} "
                            "outside [1, 5]"
                        )
        for cell in self.cells:
            for dim, mean in cell.means.items():
                if not 1.0 <= mean <= 5.0:
                    raise ValueError(f"cell mean {mean} for {dim} outside [1, 5]")

    def gate_config(self, **overrides: Any) -> GateConfig:
        """GateConfig matching this simulation's panel and rubric."""
        defaults: dict[str, Any] = {
            "rubric_dimensions": self.rubric_dimensions,
            "panel_judges": tuple(
                PanelJudge(judge_id=j.judge_id, family=j.family) for j in self.judges
            ),
            "master_seed": self.seed,
        }
        defaults.update(overrides)
        return GateConfig(**defaults)

    def to_dict(self) -> dict[str, Any]:
        def judge_dict(j: SimJudge) -> dict[str, Any]:
            out: dict[str, Any] = {
                "judge_id": j.judge_id,
                "family": j.family,
                "trials": j.trials,
                "bias": j.bias,
                "noise_sd": dict(j.noise_sd),
                "composer_bias": dict(j.composer_bias),
                "bias_dimension_weights": dict(j.bias_dimension_weights),
                "halo": j.halo,
                "anchor_noise": dict(j.anchor_noise),
            }
            if j.terse_penalty is not None:
                out["terse_penalty"] = {
                    "threshold": j.terse_penalty.threshold,
                    "magnitude": j.terse_penalty.magnitude,
                }
            return out

        payload: dict[str, Any] = {
            "seed": self.seed,
            "rubric_dimensions": list(self.rubric_dimensions),
            "composers": [
                {
                    "composer_id": c.composer_id,
                    "family": c.family,
                    "regime_means": {r: dict(m) for r, m in c.regime_means.items()},
                    "quality_sd": c.quality_sd,
                    "quality_loading": dict(c.quality_loading),
                    "dimension_sd": c.dimension_sd
                    if not isinstance(c.dimension_sd, dict)
                    else dict(c.dimension_sd),
                    "token_mean": c.token_mean,
                    "token_sd": c.token_sd,
                }
                for c in self.composers
            ],
            "regimes": [
                {"regime_id": r.regime_id, "asset_cycles": dict(r.asset_cycles)}
                for r in self.regimes
            ],
            "judges": [judge_dict(j) for j in self.judges],
            "cells": [
                {
                    "cell": c.cell.value,
                    "composer_id": c.composer_id,
                    "n": c.n,
                    "means": dict(c.means),
                    "quality_sd": c.quality_sd,
                    "token_mean": c.token_mean,
                    "token_sd": c.token_sd,
                }
                for c in self.cells
            ],
        }
        if self.probe is not None:
            payload["probe"] = {
                "judge": judge_dict(self.probe.judge),
                "composer_means": dict(self.probe.composer_means),
                "n_per_composer": self.probe.n_per_composer,
                "quality_sd": self.probe.quality_sd,
            }
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "SimConfig":
        def judge_from(d: Mapping[str, Any]) -> SimJudge:
            penalty = d.get("terse_penalty")
            return SimJudge(
                judge_id=d["judge_id"],
                family=d["family"],
                trials=d.get("trials", 1),
                bias=d.get("bias", 0.0),
                noise_sd=dict(d.get("noise_sd", {})),
                composer_bias=dict(d.get("composer_bias", {})),
                bias_dimension_weights=dict(d.get("bias_dimension_weights", {})),
                halo=d.get("halo", 0.0),
                anchor_noise=dict(d.get("anchor_noise", {})),
                terse_penalty=(
                    TersePenalty(penalty["threshold"], penalty["magnitude"])
                    if penalty
                    else None
                ),
            )

        probe = payload.get("probe")
        return cls(
            composers=tuple(
                SimComposer(
                    composer_id=c["composer_id"],
                    family=c["family"],
                    regime_means={r: dict(m) for r, m in c["regime_means"].items()},
                    quality_sd=c.get("quality_sd", 0.0),
                    quality_loading=dict(c.get("quality_loading", {})),
                    dimension_sd=c.get("dimension_sd", 0.0)
                    if not isinstance(c.get("dimension_sd", 0.0), dict)
                    else dict(c["dimension_sd"]),
                    token_mean=c.get("token_mean", 120.0),
                    token_sd=c.get("token_sd", 20.0),
                )
                for c in payload["composers"]
            ),
            regimes=tuple(
                SimRegime(regime_id=r["regime_id"], asset_cycles=dict(r["asset_cycles"]))
                for r in payload["regimes"]
            ),
            judges=tuple(judge_from(j) for j in payload["judges"]),
            cells=tuple(
                SimCell(
                    cell=Cell(c["cell"]),
                    composer_id=c["composer_id"],
                    n=c["n"],
                    means=dict(c["means"]),
                    quality_sd=c.get("quality_sd", 0.0),
                    token_mean=c.get("token_mean", 100.0),
                    token_sd=c.get("token_sd", 10.0),
                )
                for c in payload.get("cells", [])
            ),
            probe=(
                SimProbe(
                    judge=judge_from(probe["judge"]),
                    composer_means=dict(probe["composer_means"]),
                    n_per_composer=probe["n_per_composer"],
                    quality_sd=probe.get("quality_sd", 0.0),
                )
                if probe
                else None
            ),
            seed=payload["seed"],
            rubric_dimensions=tuple(payload["rubric_dimensions"]),
        )


@dataclass(frozen=True)
class _TrajectoryPlan:
    trajectory_id: str
    composer_id: str
    composer_family: str
    regime_id: str
    asset_id: str
    cell: Cell
    means: dict[str, float]
    quality_sd: float
    quality_loading: dict[str, float]
    dimension_sd: float | dict[str, float]
    token_mean: float
    token_sd: float


def _plan_trajectories(sim: SimConfig) -> list[_TrajectoryPlan]:
    plans: list[_TrajectoryPlan] = []
    families = {c.composer_id: c.family for c in sim.composers}
    counter = 0
    for regime in sim.regimes:
        for asset, cycles in sorted(regime.asset_cycles.items()):
            for composer in sim.composers:
                for _ in range(cycles):
                    counter += 1
                    plans.append(
                        _TrajectoryPlan(
                            trajectory_id=f"h{counter:05d}",
                            composer_id=composer.composer_id,
                            composer_family=composer.family,
                            regime_id=regime.regime_id,
                            asset_id=asset,
                            cell=Cell.HONEST,
                            means=composer.regime_means[regime.regime_id],
                            quality_sd=composer.quality_sd,
                            quality_loading=composer.quality_loading,
                            dimension_sd=composer.dimension_sd,
                            token_mean=composer.token_mean,
                            token_sd=composer.token_sd,
                        )
                    )
    for cell_spec in sim.cells:
        prefix = "a" if cell_spec.cell is Cell.CELL_A else "b"
        for i in range(cell_spec.n):
            regime = sim.regimes[i % len(sim.regimes)]
            asset = sorted(regime.asset_cycles)[0]
            plans.append(
                _TrajectoryPlan(
                    trajectory_id=f"{prefix}{i + 1:04d}",
                    composer_id=cell_spec.composer_id,
                    composer_family=families.get(cell_spec.composer_id, ""),
                    regime_id=regime.regime_id,
                    asset_id=asset,
                    cell=cell_spec.cell,
                    means=cell_spec.means,
                    quality_sd=cell_spec.quality_sd,
                    quality_loading={},
                    dimension_sd=0.0,
                    token_mean=cell_spec.token_mean,
                    token_sd=cell_spec.token_sd,
                )
            )
    if sim.probe is not None:
        counter = 0
        for composer_id in sorted(sim.probe.composer_means):
            mean = sim.probe.composer_means[composer_id]
            for _ in range(sim.probe.n_per_composer):
                counter += 1
                regime = sim.regimes[counter % len(sim.regimes)]
                plans.append(
                    _TrajectoryPlan(
                        trajectory_id=f"p{counter:04d}",
                        composer_id=composer_id,
                        composer_family=families.get(composer_id, ""),
                        regime_id=regime.regime_id,
                        asset_id=sorted(regime.asset_cycles)[0],
                        cell=Cell.PROBE,
                        means={d: mean for d in sim.rubric_dimensions},
                        quality_sd=sim.probe.quality_sd,
                        quality_loading={},
                        dimension_sd=0.0,
                        token_mean=120.0,
                        token_sd=10.0,
                    )
                )
    return plans


def _judge_calls(
    plan: _TrajectoryPlan,
    judge: SimJudge,
    true_scores: np.ndarray,
    tokens: int,
    dims: Sequence[str],
    rng: np.random.Generator,
) -> list[JudgeCallRecord]:
    offset = judge.bias
    if judge.family and judge.family == plan.composer_family:
        offset += judge.halo
    if judge.terse_penalty is not None and tokens < judge.terse_penalty.threshold:
        offset -= judge.terse_penalty.magnitude
    preference = judge.composer_bias.get(plan.composer_id, 0.0)
    per_dim_offset = np.asarray(
        [
            offset + preference * judge.bias_dimension_weights.get(d, 1.0)
            for d in dims
        ]
    )
    # Dimension noise and anchor-ambiguity noise are independent Gaussians;
    # their sum is drawn once with the combined scale.
    scale = np.asarray(
        [
            float(np.hypot(judge.noise_sd.get(d, 0.0), judge.anchor_noise.get(d, 0.0)))
            for d in dims
        ]
    )
    calls = []
    for trial in range(1, judge.trials + 1):
        latent = true_scores + per_dim_offset + rng.normal(0.0, 1.0, size=len(dims)) * scale
        calls.append(
            JudgeCallRecord(
                trajectory_id=plan.trajectory_id,
                judge_id=judge.judge_id,
                judge_family=judge.family,
                trial_index=trial,
                dimension_scores={
                    d: ordinal_round(float(latent[i])) for i, d in enumerate(dims)
                },
            )
        )
    return calls


def generate_panel(sim: SimConfig, config: GateConfig | None = None) -> RecordSet:
    """Deterministically generate trajectories and judge calls.

    Latent score = true mean + judge offset + composer preference + family
    halo + dimension/anchor noise + terse penalty (token count below the
    judge's threshold), then rounded and clipped to the ordinal scale.
    """
    if config is None:
        config = sim.gate_config()
    dims = list(sim.rubric_dimensions)
    plans = _plan_trajectories(sim)

    trajectories: list[TrajectoryRecord] = []
    calls: list[JudgeCallRecord] = []
    for index, plan in enumerate(plans):
        rng = np.random.default_rng(np.random.SeedSequence(sim.seed, spawn_key=(index,)))
        tokens = max(0, int(round(rng.normal(plan.token_mean, plan.token_sd))))
        quality = rng.normal(0.0, plan.quality_sd) if plan.quality_sd else 0.0
        quality_vec = np.asarray(
            [quality * plan.quality_loading.get(d, 1.0) for d in dims]
        )
        if isinstance(plan.dimension_sd, dict):
            jitter_scale = np.asarray([plan.dimension_sd.get(d, 0.0) for d in dims])
        else:
            jitter_scale = np.full(len(dims), plan.dimension_sd)
        jitter = (
            rng.normal(0.0, 1.0, size=len(dims)) * jitter_scale
            if jitter_scale.any()
            else np.zeros(len(dims))
        )
        true_scores = np.asarray([plan.means[d] for d in dims]) + quality_vec + jitter
        trajectories.append(
            TrajectoryRecord(
                trajectory_id=plan.trajectory_id,
                composer_id=plan.composer_id,
                regime_id=plan.regime_id,
                asset_id=plan.asset_id,
                cell=plan.cell,
                rationale_token_count=tokens,
                composer_system_fingerprint=f"sim:{plan.composer_id}:{sim.seed}",
            )
        )
        if plan.cell is Cell.PROBE:
            if sim.probe is not None:
                calls.extend(
                    _judge_calls(plan, sim.probe.judge, true_scores, tokens, dims, rng)
                )
        else:
            for judge in sim.judges:
                calls.extend(_judge_calls(plan, judge, true_scores, tokens, dims, rng))

    panel = tuple(j.judge_id for j in sim.judges)
    incomplete = frozenset()
    return RecordSet(
        trajectories=tuple(sorted(trajectories, key=lambda t: t.trajectory_id)),
        calls=tuple(
            sorted(calls, key=lambda c: (c.trajectory_id, c.judge_id, c.trial_index))
        ),
        panel_judges=panel,
        lock_hash=config.lock_hash,
        incomplete_ids=incomplete,
    )


# ---------------------------------------------------------------------------
# Judge backends


class TransientBackendError(Exception):
    """Retryable backend failure (timeouts, throttling)."""


class JudgeBackend(ABC):
    """Behaviour contract for anything that can score a trajectory batch."""

    judge_id: str
    family: str
    trials: int = 1

    @abstractmethod
    def score(
        self, batch: Sequence[TrajectoryRecord], rubric: Sequence[str]
    ) -> list[JudgeCallRecord]:
        """Return one call record per (trajectory, trial) in the batch."""


class SyntheticJudgeBackend(JudgeBackend):
    """Deterministic backend replaying a generated judge's scores."""

    def __init__(self, records: RecordSet, judge_id: str):
        calls = [c for c in records.calls if c.judge_id == judge_id]
        if not calls:
            raise ValueError(f"no calls for judge {judge_id!r} in the record set")
        self.judge_id = judge_id
        self.family = calls[0].judge_family
        self.trials = max(c.trial_index for c in calls)
        self._table: dict[tuple[str, int], JudgeCallRecord] = {
            (c.trajectory_id, c.trial_index): c for c in calls
        }

    def score(
        self, batch: Sequence[TrajectoryRecord], rubric: Sequence[str]
    ) -> list[JudgeCallRecord]:
        out = []
        for trajectory in batch:
            for trial in range(1, self.trials + 1):
                key = (trajectory.trajectory_id, trial)
                if key not in self._table:
                    raise TransientBackendError(f"no score for {key}")
                out.append(self._table[key])
        return out


def validate_call(call: JudgeCallRecord, rubric: Sequence[str]) -> None:
    if set(call.dimension_scores) != set(rubric):
        raise DimensionSchemaError(
            f"trajectory {call.trajectory_id!r}: dimensions do not match the rubric"
        )
    for dim, value in call.dimension_scores.items():
        if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 5:
            raise ScoreValidationError(
                f"trajectory {call.trajectory_id!r} {dim}={value!r} outside [1, 5]"
            )
    if call.trial_index < 1:
        raise ScoreValidationError(
            f"trajectory {call.trajectory_id!r} trial_index {call.trial_index} < 1"
        )


@dataclass(frozen=True)
class ScoreBatchResult:
    records: tuple[JudgeCallRecord, ...]
    failures: tuple[tuple[str, str], ...]  # (trajectory_id, reason)


def score_batch(
    backend: JudgeBackend,
    trajectories: Sequence[TrajectoryRecord],
    rubric: Sequence[str],
    *,
    batch_size: int = 16,
    max_retries: int = 2,
) -> ScoreBatchResult:
    """Batched dispatch with bounded retries and per-record schema validation.

    A backend exception or an invalid record consumes a retry for the
    affected trajectories; exhausted retries become per-trajectory failure
    entries and the run continues. No unvalidated record is ever emitted.
    Output order is canonical regardless of batching.
    """
    records: dict[tuple[str, int], JudgeCallRecord] = {}
    failures: list[tuple[str, str]] = []

    def attempt(batch: Sequence[TrajectoryRecord], retries_left: int) -> None:
        try:
            returned = backend.score(batch, rubric)
            for call in returned:
                validate_call(call, rubric)
            expected = {t.trajectory_id for t in batch}
            got = {c.trajectory_id for c in returned}
            if got != expected:
                raise TransientBackendError(
                    f"backend covered {len(got)} of {len(expected)} trajectories"
                )
        except Exception as exc:
            if retries_left > 0:
                if len(batch) > 1:
                    # Isolate the failing trajectory before burning retries.
                    mid = len(batch) // 2
                    attempt(batch[:mid], retries_left)
                    attempt(batch[mid:], retries_left)
                else:
                    attempt(batch, retries_left - 1)
            else:
                for t in batch:
                    failures.append((t.trajectory_id, str(exc)))
            return
        for call in returned:
            records[(call.trajectory_id, call.trial_index)] = call

    for start in range(0, len(trajectories), batch_size):
        attempt(trajectories[start : start + batch_size], max_retries)

    ordered = tuple(
        records[key] for key in sorted(records, key=lambda k: (k[0], k[1]))
    )
    return ScoreBatchResult(records=ordered, failures=tuple(sorted(failures)))


# ---------------------------------------------------------------------------
# Fixture calibration


@dataclass(frozen=True)
class CalibrationTarget:
    """A named statistic with an acceptance window [lo, hi]."""

    name: str
    lo: float
    hi: float

    def violation(self, value: float) -> float:
        if np.isnan(value):
            return float("inf")
        if value < self.lo:
            return (self.lo - value) / max(abs(self.hi - self.lo), 1e-9)
        if value > self.hi:
            return (value - self.hi) / max(abs(self.hi - self.lo), 1e-9)
        return 0.0


def apply_knob(sim: SimConfig, name: str, value: float) -> SimConfig:
    """Apply one named calibration knob, returning a new config.

    Knobs: ``seed``, ``quality_sd``, ``dimension_sd``,
    ``dimension_sd:<dimension>`` (per-dimension trajectory jitter, all
    composers), ``noise:<judge>`` (scales every dimension's noise for one
    judge), and ``noise:<judge>:<dimension>`` (sets one dimension's noise).
    """
    if name == "seed":
        return replace(sim, seed=int(value))
    if name == "quality_sd":
        return replace(
            sim, composers=tuple(replace(c, quality_sd=value) for c in sim.composers)
        )
    if name == "dimension_sd":
        return replace(
            sim, composers=tuple(replace(c, dimension_sd=value) for c in sim.composers)
        )
    if name.startswith("dimension_sd:"):
        dim = name.split(":", 1)[1]
        composers = []
        for composer in sim.composers:
            current = composer.dimension_sd
            if not isinstance(current, dict):
                current = {d: current for d in sim.rubric_dimensions}
            current = dict(current)
            current[dim] = value
            composers.append(replace(composer, dimension_sd=current))
        return replace(sim, composers=tuple(composers))
    if name.startswith("noise:"):
        parts = name.split(":")
        judges = []
        for judge in sim.judges:
            if judge.judge_id != parts[1]:
                judges.append(judge)
            elif len(parts) == 2:
                judges.append(
                    replace(
                        judge,
                        noise_sd={d: s * value for d, s in judge.noise_sd.items()},
                    )
                )
            else:
                noise = dict(judge.noise_sd)
                noise[parts[2]] = value
                judges.append(replace(judge, noise_sd=noise))
        return replace(sim, judges=tuple(judges))
    raise ValueError(f"unknown calibration knob {name!r}")


def calibrate_fixture(
    base: SimConfig,
    targets: Sequence[CalibrationTarget],
    search: Mapping[str, Sequence[float]],
    evaluate: Callable[[SimConfig, Sequence[str]], dict[str, float]],
    *,
    max_passes: int = 4,
) -> tuple[SimConfig, dict[str, float]]:
    """Deterministic coordinate search until every target is in its window.

    ``evaluate(sim, names)`` must return the named statistics for a candidate
    config. Knobs are tried in declared order, each over its declared grid;
    the candidate minimising total window violation wins. Raises
    :class:`InfeasibleTargetError` (listing unmet targets) when no combination
    within the search space satisfies every window.
    """
    names = [t.name for t in targets]
    if len(set(names)) != len(names):
        raise InfeasibleTargetError(f"duplicate targets in {names}")

    def total_violation(stats: dict[str, float]) -> float:
        return sum(t.violation(stats[t.name]) for t in targets)

    current = base
    current_stats = evaluate(current, names)
    current_score = total_violation(current_stats)
    for _ in range(max_passes):
        if current_score == 0.0:
            break
        improved = False
        for knob, grid in search.items():
            if current_score == 0.0:
                break
            best_value = None
            best_score = current_score
            best_stats = current_stats
            for value in grid:
                candidate = apply_knob(current, knob, value)
                stats = evaluate(candidate, names)
                score = total_violation(stats)
                if score < best_score - 1e-12:
                    best_value, best_score, best_stats = value, score, stats
            if best_value is not None:
                current = apply_knob(current, knob, best_value)
                current_score, current_stats = best_score, best_stats
                improved = True
        if not improved:
            break
    if current_score > 0.0:
        unmet = [
            f"{t.name}={current_stats[t.name]:.4f} not in [{t.lo}, {t.hi}]"
            for t in targets
            if t.violation(current_stats[t.name]) > 0
        ]
        raise InfeasibleTargetError("unmet calibration targets: " + "; ".join(unmet))
    return current, {t.name: current_stats[t.name] for t in targets}


# ---------------------------------------------------------------------------
# Fixture persistence


def save_fixture(
    path: str | Path,
    sim: SimConfig,
    config: GateConfig,
    achieved: Mapping[str, float],
) -> None:
    payload = {
        "schema": FIXTURE_SCHEMA,
        "sim": sim.to_dict(),
        "gate_config": config.to_dict(),
        "achieved": dict(sorted(achieved.items())),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_fixture(path: str | Path) -> tuple[SimConfig, GateConfig, dict[str, float]]:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema") != FIXTURE_SCHEMA:
        raise ValueError(f"{path} is not a {FIXTURE_SCHEMA} file")
    return (
        SimConfig.from_dict(payload["sim"]),
        GateConfig.from_dict(payload["gate_config"]),
        payload.get("achieved", {}),
    )


def default_fixture_path() -> Path:
    return Path(__file__).parent / "fixtures" / "calibrated_panel.json"


def load_default_fixture() -> tuple[SimConfig, GateConfig, dict[str, float]]:
    return load_fixture(default_fixture_path())


def generate_anchor_probe(
    composer_means_before: Mapping[str, float],
    composer_means_after: Mapping[str, float],
    *,
    n_per_composer: int,
    sd_before: float,
    sd_after: float,
    seed: int,
) -> tuple[dict[str, float], dict[str, float], dict[str, str]]:
    """Synthetic paired single-judge scores under two anchor wordings.

    Returns (scores_before, scores_after, composer_by_trajectory) suitable
    for the anchor-probe analysis; per-composer shifts and spread changes are
    supplied by the caller.
    """
    rng = np.random.default_rng(seed)
    before: dict[str, float] = {}
    after: dict[str, float] = {}
    owner: dict[str, str] = {}
    counter = 0
    for composer in sorted(composer_means_before):
        for _ in range(n_per_composer):
            counter += 1
            tid = f"ap{counter:04d}"
            z = rng.normal()
            before[tid] = float(np.clip(composer_means_before[composer] + sd_before * z, 1, 5))
            after[tid] = float(
                np.clip(composer_means_after[composer] + sd_after * z + rng.normal(0, 0.05), 1, 5)
            )
            owner[tid] = composer
    return before, after, owner
