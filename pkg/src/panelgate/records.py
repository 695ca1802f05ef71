"""Record schema, ingestion, trial averaging, and ordinal rounding.

This module is the single source of truth the analyses read. A record set is
immutable after ingestion; everything downstream works from
:class:`RaterScore` (trial-averaged, per judge) or
:class:`TrajectoryPanelScore` (averaged across the judge panel).

On-disk form is line-delimited JSON with two record kinds distinguished by a
``kind`` field (``trajectory`` / ``judge_call``). The canonical export sorts
records by (trajectory_id, judge_id, trial_index) and fixes field order so
digests are stable.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Any, Iterable, Iterator, Sequence

from .config import GateConfig
from .errors import (
    DimensionSchemaError,
    DomainError,
    DuplicateRecordError,
    RecordParseError,
    ScoreValidationError,
)


class Cell(str, Enum):
    HONEST = "honest"
    CELL_A = "cell_a"
    CELL_B = "cell_b"
    PROBE = "probe"


# Probe trajectories are scored by an out-of-family judge, not the panel, so
# the panel-coverage check does not apply to them.
_COVERAGE_CELLS = (Cell.HONEST, Cell.CELL_A, Cell.CELL_B)


@dataclass(frozen=True)
class TrajectoryRecord:
    trajectory_id: str
    composer_id: str
    regime_id: str
    asset_id: str
    cell: Cell
    rationale_token_count: int
    composer_system_fingerprint: str = ""


@dataclass(frozen=True)
class JudgeCallRecord:
    trajectory_id: str
    judge_id: str
    judge_family: str
    trial_index: int
    dimension_scores: dict[str, int]


@dataclass(frozen=True)
class RaterScore:
    """Trial-averaged scores for one (trajectory, judge) pair."""

    trajectory_id: str
    judge_id: str
    dimension_means: dict[str, float]
    dimension_ordinals: dict[str, int]
    aggregate_mean: float
    aggregate_ordinal: int
    n_trials: int


@dataclass(frozen=True)
class TrajectoryPanelScore:
    """Panel-aggregated (mean over judges) floating-point scores."""

    trajectory_id: str
    composer_id: str
    regime_id: str
    asset_id: str
    cell: Cell
    token_count: int
    aggregate: float
    dimensions: dict[str, float]


@dataclass(frozen=True)
class IngestionSummary:
    n_trajectories: int
    n_complete: int
    n_calls: int
    incomplete_ids: tuple[str, ...]

    def describe(self) -> str:
        covered = self.n_trajectories - len(self.incomplete_ids)
        return (
            f"{covered}-of-{self.n_trajectories} trajectories with full panel coverage, "
            f"{self.n_calls} judge calls"
        )


@dataclass(frozen=True)
class RecordSet:
    trajectories: tuple[TrajectoryRecord, ...]
    calls: tuple[JudgeCallRecord, ...]
    panel_judges: tuple[str, ...]
    lock_hash: str
    incomplete_ids: frozenset[str] = field(default_factory=frozenset)

    def trajectory_index(self) -> dict[str, TrajectoryRecord]:
        return {t.trajectory_id: t for t in self.trajectories}

    def summary(self) -> IngestionSummary:
        covered = [
            t.trajectory_id
            for t in self.trajectories
            if t.cell in _COVERAGE_CELLS
        ]
        return IngestionSummary(
            n_trajectories=len(covered),
            n_complete=len(covered) - len(self.incomplete_ids),
            n_calls=len(self.calls),
            incomplete_ids=tuple(sorted(self.incomplete_ids)),
        )


def whitespace_token_count(text: str) -> int:
    """Number of maximal non-whitespace runs (the stylometric token count)."""
    return len(text.split())


def ordinal_round(score: float) -> int:
    """Round to the nearest rubric category, then clip to [1, 5].

    Ties at .5 round away from zero (declared tie rule).
    """
    if not math.isfinite(score):
        raise DomainError(f"cannot round non-finite score {score!r}")
    rounded = math.floor(abs(score) + 0.5) * (1 if score >= 0 else -1)
    return min(5, max(1, rounded))


def _parse_trajectory(obj: dict[str, Any], line_no: int) -> TrajectoryRecord:
    try:
        cell = Cell(obj["cell"])
    except ValueError:
        raise RecordParseError(line_no, f"unknown cell {obj.get('cell')!r}")
    except KeyError:
        raise RecordParseError(line_no, "trajectory record missing 'cell'")
    if "rationale_token_count" in obj:
        tokens = obj["rationale_token_count"]
    elif "rationale_text" in obj:
        # Text is accepted but only counted; it is never stored.
        tokens = whitespace_token_count(str(obj["rationale_text"]))
    else:
        raise RecordParseError(
            line_no, "trajectory record needs rationale_token_count or rationale_text"
        )
    if not isinstance(tokens, int) or isinstance(tokens, bool) or tokens < 0:
        raise RecordParseError(
            line_no, f"rationale_token_count must be a non-negative integer, got {tokens!r}"
        )
    try:
        return TrajectoryRecord(
            trajectory_id=str(obj["trajectory_id"]),
            composer_id=str(obj["composer_id"]),
            regime_id=str(obj["regime_id"]),
            asset_id=str(obj["asset_id"]),
            cell=cell,
            rationale_token_count=tokens,
            composer_system_fingerprint=str(obj.get("composer_system_fingerprint", "")),
        )
    except KeyError as exc:
        raise RecordParseError(line_no, f"trajectory record missing field {exc}")


def _parse_judge_call(
    obj: dict[str, Any], line_no: int, rubric: Sequence[str]
) -> JudgeCallRecord:
    try:
        raw_scores = obj["dimension_scores"]
        record = JudgeCallRecord(
            trajectory_id=str(obj["trajectory_id"]),
            judge_id=str(obj["judge_id"]),
            judge_family=str(obj["judge_family"]),
            trial_index=int(obj["trial_index"]),
            dimension_scores={},
        )
    except KeyError as exc:
        raise RecordParseError(line_no, f"judge_call record missing field {exc}")
    if record.trial_index < 1:
        raise RecordParseError(line_no, f"trial_index must be >= 1, got {record.trial_index}")
    if not isinstance(raw_scores, dict):
        raise RecordParseError(line_no, "dimension_scores must be an object")
    if set(raw_scores) != set(rubric):
        raise DimensionSchemaError(
            f"line {line_no}: dimensions {sorted(raw_scores)} do not match the "
            f"locked rubric {sorted(rubric)}"
        )
    scores: dict[str, int] = {}
    for dim in rubric:
        value = raw_scores[dim]
        if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 5:
            raise ScoreValidationError(
                f"line {line_no}: trajectory {record.trajectory_id!r} judge "
                f"{record.judge_id!r} trial {record.trial_index} has "
                f"{dim}={value!r}, expected an integer in [1, 5]"
            )
        scores[dim] = value
    record.dimension_scores.update(scores)
    return record


def _iter_lines(source: IO[bytes] | IO[str] | Iterable[str] | str | Path) -> Iterator[str]:
    if isinstance(source, Path):
        with source.open("r", encoding="utf-8") as handle:
            yield from handle
        return
    if isinstance(source, str):
        yield from io.StringIO(source)
        return
    for line in source:
        yield line.decode("utf-8") if isinstance(line, bytes) else line


def ingest_records(
    source: IO[bytes] | IO[str] | Iterable[str] | str | Path,
    config: GateConfig,
) -> RecordSet:
    """Parse, validate, and index a line-delimited record stream.

    Incomplete trajectories (missing at least one panel judge) are flagged,
    not dropped. The returned record set carries the config's lock digest.
    """
    rubric = config.rubric_dimensions
    trajectories: dict[str, TrajectoryRecord] = {}
    calls: dict[tuple[str, str, int], JudgeCallRecord] = {}
    for line_no, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordParseError(line_no, f"invalid JSON ({exc.msg})")
        if not isinstance(obj, dict):
            raise RecordParseError(line_no, "record must be a JSON object")
        kind = obj.get("kind")
        if kind == "trajectory":
            record = _parse_trajectory(obj, line_no)
            if record.trajectory_id in trajectories:
                raise DuplicateRecordError(
                    f"line {line_no}: duplicate trajectory {record.trajectory_id!r}"
                )
            trajectories[record.trajectory_id] = record
        elif kind == "judge_call":
            call = _parse_judge_call(obj, line_no, rubric)
            key = (call.trajectory_id, call.judge_id, call.trial_index)
            if key in calls:
                raise DuplicateRecordError(
                    f"line {line_no}: duplicate judge call {key!r}"
                )
            calls[key] = call
        else:
            raise RecordParseError(line_no, f"unknown record kind {kind!r}")

    for key in calls:
        if key[0] not in trajectories:
            raise RecordParseError(
                0, f"judge call references unknown trajectory {key[0]!r}"
            )

    panel = config.judge_ids
    judges_by_trajectory: dict[str, set[str]] = {}
    for call in calls.values():
        judges_by_trajectory.setdefault(call.trajectory_id, set()).add(call.judge_id)
    incomplete = frozenset(
        t.trajectory_id
        for t in trajectories.values()
        if t.cell in _COVERAGE_CELLS
        and not set(panel) <= judges_by_trajectory.get(t.trajectory_id, set())
    )

    ordered_trajectories = tuple(
        sorted(trajectories.values(), key=lambda t: t.trajectory_id)
    )
    ordered_calls = tuple(
        sorted(calls.values(), key=lambda c: (c.trajectory_id, c.judge_id, c.trial_index))
    )
    return RecordSet(
        trajectories=ordered_trajectories,
        calls=ordered_calls,
        panel_judges=panel,
        lock_hash=config.lock_hash,
        incomplete_ids=incomplete,
    )


def canonical_lines(records: RecordSet) -> Iterator[str]:
    """Emit the canonical line-delimited form (fixed field order, sorted)."""
    for t in sorted(records.trajectories, key=lambda r: r.trajectory_id):
        yield json.dumps(
            {
                "kind": "trajectory",
                "trajectory_id": t.trajectory_id,
                "composer_id": t.composer_id,
                "regime_id": t.regime_id,
                "asset_id": t.asset_id,
                "cell": t.cell.value,
                "rationale_token_count": t.rationale_token_count,
                "composer_system_fingerprint": t.composer_system_fingerprint,
            },
            separators=(",", ":"),
        )
    for c in sorted(records.calls, key=lambda r: (r.trajectory_id, r.judge_id, r.trial_index)):
        yield json.dumps(
            {
                "kind": "judge_call",
                "trajectory_id": c.trajectory_id,
                "judge_id": c.judge_id,
                "judge_family": c.judge_family,
                "trial_index": c.trial_index,
                "dimension_scores": c.dimension_scores,
            },
            separators=(",", ":"),
        )


def write_canonical(records: RecordSet, path: str | Path) -> None:
    Path(path).write_text("\n".join(canonical_lines(records)) + "\n", encoding="utf-8")


def average_trials(records: RecordSet) -> tuple[RaterScore, ...]:
    """Collapse repeated calls to one score vector per (trajectory, judge).

    Means are plain arithmetic means over trials; single-trial judges pass
    through unchanged. The aggregate is the equal-weight mean of the six
    dimension means.
    """
    grouped: dict[tuple[str, str], list[JudgeCallRecord]] = {}
    for call in records.calls:
        grouped.setdefault((call.trajectory_id, call.judge_id), []).append(call)

    scores: list[RaterScore] = []
    for (trajectory_id, judge_id), trials in sorted(grouped.items()):
        dims = sorted(trials[0].dimension_scores)
        means = {
            d: sum(t.dimension_scores[d] for t in trials) / len(trials) for d in dims
        }
        aggregate = sum(means.values()) / len(means)
        scores.append(
            RaterScore(
                trajectory_id=trajectory_id,
                judge_id=judge_id,
                dimension_means=means,
                dimension_ordinals={d: ordinal_round(m) for d, m in means.items()},
                aggregate_mean=aggregate,
                aggregate_ordinal=ordinal_round(aggregate),
                n_trials=len(trials),
            )
        )
    return tuple(scores)


def panel_scores(
    records: RecordSet,
    rater_scores: Sequence[RaterScore],
    judges: Sequence[str] | None = None,
) -> tuple[TrajectoryPanelScore, ...]:
    """Average rater scores over the judge panel, one row per trajectory.

    ``judges`` restricts the panel (used by leave-one-family-out and
    single-judge analyses); trajectories missing any selected judge are
    skipped. Score means stay floating point; ordinals are only for kappa.
    """
    selected = tuple(judges) if judges is not None else records.panel_judges
    if not selected:
        raise ValueError("panel_scores needs at least one judge")
    by_trajectory: dict[str, dict[str, RaterScore]] = {}
    for score in rater_scores:
        if score.judge_id in selected:
            by_trajectory.setdefault(score.trajectory_id, {})[score.judge_id] = score

    index = records.trajectory_index()
    rows: list[TrajectoryPanelScore] = []
    for trajectory_id in sorted(by_trajectory):
        per_judge = by_trajectory[trajectory_id]
        if set(per_judge) != set(selected):
            continue
        trajectory = index[trajectory_id]
        dims = sorted(next(iter(per_judge.values())).dimension_means)
        dim_means = {
            d: sum(per_judge[j].dimension_means[d] for j in selected) / len(selected)
            for d in dims
        }
        aggregate = sum(per_judge[j].aggregate_mean for j in selected) / len(selected)
        rows.append(
            TrajectoryPanelScore(
                trajectory_id=trajectory_id,
                composer_id=trajectory.composer_id,
                regime_id=trajectory.regime_id,
                asset_id=trajectory.asset_id,
                cell=trajectory.cell,
                token_count=trajectory.rationale_token_count,
                aggregate=aggregate,
                dimensions=dim_means,
            )
        )
    return tuple(rows)


def honest_scores(rows: Iterable[TrajectoryPanelScore]) -> tuple[TrajectoryPanelScore, ...]:
    return tuple(r for r in rows if r.cell is Cell.HONEST)


def cell_rows(
    rows: Iterable[TrajectoryPanelScore], cell: Cell
) -> tuple[TrajectoryPanelScore, ...]:
    return tuple(r for r in rows if r.cell is cell)
