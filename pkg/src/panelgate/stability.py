"""Ranking stability: Spearman rho, LOFO drops, single-judge baselines,
and the out-of-family fourth-judge probe.

The drop unit is the judge family. A drop "fires the trigger" when the
reduced ranking's Spearman rho against the full-panel ranking falls below the
configured threshold; the trigger commits the run to an out-of-family probe
on the disputed pair, which this module only evaluates (it never invokes a
judge itself).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .config import GateConfig
from .errors import InFamilyProbeError, PanelArityError
from .inference import (
    ContrastReport,
    composer_means,
    pairwise_contrasts,
    percentile_ci,
    rank_composers,
)
from .records import Cell, RaterScore, RecordSet, panel_scores


@dataclass(frozen=True)
class LofoResult:
    dropped_judge: str
    reduced_ranking: tuple[str, ...]
    rho_vs_full: float
    trigger_fired: bool
    rank1_preserved: bool


@dataclass(frozen=True)
class ProbeResult:
    disputed_pair: tuple[str, str]
    delta: float
    ci: tuple[float, float]
    tie_verdict: str  # "tie" | "ordered"
    probe_judge: str
    n_first: int
    n_second: int


@dataclass(frozen=True)
class SingleJudgeAnalysis:
    rankings: dict[str, tuple[str, ...]]
    rho_matrix: dict[tuple[str, str], float]
    contrast_reports: dict[str, ContrastReport]


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(
    ranking_a: Sequence[str] | Mapping[str, float],
    ranking_b: Sequence[str] | Mapping[str, float],
) -> float:
    """Tie-corrected Spearman correlation between two rankings.

    Inputs are either ordered item sequences (best first) or item -> score
    mappings, in which case higher scores rank better and ties receive
    average ranks.
    """

    def to_scores(ranking: Sequence[str] | Mapping[str, float]) -> dict[str, float]:
        if isinstance(ranking, Mapping):
            return {str(k): float(v) for k, v in ranking.items()}
        return {str(item): -float(i) for i, item in enumerate(ranking)}

    scores_a = to_scores(ranking_a)
    scores_b = to_scores(ranking_b)
    if set(scores_a) != set(scores_b):
        raise ValueError("rankings cover different item sets")
    items = sorted(scores_a)
    if len(items) < 2:
        raise ValueError("need at least 2 items to correlate rankings")
    # Rank 1 = best, so rank on negated scores.
    ranks_a = _average_ranks([-scores_a[i] for i in items])
    ranks_b = _average_ranks([-scores_b[i] for i in items])
    if np.ptp(ranks_a) == 0 or np.ptp(ranks_b) == 0:
        raise ValueError("a ranking with all items tied has no order to correlate")
    return float(np.corrcoef(ranks_a, ranks_b)[0, 1])


def _families_to_judges(records: RecordSet, config: GateConfig) -> dict[str, list[str]]:
    families: dict[str, list[str]] = {}
    for judge in config.panel_judges:
        families.setdefault(judge.family, []).append(judge.judge_id)
    return families


def lofo_analysis(
    records: RecordSet,
    rater_scores: Sequence[RaterScore],
    config: GateConfig,
) -> tuple[LofoResult, ...]:
    """Leave-one-family-out re-ranking against the full-panel ranking."""
    families = _families_to_judges(records, config)
    if len(config.judge_ids) < 3:
        raise PanelArityError("LOFO needs a panel of >= 3 judges")

    full_rows = panel_scores(records, rater_scores)
    full_ranking = rank_composers(composer_means(full_rows))

    results: list[LofoResult] = []
    for family in sorted(families):
        remaining = [j for j in config.judge_ids if j not in families[family]]
        if len(remaining) < 2:
            raise PanelArityError(
                f"dropping family {family!r} leaves {len(remaining)} judge(s); need >= 2"
            )
        reduced_rows = panel_scores(records, rater_scores, judges=remaining)
        reduced_ranking = rank_composers(composer_means(reduced_rows))
        rho = spearman_rho(full_ranking, reduced_ranking)
        results.append(
            LofoResult(
                dropped_judge=family,
                reduced_ranking=reduced_ranking,
                rho_vs_full=rho,
                trigger_fired=rho < config.lofo_rho,
                rank1_preserved=reduced_ranking[0] == full_ranking[0],
            )
        )
    return tuple(results)


def single_judge_rankings(
    records: RecordSet,
    rater_scores: Sequence[RaterScore],
    config: GateConfig,
    *,
    with_contrasts: bool = True,
) -> SingleJudgeAnalysis:
    """Per-judge composer rankings, pairwise rho, and per-judge Holm families."""
    if len(config.judge_ids) < 2:
        raise PanelArityError("single-judge comparison needs >= 2 judges")
    rankings: dict[str, tuple[str, ...]] = {}
    reports: dict[str, ContrastReport] = {}
    for judge in config.judge_ids:
        rows = panel_scores(records, rater_scores, judges=[judge])
        rankings[judge] = rank_composers(composer_means(rows))
        if with_contrasts:
            reports[judge] = pairwise_contrasts(rows, config)
    rho_matrix = {
        (j1, j2): spearman_rho(rankings[j1], rankings[j2])
        for j1, j2 in combinations(config.judge_ids, 2)
    }
    return SingleJudgeAnalysis(
        rankings=rankings, rho_matrix=rho_matrix, contrast_reports=reports
    )


def fourth_judge_probe(
    records: RecordSet,
    probe_scores: Sequence[RaterScore],
    pair: tuple[str, str],
    config: GateConfig,
    *,
    seed: int | None = None,
) -> ProbeResult:
    """Evaluate an out-of-family judge's verdict on one disputed pair.

    Delta is the probe judge's mean aggregate-score difference (first minus
    second composer) over cell=probe trajectories; the CI is a within-composer
    trajectory bootstrap, and the pair is a tie when the CI contains zero.
    """
    judges = {s.judge_id for s in probe_scores}
    if len(judges) != 1:
        raise ValueError(f"probe expects one judge's scores, got {sorted(judges)}")
    probe_judge = next(iter(judges))

    family_by_judge = {c.judge_id: c.judge_family for c in records.calls}
    probe_family = family_by_judge.get(probe_judge)
    panel_families = set(config.judge_families.values())
    if probe_family in panel_families:
        raise InFamilyProbeError(
            f"probe judge {probe_judge!r} family {probe_family!r} collides with the panel"
        )

    index = records.trajectory_index()
    values: dict[str, list[float]] = {pair[0]: [], pair[1]: []}
    for score in probe_scores:
        trajectory = index.get(score.trajectory_id)
        if trajectory is None or trajectory.cell is not Cell.PROBE:
            continue
        if trajectory.composer_id in values:
            values[trajectory.composer_id].append(score.aggregate_mean)
    first = np.asarray(values[pair[0]], dtype=float)
    second = np.asarray(values[pair[1]], dtype=float)
    if first.size == 0 or second.size == 0:
        raise ValueError(f"probe coverage is empty for one of {pair}")

    delta = float(first.mean() - second.mean())
    rng = np.random.default_rng(config.master_seed if seed is None else seed)
    b = config.bootstrap_B
    deltas = (
        first[rng.integers(0, first.size, size=(b, first.size))].mean(axis=1)
        - second[rng.integers(0, second.size, size=(b, second.size))].mean(axis=1)
    )
    ci = percentile_ci(deltas, config.ci_level)
    return ProbeResult(
        disputed_pair=pair,
        delta=delta,
        ci=ci,
        tie_verdict="tie" if ci[0] <= 0.0 <= ci[1] else "ordered",
        probe_judge=probe_judge,
        n_first=int(first.size),
        n_second=int(second.size),
    )
