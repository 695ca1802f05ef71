"""Repetition stability and chance-corrected agreement statistics.

The gating statistic is the arithmetic mean of all pairwise quadratic-weighted
Cohen's kappas over the judge panel, computed on rounded ordinal scores.
Unweighted Fleiss kappa is attached for transparency only and never gated on.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .config import GateConfig
from .errors import (
    DegenerateAgreementError,
    DegenerateVarianceError,
    PanelArityError,
    RsUndefinedError,
)
from .records import JudgeCallRecord, RaterScore

AGGREGATE_SCOPE = "aggregate"


@dataclass(frozen=True)
class RepetitionStabilityResult:
    judge_id: str
    rs: float
    within_variance_mean: float
    total_variance: float
    gate_passed: bool
    n_trajectories: int


@dataclass(frozen=True)
class AgreementResult:
    scope: str
    pairwise_kappas: dict[tuple[str, str], float]
    kappa_bar: float
    fleiss_kappa: float
    n_items: int
    n_excluded: int = 0
    ci: tuple[float, float] | None = None

    def with_ci(self, ci: tuple[float, float]) -> "AgreementResult":
        return replace(self, ci=ci)


def repetition_stability(
    calls: Sequence[JudgeCallRecord], config: GateConfig
) -> RepetitionStabilityResult:
    """Variance-ratio stability of one judge's repeated trials.

    RS = 1 - (mean within-trajectory variance) / (variance across all trial
    aggregates), both as population variances, on per-trial equal-weight
    aggregate rubric scores. Only trajectories with >= 2 trials enter.
    """
    judges = {c.judge_id for c in calls}
    if len(judges) != 1:
        raise ValueError(f"repetition_stability expects one judge, got {sorted(judges)}")
    judge_id = calls[0].judge_id

    by_trajectory: dict[str, list[float]] = {}
    for call in calls:
        aggregate = sum(call.dimension_scores.values()) / len(call.dimension_scores)
        by_trajectory.setdefault(call.trajectory_id, []).append(aggregate)

    multi = {t: vals for t, vals in by_trajectory.items() if len(vals) >= 2}
    if len(multi) < 2:
        raise RsUndefinedError(
            f"judge {judge_id!r} needs >= 2 trials on >= 2 trajectories; repetition "
            "stability is undefined for single-trial judges"
        )

    within = [float(np.var(vals)) for vals in multi.values()]
    pooled = [v for vals in multi.values() for v in vals]
    total_variance = float(np.var(pooled))
    if total_variance == 0.0:
        raise DegenerateVarianceError(
            f"judge {judge_id!r} has zero variance across all trials"
        )
    within_mean = float(np.mean(within))
    rs = 1.0 - within_mean / total_variance
    return RepetitionStabilityResult(
        judge_id=judge_id,
        rs=rs,
        within_variance_mean=within_mean,
        total_variance=total_variance,
        gate_passed=rs >= config.rs_gate,
        n_trajectories=len(multi),
    )


def _confusion_matrix(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    matrix = np.zeros((k, k))
    np.add.at(matrix, (a - 1, b - 1), 1.0)
    return matrix / matrix.sum()


def _quadratic_weights(k: int) -> np.ndarray:
    idx = np.arange(k)
    return 1.0 - (idx[:, None] - idx[None, :]) ** 2 / (k - 1) ** 2


def quadratic_weighted_kappa(
    a: Sequence[int], b: Sequence[int], k_levels: int = 5
) -> float:
    """Quadratic-weighted Cohen's kappa on two aligned ordinal rating lists.

    Weights are w_ij = 1 - (i-j)^2/(K-1)^2; expected agreement uses the two
    raters' own empirical marginals (Cohen convention).
    """
    if len(a) != len(b):
        raise ValueError(f"rating lists differ in length ({len(a)} vs {len(b)})")
    if len(a) == 0:
        raise ValueError("rating lists are empty")
    x = np.asarray(a, dtype=int)
    y = np.asarray(b, dtype=int)
    for name, arr in (("a", x), ("b", y)):
        if arr.min() < 1 or arr.max() > k_levels:
            raise ValueError(f"ratings in {name} must lie in [1, {k_levels}]")
    # Canonical operand order makes kappa(a, b) == kappa(b, a) bit-exact.
    if tuple(y.tolist()) < tuple(x.tolist()):
        x, y = y, x

    weights = _quadratic_weights(k_levels)
    observed = _confusion_matrix(x, y, k_levels)
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0))
    p_o = float((weights * observed).sum())
    p_e = float((weights * expected).sum())
    if 1.0 - p_e < 1e-12:
        raise DegenerateAgreementError(
            "all ratings fall in one shared category; chance agreement is 1"
        )
    return (p_o - p_e) / (1.0 - p_e)


def fleiss_kappa(ratings: Sequence[Sequence[int]], k_levels: int = 5) -> float:
    """Unweighted multi-rater Fleiss kappa; ratings[item][rater].

    Transparency statistic only: reported alongside the pairwise kappas but
    never used in a gate.
    """
    if len(ratings) == 0:
        raise ValueError("no items supplied")
    n_raters = {len(row) for row in ratings}
    if len(n_raters) != 1 or next(iter(n_raters)) < 2:
        raise ValueError("every item needs the same number (>= 2) of raters")
    n = next(iter(n_raters))

    table = np.zeros((len(ratings), k_levels))
    for i, row in enumerate(ratings):
        for rating in row:
            if not 1 <= rating <= k_levels:
                raise ValueError(f"rating {rating} outside [1, {k_levels}]")
            table[i, rating - 1] += 1

    p_categories = table.sum(axis=0) / table.sum()
    p_expected = float((p_categories**2).sum())
    if 1.0 - p_expected < 1e-12:
        raise DegenerateAgreementError(
            "all raters used a single category; Fleiss kappa is undefined"
        )
    p_items = ((table**2).sum(axis=1) - n) / (n * (n - 1))
    return (float(p_items.mean()) - p_expected) / (1.0 - p_expected)


def kappa_bar(
    ratings_by_judge: Mapping[str, Mapping[str, int]],
    k_levels: int = 5,
    scope: str = AGGREGATE_SCOPE,
) -> AgreementResult:
    """Mean pairwise quadratic-weighted kappa across the judge panel.

    ``ratings_by_judge`` maps judge -> {item -> ordinal}. Pairwise kappas use
    pairwise-complete items per judge pair; Fleiss kappa and ``n_items`` use
    the listwise-complete intersection. The three-judge convention is defined
    by the protocol; larger panels generalise to the mean over all pairs.
    """
    judges = sorted(ratings_by_judge)
    if len(judges) < 3:
        raise PanelArityError(
            f"kappa_bar is defined for panels of >= 3 judges, got {len(judges)}"
        )

    pairwise: dict[tuple[str, str], float] = {}
    for j1, j2 in combinations(judges, 2):
        common = sorted(set(ratings_by_judge[j1]) & set(ratings_by_judge[j2]))
        if len(common) < 2:
            raise ValueError(f"judges {j1!r} and {j2!r} share fewer than 2 items")
        pairwise[(j1, j2)] = quadratic_weighted_kappa(
            [ratings_by_judge[j1][i] for i in common],
            [ratings_by_judge[j2][i] for i in common],
            k_levels,
        )

    listwise = set(ratings_by_judge[judges[0]])
    for j in judges[1:]:
        listwise &= set(ratings_by_judge[j])
    all_items = set()
    for j in judges:
        all_items |= set(ratings_by_judge[j])
    items = sorted(listwise)
    fleiss = fleiss_kappa(
        [[ratings_by_judge[j][i] for j in judges] for i in items], k_levels
    )
    return AgreementResult(
        scope=scope,
        pairwise_kappas=pairwise,
        kappa_bar=float(np.mean(list(pairwise.values()))),
        fleiss_kappa=fleiss,
        n_items=len(items),
        n_excluded=len(all_items) - len(items),
    )


def aggregate_ratings(
    rater_scores: Sequence[RaterScore], judges: Sequence[str]
) -> dict[str, dict[str, int]]:
    """Rounded aggregate-score ratings keyed judge -> trajectory."""
    out: dict[str, dict[str, int]] = {j: {} for j in judges}
    for score in rater_scores:
        if score.judge_id in out:
            out[score.judge_id][score.trajectory_id] = score.aggregate_ordinal
    return out


def dimension_ratings(
    rater_scores: Sequence[RaterScore], judges: Sequence[str], dimension: str
) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {j: {} for j in judges}
    for score in rater_scores:
        if score.judge_id in out:
            out[score.judge_id][score.trajectory_id] = score.dimension_ordinals[dimension]
    return out


def aggregate_kappa_bar(
    rater_scores: Sequence[RaterScore], config: GateConfig
) -> AgreementResult:
    return kappa_bar(aggregate_ratings(rater_scores, config.judge_ids))


def per_dimension_kappa_bar(
    rater_scores: Sequence[RaterScore], config: GateConfig
) -> dict[str, AgreementResult]:
    """One agreement result per rubric dimension, on that dimension's ordinals.

    A single-category dimension raises :class:`DegenerateAgreementError`
    naming the dimension rather than reporting a silent 0/0.
    """
    results: dict[str, AgreementResult] = {}
    for dim in config.rubric_dimensions:
        try:
            results[dim] = kappa_bar(
                dimension_ratings(rater_scores, config.judge_ids, dim),
                scope=f"dimension:{dim}",
            )
        except DegenerateAgreementError as exc:
            raise DegenerateAgreementError(f"dimension {dim!r}: {exc}") from exc
    return results
