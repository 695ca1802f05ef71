"""Adversarial control cells, halo checks, stylometric diagnostics, and the
contamination-boundedness probe.

Cell comparisons use panel-aggregated trajectory-level scores against the
honest-trajectory distribution under the same aggregation. Cell A
(verbose-confident-wrong) must land in the bottom quartile of the honest
distribution; Cell B (terse-correct) is judged by the preregistered
trichotomy: substance (within the inner band of honest), verbosity bias
(more than the outer band below honest and corrected-significant), or
inconclusive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import GateConfig
from .errors import PairingError, UndefinedCorrelationError
from .inference import bootstrap_p_two_sided, config_mde, holm_step_down, percentile_ci, rank_composers
from .records import Cell, TrajectoryPanelScore, TrajectoryRecord

# Preregistered significance level for the Cell A bottom-quartile prediction.
CELL_A_ALPHA = 0.01
HONEST_QUARTILE = 0.25
UNDERPOWERED_CELL_SIZE = 10

VERDICT_A_PASS = "A_pass"
VERDICT_A_FAIL = "A_fail"
VERDICT_H1 = "H1"
VERDICT_H1_PRIME = "H1_prime"
VERDICT_H1_DOUBLE_PRIME = "H1_double_prime"


@dataclass(frozen=True)
class CellVerdict:
    cell: str
    cell_mean: float
    honest_mean: float
    delta: float
    ci: tuple[float, float]
    p_value: float
    verdict: str
    anomaly_flag: bool
    delta_in_mde_units: float
    n_cell: int
    n_honest: int
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class HaloCheck:
    cell: str
    delta_full: float
    delta_lofo: float
    halo: float
    lofo_becomes_primary: bool
    in_family_judge: str | None
    applicable: bool = True


@dataclass(frozen=True)
class TokenTail:
    count_below: int
    total: int
    fraction: float


@dataclass(frozen=True)
class ContaminationResult:
    split: str
    delta: float
    p_value: float
    n_recent: int
    n_historical: int


@dataclass(frozen=True)
class ContaminationReport:
    results: dict[str, ContaminationResult]
    gaps: tuple[str, ...]


@dataclass(frozen=True)
class AnchorProbeResult:
    dimension: str
    delta_mean: float
    ci: tuple[float, float]
    std_before: float
    std_after: float
    discrimination_gain: bool
    ranking_before: tuple[str, ...]
    ranking_after: tuple[str, ...]
    ranking_flipped: bool


def _aggregate(rows: Iterable[TrajectoryPanelScore]) -> np.ndarray:
    return np.asarray([r.aggregate for r in rows], dtype=float)


def _delta_bootstrap(
    cell: np.ndarray, honest: np.ndarray, B: int, seed: int, ci_level: float
) -> tuple[np.ndarray, tuple[float, float]]:
    """Trajectory bootstrap of (cell mean - honest mean), groups independent."""
    rng = np.random.default_rng(seed)
    deltas = (
        cell[rng.integers(0, cell.size, size=(B, cell.size))].mean(axis=1)
        - honest[rng.integers(0, honest.size, size=(B, honest.size))].mean(axis=1)
    )
    return deltas, percentile_ci(deltas, ci_level)


def permutation_p_one_sided(
    observed: float,
    pooled: np.ndarray,
    n_cell: int,
    statistic,
    n_permutations: int,
    seed: int,
) -> float:
    """One-sided permutation p under label exchangeability, floored at 1/N.

    ``statistic(cell_values, honest_values)`` is re-evaluated on each
    permuted split; large values count against the null.
    """
    rng = np.random.default_rng(seed)
    at_least = 0
    work = pooled.copy()
    for _ in range(n_permutations):
        rng.shuffle(work)
        if statistic(work[:n_cell], work[n_cell:]) >= observed:
            at_least += 1
    return max(at_least, 1) / n_permutations


def cell_a_verdict(
    cell_scores: Sequence[TrajectoryPanelScore],
    honest_scores: Sequence[TrajectoryPanelScore],
    config: GateConfig,
    *,
    seed: int | None = None,
) -> CellVerdict:
    """Bottom-quartile test for the verbose-confident-wrong cell.

    The statistic is the fraction of cell trajectories strictly below the
    honest 25th percentile; its p-value comes from a seeded label-permutation
    test. A_pass needs p < 0.01 and the cell mean below honest Q1.
    """
    cell = _aggregate(cell_scores)
    honest = _aggregate(honest_scores)
    if cell.size == 0 or honest.size == 0:
        raise ValueError("cell and honest score sets must be non-empty")
    warnings: tuple[str, ...] = ()
    if cell.size < UNDERPOWERED_CELL_SIZE:
        warnings = (f"underpowered cell: only {cell.size} trajectories",)

    def below_q1(cell_vals: np.ndarray, honest_vals: np.ndarray) -> float:
        q1 = np.quantile(honest_vals, HONEST_QUARTILE, method="linear")
        return float((cell_vals < q1).mean())

    observed = below_q1(cell, honest)
    run_seed = config.master_seed if seed is None else seed
    p = permutation_p_one_sided(
        observed,
        np.concatenate([cell, honest]),
        cell.size,
        below_q1,
        config.permutation_N,
        run_seed,
    )
    honest_q1 = float(np.quantile(honest, HONEST_QUARTILE, method="linear"))
    delta = float(cell.mean() - honest.mean())
    _, ci = _delta_bootstrap(
        cell, honest, config.bootstrap_B, run_seed + 1, config.ci_level
    )
    passed = p < CELL_A_ALPHA and cell.mean() < honest_q1
    return CellVerdict(
        cell=Cell.CELL_A.value,
        cell_mean=float(cell.mean()),
        honest_mean=float(honest.mean()),
        delta=delta,
        ci=ci,
        p_value=p,
        verdict=VERDICT_A_PASS if passed else VERDICT_A_FAIL,
        anomaly_flag=delta > config.cellb_inner,
        delta_in_mde_units=delta / config_mde(config).mde,
        n_cell=int(cell.size),
        n_honest=int(honest.size),
        warnings=warnings,
    )


def cell_b_trichotomy(
    cell_scores: Sequence[TrajectoryPanelScore],
    honest_scores: Sequence[TrajectoryPanelScore],
    config: GateConfig,
    *,
    holm_context: Mapping[str, float] | None = None,
    seed: int | None = None,
) -> CellVerdict:
    """Preregistered trichotomy for the terse-but-correct cell.

    H1 when delta is within the inner band of honest; H1' when delta is more
    than the outer band below honest AND significant after Holm over the
    adversarial family (this cell's p plus ``holm_context``); H1'' otherwise.
    Cells scoring above honest by more than the inner band raise the anomaly
    flag, which is orthogonal to the trichotomy.
    """
    cell = _aggregate(cell_scores)
    honest = _aggregate(honest_scores)
    if cell.size == 0 or honest.size == 0:
        raise ValueError("cell and honest score sets must be non-empty")
    warnings: tuple[str, ...] = ()
    if cell.size < UNDERPOWERED_CELL_SIZE:
        warnings = (f"underpowered cell: only {cell.size} trajectories",)

    run_seed = config.master_seed if seed is None else seed
    deltas, ci = _delta_bootstrap(
        cell, honest, config.bootstrap_B, run_seed + 2, config.ci_level
    )
    delta = float(cell.mean() - honest.mean())
    p = bootstrap_p_two_sided(deltas)

    family = {"cell_b": p}
    family.update(holm_context or {})
    corrected_significant = holm_step_down(family, config.alpha).rejected["cell_b"]

    if delta >= -config.cellb_inner:
        verdict = VERDICT_H1
    elif delta < -config.cellb_outer and corrected_significant:
        verdict = VERDICT_H1_PRIME
    else:
        verdict = VERDICT_H1_DOUBLE_PRIME
    return CellVerdict(
        cell=Cell.CELL_B.value,
        cell_mean=float(cell.mean()),
        honest_mean=float(honest.mean()),
        delta=delta,
        ci=ci,
        p_value=p,
        verdict=verdict,
        anomaly_flag=delta > config.cellb_inner,
        delta_in_mde_units=delta / config_mde(config).mde,
        n_cell=int(cell.size),
        n_honest=int(honest.size),
        warnings=warnings,
    )


def lofo_halo_check(
    cell_scores_by_judge: Mapping[str, Mapping[str, float]],
    honest_scores_by_judge: Mapping[str, Mapping[str, float]],
    in_family_judge: str | None,
    config: GateConfig,
    *,
    cell: str = Cell.CELL_B.value,
) -> HaloCheck:
    """In-family halo on a cell's honest gap.

    Compares the cell-minus-honest gap with and without the in-family judge;
    a halo at or above the threshold makes the LOFO score primary for the
    cell. A missing in-family judge yields a not-applicable check rather than
    a silent skip.
    """
    judges = sorted(cell_scores_by_judge)
    if sorted(honest_scores_by_judge) != judges:
        raise ValueError("cell and honest score maps disagree on judges")
    cell_ids = sorted(set.intersection(*(set(cell_scores_by_judge[j]) for j in judges)))
    honest_ids = sorted(
        set.intersection(*(set(honest_scores_by_judge[j]) for j in judges))
    )
    if not cell_ids or not honest_ids:
        raise ValueError("halo check needs trajectories covered by every judge")

    def gap(selected: Sequence[str]) -> float:
        cell_panel = np.mean(
            [[cell_scores_by_judge[j][t] for t in cell_ids] for j in selected], axis=0
        )
        honest_panel = np.mean(
            [[honest_scores_by_judge[j][t] for t in honest_ids] for j in selected],
            axis=0,
        )
        return float(cell_panel.mean() - honest_panel.mean())

    if in_family_judge is None or in_family_judge not in judges:
        return HaloCheck(
            cell=cell,
            delta_full=gap(judges),
            delta_lofo=float("nan"),
            halo=float("nan"),
            lofo_becomes_primary=False,
            in_family_judge=in_family_judge,
            applicable=False,
        )

    remaining = [j for j in judges if j != in_family_judge]
    delta_full = gap(judges)
    delta_lofo = gap(remaining)
    halo = abs(delta_full - delta_lofo)
    return HaloCheck(
        cell=cell,
        delta_full=delta_full,
        delta_lofo=delta_lofo,
        halo=halo,
        lofo_becomes_primary=halo >= config.halo_threshold,
        in_family_judge=in_family_judge,
        applicable=True,
    )


def token_tail_fractions(
    trajectories: Iterable[TrajectoryRecord], threshold: int = 60
) -> dict[str, TokenTail]:
    """Per-composer fraction of honest rationales strictly below the threshold."""
    counts: dict[str, list[int]] = {}
    for t in trajectories:
        if t.cell is not Cell.HONEST:
            continue
        tally = counts.setdefault(t.composer_id, [0, 0])
        tally[1] += 1
        if t.rationale_token_count < threshold:
            tally[0] += 1
    return {
        composer: TokenTail(
            count_below=below, total=total, fraction=below / total if total else 0.0
        )
        for composer, (below, total) in sorted(counts.items())
    }


def length_score_correlation(rows: Sequence[TrajectoryPanelScore]) -> float:
    """Pearson correlation between token count and panel-aggregated score."""
    honest = [r for r in rows if r.cell is Cell.HONEST]
    if len(honest) < 3:
        raise ValueError(f"need >= 3 honest trajectories, got {len(honest)}")
    tokens = np.asarray([r.token_count for r in honest], dtype=float)
    scores = np.asarray([r.aggregate for r in honest], dtype=float)
    if np.ptp(tokens) == 0 or np.ptp(scores) == 0:
        raise UndefinedCorrelationError(
            "token counts or scores are constant; correlation undefined"
        )
    return float(np.corrcoef(tokens, scores)[0, 1])


def _stratified_permutation_p(
    strata: Sequence[tuple[np.ndarray, np.ndarray]],
    observed: float,
    n_permutations: int,
    seed: int,
) -> float:
    """Two-sided permutation p for a pooled recent-minus-historical delta,
    permuting labels within each (composer) stratum."""
    rng = np.random.default_rng(seed)
    pooled = [np.concatenate([recent, hist]) for recent, hist in strata]
    n_recent = [recent.size for recent, _ in strata]
    at_least = 0
    for _ in range(n_permutations):
        delta_sum = 0.0
        for values, k in zip(pooled, n_recent):
            perm = rng.permutation(values)
            delta_sum += perm[:k].mean() - perm[k:].mean()
        if abs(delta_sum / len(strata)) >= abs(observed):
            at_least += 1
    return max(at_least, 1) / n_permutations


def contamination_probe(
    rows: Sequence[TrajectoryPanelScore],
    config: GateConfig,
    *,
    seed: int | None = None,
) -> ContaminationReport:
    """Recent-vs-historical regime comparison, stratified by composer.

    Delta is the composer-stratified mean difference between the post-cutoff
    regime and all other regimes; p comes from a seeded stratified
    permutation test. Splits: aggregate plus one per asset; splits or strata
    without both sides are skipped with a gap entry.
    """
    if config.post_cutoff_regime is None:
        raise ValueError("config.post_cutoff_regime is not set")
    honest = [r for r in rows if r.cell is Cell.HONEST]
    assets = sorted({r.asset_id for r in honest})
    run_seed = config.master_seed if seed is None else seed

    results: dict[str, ContaminationResult] = {}
    gaps: list[str] = []
    for split_index, (split, members) in enumerate(
        [("aggregate", honest)]
        + [(f"asset:{a}", [r for r in honest if r.asset_id == a]) for a in assets]
    ):
        strata: list[tuple[np.ndarray, np.ndarray]] = []
        for composer in sorted({r.composer_id for r in members}):
            recent = np.asarray(
                [
                    r.aggregate
                    for r in members
                    if r.composer_id == composer and r.regime_id == config.post_cutoff_regime
                ]
            )
            hist = np.asarray(
                [
                    r.aggregate
                    for r in members
                    if r.composer_id == composer and r.regime_id != config.post_cutoff_regime
                ]
            )
            if recent.size == 0 or hist.size == 0:
                gaps.append(
                    f"contamination split {split}: composer {composer} lacks "
                    "recent or historical data, stratum dropped"
                )
                continue
            strata.append((recent, hist))
        if not strata:
            gaps.append(f"contamination split {split}: no usable strata, skipped")
            continue
        observed = float(
            np.mean([recent.mean() - hist.mean() for recent, hist in strata])
        )
        p = _stratified_permutation_p(
            strata, observed, config.permutation_N, run_seed + 31 * split_index
        )
        results[split] = ContaminationResult(
            split=split,
            delta=observed,
            p_value=p,
            n_recent=int(sum(r.size for r, _ in strata)),
            n_historical=int(sum(h.size for _, h in strata)),
        )
    return ContaminationReport(results=results, gaps=tuple(gaps))


def anchor_probe_analysis(
    scores_before: Mapping[str, float],
    scores_after: Mapping[str, float],
    composer_by_trajectory: Mapping[str, str],
    dimension: str,
    config: GateConfig,
    *,
    seed: int | None = None,
) -> AnchorProbeResult:
    """Paired before/after comparison of one dimension under rewritten anchors.

    Inputs map trajectory -> single-judge dimension score under the original
    and rewritten rubric; the trajectory sets must match exactly. Reports the
    paired mean shift with a trajectory-bootstrap CI, the within-dimension
    standard deviations, and the composer ranking on this dimension before
    and after.
    """
    if set(scores_before) != set(scores_after):
        raise PairingError(
            "anchor probe requires identical trajectory sets under both rubric versions"
        )
    items = sorted(scores_before)
    before = np.asarray([scores_before[t] for t in items], dtype=float)
    after = np.asarray([scores_after[t] for t in items], dtype=float)
    diff = after - before

    rng = np.random.default_rng(config.master_seed if seed is None else seed)
    idx = rng.integers(0, diff.size, size=(config.bootstrap_B, diff.size))
    ci = percentile_ci(diff[idx].mean(axis=1), config.ci_level)

    def ranking(values: np.ndarray) -> tuple[str, ...]:
        by_composer: dict[str, list[float]] = {}
        for t, v in zip(items, values):
            by_composer.setdefault(composer_by_trajectory[t], []).append(float(v))
        return rank_composers({c: float(np.mean(v)) for c, v in by_composer.items()})

    ranking_before = ranking(before)
    ranking_after = ranking(after)
    std_before = float(np.std(before, ddof=1))
    std_after = float(np.std(after, ddof=1))
    return AnchorProbeResult(
        dimension=dimension,
        delta_mean=float(diff.mean()),
        ci=ci,
        std_before=std_before,
        std_after=std_after,
        discrimination_gain=std_after > std_before,
        ranking_before=ranking_before,
        ranking_after=ranking_after,
        ranking_flipped=ranking_before != ranking_after,
    )
