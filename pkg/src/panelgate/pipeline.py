"""Full-run orchestration: ingested records in, gated results out.

Analyses refuse to run when the record set was ingested under a different
lock digest than the supplied configuration (preregistration discipline).
Every analysis derives its RNG stream from the master seed plus a fixed
offset, so a full run is reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import adversarial as adv
from .agreement import (
    AgreementResult,
    RepetitionStabilityResult,
    aggregate_kappa_bar,
    aggregate_ratings,
    dimension_ratings,
    per_dimension_kappa_bar,
    quadratic_weighted_kappa,
    repetition_stability,
)
from .config import GateConfig
from .errors import LockMismatchError, RsUndefinedError, UndefinedCorrelationError
from .inference import (
    ContrastReport,
    MdePlan,
    RankDistribution,
    bootstrap_rankings,
    composer_means,
    config_mde,
    pairwise_contrasts,
    rank_composers,
    rank_distribution,
    regime_cluster_bootstrap,
)
from .records import (
    Cell,
    IngestionSummary,
    RaterScore,
    RecordSet,
    average_trials,
    cell_rows,
    honest_scores,
    panel_scores,
)
from .stability import (
    LofoResult,
    ProbeResult,
    SingleJudgeAnalysis,
    fourth_judge_probe,
    lofo_analysis,
    single_judge_rankings,
)
from .verdicts import (
    ClaimKind,
    ClaimScope,
    GateSensitivityRow,
    VerdictTuple,
    agreement_gate,
    assemble_verdict,
    gate_sensitivity,
    resolve_adversarial,
    resolve_stability,
)

ALL_SECTIONS = frozenset(
    {"agreement", "bootstrap", "contrasts", "stability", "adversarial", "verdict"}
)

# Fixed offsets keep per-analysis RNG streams disjoint under one master seed.
_SEED_KAPPA_CI = 11
_SEED_RANKING = 23
_SEED_CONTRASTS = 37
_SEED_PROBE = 41
_SEED_CELL_A = 53
_SEED_CELL_B = 59
_SEED_CONTAMINATION = 67


@dataclass
class RunResults:
    config: GateConfig
    summary: IngestionSummary
    sections: frozenset[str]
    rs_results: dict[str, RepetitionStabilityResult] = field(default_factory=dict)
    rs_skipped: tuple[str, ...] = ()
    agreement_aggregate: AgreementResult | None = None
    agreement_dimensions: dict[str, AgreementResult] = field(default_factory=dict)
    full_ranking: tuple[str, ...] = ()
    rank_dist: RankDistribution | None = None
    contrasts: ContrastReport | None = None
    mde_plan: MdePlan | None = None
    lofo: tuple[LofoResult, ...] = ()
    single_judge: SingleJudgeAnalysis | None = None
    probe: ProbeResult | None = None
    cell_a: adv.CellVerdict | None = None
    cell_b: adv.CellVerdict | None = None
    anchor_probe: adv.AnchorProbeResult | None = None
    halo_checks: tuple[adv.HaloCheck, ...] = ()
    token_tails: dict[str, adv.TokenTail] = field(default_factory=dict)
    length_corr: float | None = None
    contamination: adv.ContaminationReport | None = None
    verdicts: tuple[VerdictTuple, ...] = ()
    sensitivity: tuple[GateSensitivityRow, ...] = ()
    gaps: tuple[str, ...] = ()


def check_lock(records: RecordSet, config: GateConfig) -> None:
    if records.lock_hash != config.lock_hash:
        raise LockMismatchError(
            "record set was ingested under lock "
            f"{records.lock_hash[:12]}... but analysis config locks to "
            f"{config.lock_hash[:12]}..."
        )


def _regime_pair_payloads(
    records: RecordSet,
    ratings_by_judge: Mapping[str, Mapping[str, int]],
    config: GateConfig,
) -> dict[str, dict[tuple[str, str], tuple[list[int], list[int]]]]:
    """Per-regime pairwise-aligned honest ratings for the kappa bootstrap."""
    index = records.trajectory_index()
    judges = config.judge_ids
    payloads: dict[str, dict[tuple[str, str], tuple[list[int], list[int]]]] = {}
    from itertools import combinations

    for j1, j2 in combinations(judges, 2):
        common = set(ratings_by_judge[j1]) & set(ratings_by_judge[j2])
        for item in sorted(common):
            trajectory = index.get(item)
            if trajectory is None or trajectory.cell is not Cell.HONEST:
                continue
            pair_map = payloads.setdefault(trajectory.regime_id, {})
            a, b = pair_map.setdefault((j1, j2), ([], []))
            a.append(ratings_by_judge[j1][item])
            b.append(ratings_by_judge[j2][item])
    return payloads


def kappa_bar_ci(
    records: RecordSet,
    ratings_by_judge: Mapping[str, Mapping[str, int]],
    config: GateConfig,
    seed: int,
) -> tuple[float, float]:
    """Regime-cluster bootstrap CI for the mean pairwise kappa."""
    payloads = _regime_pair_payloads(records, ratings_by_judge, config)

    def statistic(drawn: list[dict[tuple[str, str], tuple[list[int], list[int]]]]) -> float:
        kappas = []
        pairs = sorted({pair for payload in drawn for pair in payload})
        for pair in pairs:
            a: list[int] = []
            b: list[int] = []
            for payload in drawn:
                if pair in payload:
                    a.extend(payload[pair][0])
                    b.extend(payload[pair][1])
            kappas.append(quadratic_weighted_kappa(a, b))
        return float(np.mean(kappas))

    summary, _ = regime_cluster_bootstrap(
        payloads,
        statistic,
        config.bootstrap_B,
        seed,
        ci_level=config.ci_level,
        statistic_name="kappa_bar",
    )
    return summary.ci_lo, summary.ci_hi


def _scores_by_judge(
    rater_scores: Sequence[RaterScore],
    trajectory_ids: set[str],
    judges: Sequence[str],
) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {j: {} for j in judges}
    for score in rater_scores:
        if score.judge_id in out and score.trajectory_id in trajectory_ids:
            out[score.judge_id][score.trajectory_id] = score.aggregate_mean
    return out


def _probe_judge(records: RecordSet, config: GateConfig) -> str | None:
    """Judge scoring cell=probe trajectories, if one exists off the panel."""
    probe_ids = {
        t.trajectory_id for t in records.trajectories if t.cell is Cell.PROBE
    }
    if not probe_ids:
        return None
    panel = set(config.judge_ids)
    judges = sorted(
        {c.judge_id for c in records.calls if c.trajectory_id in probe_ids} - panel
    )
    return judges[0] if judges else None


def default_claims(config: GateConfig) -> tuple[ClaimScope, ...]:
    return (
        ClaimScope.aggregate_ranking(),
        *(ClaimScope.per_dimension(d) for d in config.rubric_dimensions),
    )


def run_full_analysis(
    records: RecordSet,
    config: GateConfig,
    *,
    sections: frozenset[str] | set[str] = ALL_SECTIONS,
    claims: Sequence[ClaimScope] | None = None,
    alt_cutoffs: Sequence[tuple[float, float]] = ((0.5, 0.25),),
    seed: int | None = None,
    anchor_probe_data: tuple[Mapping[str, float], Mapping[str, float], Mapping[str, str], str]
    | None = None,
) -> RunResults:
    """Run the requested analysis sections over a locked record set.

    ``anchor_probe_data`` optionally supplies (scores_before, scores_after,
    composer_by_trajectory, dimension) from a single-judge re-judging under
    rewritten anchors; when present the anchor-specificity analysis joins the
    adversarial section.
    """
    check_lock(records, config)
    sections = frozenset(sections)
    base_seed = config.master_seed if seed is None else seed
    results = RunResults(config=config, summary=records.summary(), sections=sections)
    gaps: list[str] = []

    rater_scores = average_trials(records)
    rows = panel_scores(records, rater_scores)
    honest = honest_scores(rows)
    results.mde_plan = config_mde(config)

    if "agreement" in sections:
        trials_by_judge: dict[str, list] = {j: [] for j in config.judge_ids}
        for call in records.calls:
            if call.judge_id in trials_by_judge:
                trials_by_judge[call.judge_id].append(call)
        skipped = []
        for judge, calls in trials_by_judge.items():
            try:
                results.rs_results[judge] = repetition_stability(calls, config)
            except RsUndefinedError:
                skipped.append(judge)
        results.rs_skipped = tuple(sorted(skipped))

        honest_ids = {t.trajectory_id for t in records.trajectories if t.cell is Cell.HONEST}
        honest_raters = [s for s in rater_scores if s.trajectory_id in honest_ids]
        aggregate = aggregate_kappa_bar(honest_raters, config)
        ratings = aggregate_ratings(honest_raters, config.judge_ids)
        aggregate = aggregate.with_ci(
            kappa_bar_ci(records, ratings, config, base_seed + _SEED_KAPPA_CI)
        )
        results.agreement_aggregate = aggregate
        for dim, result in per_dimension_kappa_bar(honest_raters, config).items():
            dim_ratings = dimension_ratings(honest_raters, config.judge_ids, dim)
            dim_seed = base_seed + _SEED_KAPPA_CI + 1 + config.rubric_dimensions.index(dim)
            results.agreement_dimensions[dim] = result.with_ci(
                kappa_bar_ci(records, dim_ratings, config, dim_seed)
            )

    results.full_ranking = rank_composers(composer_means(honest))

    if "bootstrap" in sections:
        rankings = bootstrap_rankings(honest, config, seed=base_seed + _SEED_RANKING)
        results.rank_dist = rank_distribution(rankings)

    if "contrasts" in sections:
        results.contrasts = pairwise_contrasts(
            honest, config, seed=base_seed + _SEED_CONTRASTS
        )
        gaps.extend(results.contrasts.gaps)

    if "stability" in sections:
        results.lofo = lofo_analysis(records, rater_scores, config)
        results.single_judge = single_judge_rankings(
            records, rater_scores, config, with_contrasts="contrasts" in sections
        )
        probe_judge = _probe_judge(records, config)
        if probe_judge is not None:
            probe_raters = [s for s in rater_scores if s.judge_id == probe_judge]
            index = records.trajectory_index()
            probe_composers = sorted(
                {
                    index[s.trajectory_id].composer_id
                    for s in probe_raters
                    if index[s.trajectory_id].cell is Cell.PROBE
                }
            )
            if len(probe_composers) == 2:
                ordered = sorted(
                    probe_composers,
                    key=lambda c: results.full_ranking.index(c)
                    if c in results.full_ranking
                    else len(results.full_ranking),
                )
                results.probe = fourth_judge_probe(
                    records,
                    probe_raters,
                    (ordered[0], ordered[1]),
                    config,
                    seed=base_seed + _SEED_PROBE,
                )
            else:
                gaps.append(
                    f"probe data covers {len(probe_composers)} composers; expected 2"
                )

    if "adversarial" in sections:
        a_rows = cell_rows(rows, Cell.CELL_A)
        b_rows = cell_rows(rows, Cell.CELL_B)
        if a_rows:
            results.cell_a = adv.cell_a_verdict(
                a_rows, honest, config, seed=base_seed + _SEED_CELL_A
            )
        if b_rows:
            context = {"cell_a": results.cell_a.p_value} if results.cell_a else {}
            results.cell_b = adv.cell_b_trichotomy(
                b_rows,
                honest,
                config,
                holm_context=context,
                seed=base_seed + _SEED_CELL_B,
            )
        honest_ids = {r.trajectory_id for r in honest}
        halos: list[adv.HaloCheck] = []
        for cell, cell_rows_ in ((Cell.CELL_A, a_rows), (Cell.CELL_B, b_rows)):
            if not cell_rows_:
                continue
            cell_ids = {r.trajectory_id for r in cell_rows_}
            halos.append(
                adv.lofo_halo_check(
                    _scores_by_judge(rater_scores, cell_ids, config.judge_ids),
                    _scores_by_judge(rater_scores, honest_ids, config.judge_ids),
                    config.in_family_judge_for(cell.value),
                    config,
                    cell=cell.value,
                )
            )
        results.halo_checks = tuple(halos)
        results.token_tails = adv.token_tail_fractions(
            records.trajectories, config.token_threshold
        )
        try:
            results.length_corr = adv.length_score_correlation(rows)
        except (ValueError, UndefinedCorrelationError):
            results.length_corr = None
            gaps.append("length-score correlation undefined on this data")
        if config.post_cutoff_regime is not None:
            results.contamination = adv.contamination_probe(
                rows, config, seed=base_seed + _SEED_CONTAMINATION
            )
            gaps.extend(results.contamination.gaps)
        if anchor_probe_data is not None:
            before, after, owner, dimension = anchor_probe_data
            results.anchor_probe = adv.anchor_probe_analysis(
                before, after, owner, dimension, config, seed=base_seed + 71
            )

    if "verdict" in sections:
        claim_list = tuple(claims) if claims is not None else default_claims(config)
        cells = tuple(v for v in (results.cell_a, results.cell_b) if v is not None)
        verdict_rows: list[VerdictTuple] = []
        for claim in claim_list:
            if claim.kind is ClaimKind.PER_DIMENSION_RANKING:
                source = results.agreement_dimensions.get(claim.dimension)
            else:
                source = results.agreement_aggregate
            if source is None:
                gaps.append(f"claim {claim.label}: agreement section missing, skipped")
                continue
            agreement = agreement_gate(source.kappa_bar, config)
            probe = results.probe
            if (
                probe is not None
                and claim.kind is ClaimKind.PAIRWISE_CONTRAST
                and set(probe.disputed_pair) != set(claim.pair)
            ):
                probe = None
            stability = resolve_stability(
                claim, results.lofo, probe, full_ranking=results.full_ranking
            )
            adversarial = resolve_adversarial(
                claim,
                cells,
                results.halo_checks,
                token_tails=results.token_tails,
                config=config,
            )
            evidence = [
                {"kind": "agreement", "ref": f"kappa_bar={source.kappa_bar:.4f}"},
                {
                    "kind": "stability",
                    "ref": "lofo_rho="
                    + ",".join(f"{r.dropped_judge}:{r.rho_vs_full:.2f}" for r in results.lofo),
                },
            ]
            for cell_verdict in cells:
                evidence.append(
                    {"kind": "adversarial", "ref": f"{cell_verdict.cell}={cell_verdict.verdict}"}
                )
            verdict_rows.append(
                assemble_verdict(claim, agreement, stability, adversarial, evidence)
            )
        results.verdicts = tuple(verdict_rows)
        if results.agreement_aggregate is not None:
            scoped: dict[str, AgreementResult] = {"aggregate": results.agreement_aggregate}
            scoped.update(results.agreement_dimensions)
            results.sensitivity = gate_sensitivity(scoped, alt_cutoffs, config)

    results.gaps = tuple(gaps)
    return results
