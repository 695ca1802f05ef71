#!/usr/bin/env python3
"""Build, calibrate, and commit the synthetic panel fixture.

The fixture is designed so the full pipeline reproduces the target shape:
a dominant rank-1 composer over a tight lower pack, one unreliable rubric
dimension, a leave-one-family-out flip of ranks 2/4 under the multi-trial
judge drop, adversarial cells with a deep terse penalty, a null
contamination probe, and an out-of-family probe that ties the bottom pair.

Run from the repo root:  python3 scripts/build_fixture.py [--quick]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from panelgate import adversarial as adv
from panelgate.agreement import aggregate_kappa_bar, per_dimension_kappa_bar, repetition_stability
from panelgate.config import DEFAULT_RUBRIC, GateConfig, MdeInputs
from panelgate.inference import (
    bootstrap_rankings,
    composer_means,
    pairwise_contrasts,
    rank_composers,
    rank_distribution,
    significance_flags,
    contrast_overlap,
)
from panelgate.records import Cell, average_trials, cell_rows, honest_scores, panel_scores
from panelgate.simulate import (
    CalibrationTarget,
    SimCell,
    SimComposer,
    SimConfig,
    SimJudge,
    SimProbe,
    SimRegime,
    calibrate_fixture,
    default_fixture_path,
    generate_panel,
    save_fixture,
)
from panelgate.stability import fourth_judge_probe, lofo_analysis, single_judge_rankings

DIMS = DEFAULT_RUBRIC
AC, RA, UH, PS, IU, CA = DIMS

# Per-dimension base means. The aster gap over the pack is large on every
# dimension (the 18 always-significant contrasts); two designed lower-pack
# contrasts (basil>clover on action_coherence, basil>dahlia on
# risk_alignment) are wiggle-free and constant-sign; everything else in the
# lower pack carries sign-alternating regime wiggles.
# Latent bases are set above the realized targets because rounding and the
# scale ceiling compress high scores; gaps are designed in realized space.
BASE_MEANS = {
    "aster": {AC: 4.88, RA: 4.80, UH: 4.72, PS: 4.72, IU: 4.82, CA: 4.50},
    "basil": {AC: 4.58, RA: 4.46, UH: 4.38, PS: 4.38, IU: 4.42, CA: 4.18},
    "clover": {AC: 4.24, RA: 4.32, UH: 4.30, PS: 4.28, IU: 4.30, CA: 4.12},
    "dahlia": {AC: 4.40, RA: 4.10, UH: 4.06, PS: 4.10, IU: 4.22, CA: 4.08},
}
COMPOSER_FAMILY = {
    "aster": "amber",
    "basil": "beryl",
    "clover": "coral",
    "dahlia": "dalia",
}
TOKEN_MODEL = {
    "aster": (140.0, 20.0),
    "basil": (115.0, 28.0),
    "clover": (44.0, 16.0),
    "dahlia": (290.0, 25.0),
}

REGIMES = ("r1", "r2", "r3", "r4", "r5")
REGIME_EFFECT = {r: 0.0 for r in REGIMES}
WIGGLE_GAMMA = 0.20
# Every regime carries the same wiggle magnitude (z in {-1,+1}), so the
# rounding-curvature loss is identical across regimes and the post-cutoff
# contamination comparison stays null by construction. Each composer's
# wiggle amplitudes sum to zero across dimensions, leaving aggregates at the
# designed levels; the designed-significant dimensions stay wiggle-free for
# their composers (basil/clover on action_coherence, basil/dahlia on
# risk_alignment).
WIGGLE_Z = {
    "basil": (1, -1, 1, -1, 1),
    "clover": (-1, 1, 1, -1, -1),
    "dahlia": (1, 1, -1, -1, -1),
}
WIGGLE_S = {
    "basil": {AC: 0.0, RA: 0.0, UH: 1.0, PS: -1.0, IU: 0.5, CA: -0.5},
    "clover": {AC: 0.0, RA: 1.25, UH: -0.75, PS: -0.75, IU: 0.5, CA: -0.25},
    "dahlia": {AC: 1.5, RA: 0.0, UH: -1.0, PS: 0.5, IU: -0.75, CA: -0.25},
}

# Aggregate-level judge preferences; pairwise they cancel in the full panel.
# Dropping amber leaves beryl's tilt unopposed: basil sinks below the pack,
# dahlia rises, swapping ranks 2 and 4 (rho 0.2, rank-1 untouched).
COMPOSER_BIAS = {
    "judge_amber": {"basil": 0.28, "dahlia": -0.28},
    "judge_beryl": {"basil": -0.28, "clover": 0.08, "dahlia": 0.24},
    "judge_coral": {"clover": -0.08, "dahlia": 0.04},
}
# Preference loading mostly avoids the two high-agreement dimensions so their
# kappas stay high; mean weight is 1, preserving the aggregate bias.
BIAS_WEIGHTS = {AC: 0.5, RA: 0.5, UH: 1.25, PS: 1.25, IU: 1.25, CA: 1.25}

# Judge noise per dimension (beryl/coral). Amber runs at a fraction of it so
# its three trials clear the repetition-stability gate, except on
# constraint_awareness where every judge is equally unsure (its low kappa
# comes from a small true-score spread, not from one noisy judge).
NOISE = {AC: 0.05, RA: 0.09, UH: 0.17, PS: 0.17, IU: 0.30, CA: 0.62}
AMBER_NOISE = {AC: 0.015, RA: 0.027, UH: 0.051, PS: 0.051, IU: 0.09, CA: 0.62}
QUALITY_SD = 0.70
# Overall rationale quality barely moves constraint awareness; that
# dimension is its own construct with a small true spread.
QUALITY_LOADING = {AC: 1.0, RA: 1.0, UH: 1.0, PS: 1.0, IU: 1.0, CA: 0.12}
DIMENSION_SD = {AC: 0.40, RA: 0.38, UH: 0.36, PS: 0.34, IU: 0.32, CA: 0.35}


def regime_means(composer: str) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for i, regime in enumerate(REGIMES):
        means = {}
        for dim in DIMS:
            value = BASE_MEANS[composer][dim] + REGIME_EFFECT[regime]
            if composer in WIGGLE_Z:
                value += WIGGLE_GAMMA * WIGGLE_Z[composer][i] * WIGGLE_S[composer][dim]
            means[dim] = round(value, 4)
        out[regime] = means
    return out


def base_sim(seed: int = 20260141) -> SimConfig:
    composers = tuple(
        SimComposer(
            composer_id=name,
            family=COMPOSER_FAMILY[name],
            regime_means=regime_means(name),
            quality_sd=QUALITY_SD,
            quality_loading=dict(QUALITY_LOADING),
            dimension_sd=dict(DIMENSION_SD),
            token_mean=TOKEN_MODEL[name][0],
            token_sd=TOKEN_MODEL[name][1],
        )
        for name in BASE_MEANS
    )
    regimes = tuple(
        SimRegime(r, {"btc": 50} if r in ("r1", "r2") else {"btc": 30, "sol": 20})
        for r in REGIMES
    )
    judges = (
        SimJudge(
            judge_id="judge_amber",
            family="amber",
            trials=3,
            noise_sd=dict(AMBER_NOISE),
            composer_bias=COMPOSER_BIAS["judge_amber"],
            bias_dimension_weights=dict(BIAS_WEIGHTS),
        ),
        SimJudge(
            judge_id="judge_beryl",
            family="beryl",
            noise_sd=dict(NOISE),
            composer_bias=COMPOSER_BIAS["judge_beryl"],
            bias_dimension_weights=dict(BIAS_WEIGHTS),
        ),
        SimJudge(
            judge_id="judge_coral",
            family="coral",
            noise_sd=dict(NOISE),
            composer_bias=COMPOSER_BIAS["judge_coral"],
            bias_dimension_weights=dict(BIAS_WEIGHTS),
        ),
    )
    cells = (
        SimCell(
            cell=Cell.CELL_A,
            composer_id="aster",
            n=50,
            means={d: 1.40 for d in DIMS},
            quality_sd=0.12,
            token_mean=190.0,
            token_sd=35.0,
        ),
        SimCell(
            cell=Cell.CELL_B,
            composer_id="aster",
            n=50,
            means={d: 1.48 for d in DIMS},
            quality_sd=0.10,
            token_mean=45.0,
            token_sd=8.0,
        ),
    )
    probe = SimProbe(
        judge=SimJudge(
            judge_id="judge_onyx",
            family="onyx",
            noise_sd={d: 0.12 for d in DIMS},
        ),
        composer_means={"clover": 4.19, "dahlia": 4.23},
        n_per_composer=250,
        quality_sd=0.28,
    )
    return SimConfig(
        composers=composers,
        regimes=regimes,
        judges=judges,
        cells=cells,
        probe=probe,
        seed=seed,
        rubric_dimensions=DIMS,
    )


def gate_config(sim: SimConfig, *, bootstrap_B=1000, permutation_N=10000) -> GateConfig:
    return sim.gate_config(
        bootstrap_B=bootstrap_B,
        permutation_N=permutation_N,
        post_cutoff_regime="r5",
        mde_inputs=MdeInputs(sigma_d=1.0, power=0.8, n_pairs=93),
        in_family_judge=(("cell_a", "judge_amber"), ("cell_b", "judge_amber")),
    )


def evaluate(sim: SimConfig, names, *, permutation_N=3000, full=False):
    """Compute the named fixture statistics (lazily by group)."""
    names = list(names)
    config = gate_config(sim, permutation_N=10000 if full else permutation_N)
    records = generate_panel(sim, config)
    raters = average_trials(records)
    rows = panel_scores(records, raters)
    honest = honest_scores(rows)
    stats: dict[str, float] = {}

    def wanted(prefix):
        return full or any(n.startswith(prefix) for n in names)

    if wanted("kappa") or wanted("rs"):
        honest_ids = {t.trajectory_id for t in records.trajectories if t.cell is Cell.HONEST}
        honest_raters = [s for s in raters if s.trajectory_id in honest_ids]
        stats["kappa_bar:aggregate"] = aggregate_kappa_bar(honest_raters, config).kappa_bar
        per_dim = per_dimension_kappa_bar(honest_raters, config)
        for dim, result in per_dim.items():
            stats[f"kappa_bar:{dim}"] = result.kappa_bar
        stats["kappa_other_min"] = min(
            result.kappa_bar for dim, result in per_dim.items() if dim != CA
        )
        amber_calls = [c for c in records.calls if c.judge_id == "judge_amber"]
        stats["rs:judge_amber"] = repetition_stability(amber_calls, config).rs

    if wanted("rank1") or wanted("lofo"):
        rankings = bootstrap_rankings(honest, config, seed=sim.seed + 23)
        dist = rank_distribution(rankings)
        stats["rank1_fraction:aster"] = dist.per_composer_rank1_fraction.get("aster", 0.0)
        full_ranking = rank_composers(composer_means(honest))
        stats["full_ranking_ok"] = float(
            full_ranking == ("aster", "basil", "clover", "dahlia")
        )
        for drop in lofo_analysis(records, raters, config):
            stats[f"lofo_rho:{drop.dropped_judge}"] = drop.rho_vs_full
            stats[f"lofo_rank1:{drop.dropped_judge}"] = float(drop.rank1_preserved)

    if wanted("holm"):
        report = pairwise_contrasts(honest, config, seed=sim.seed + 37)
        flags = significance_flags(report)
        stats["holm_count:ensemble"] = float(sum(flags.values()))

    if wanted("cell") or wanted("halo"):
        a_rows = cell_rows(rows, Cell.CELL_A)
        b_rows = cell_rows(rows, Cell.CELL_B)
        verdict_a = adv.cell_a_verdict(a_rows, honest, config, seed=sim.seed + 53)
        stats["cell_a_p"] = verdict_a.p_value
        stats["cell_a_pass"] = float(verdict_a.verdict == "A_pass")
        verdict_b = adv.cell_b_trichotomy(
            b_rows, honest, config,
            holm_context={"cell_a": verdict_a.p_value}, seed=sim.seed + 59,
        )
        stats["cell_b_delta"] = verdict_b.delta
        stats["cell_b_h1prime"] = float(verdict_b.verdict == "H1_prime")
        honest_ids = {r.trajectory_id for r in honest}
        judges = config.judge_ids

        def by_judge(ids):
            out = {j: {} for j in judges}
            for s in raters:
                if s.judge_id in out and s.trajectory_id in ids:
                    out[s.judge_id][s.trajectory_id] = s.aggregate_mean
            return out

        for cell, rows_ in (("cell_a", a_rows), ("cell_b", b_rows)):
            ids = {r.trajectory_id for r in rows_}
            check = adv.lofo_halo_check(
                by_judge(ids), by_judge(honest_ids), "judge_amber", config, cell=cell
            )
            stats[f"halo:{cell}"] = check.halo
        stats["honest_mean"] = verdict_a.honest_mean

    if wanted("contamination"):
        report = adv.contamination_probe(rows, config, seed=sim.seed + 67)
        for split, result in report.results.items():
            stats[f"contamination_p:{split}"] = result.p_value
            stats[f"contamination_delta:{split}"] = result.delta

    if wanted("probe"):
        probe_raters = [s for s in raters if s.judge_id == "judge_onyx"]
        result = fourth_judge_probe(
            records, probe_raters, ("clover", "dahlia"), config, seed=sim.seed + 41
        )
        stats["probe_delta"] = result.delta
        stats["probe_lo"], stats["probe_hi"] = result.ci
        stats["probe_tie"] = float(result.tie_verdict == "tie")

    if wanted("r:") or wanted("tail"):
        stats["r:length_score"] = adv.length_score_correlation(rows)
        tails = adv.token_tail_fractions(records.trajectories, config.token_threshold)
        for composer, tail in tails.items():
            stats[f"tail:{composer}"] = tail.fraction

    if full:
        analysis = single_judge_rankings(records, raters, config, with_contrasts=True)
        ensemble = significance_flags(pairwise_contrasts(honest, config, seed=sim.seed + 37))
        for judge, report in analysis.contrast_reports.items():
            flags = significance_flags(report)
            stats[f"holm_count:{judge}"] = float(sum(flags.values()))
            overlap = contrast_overlap(ensemble, flags)
            stats[f"holm_overlap:{judge}"] = float(overlap.overlap)
        rhos = sorted(analysis.rho_matrix.values())
        stats["single_rho_min"], stats["single_rho_max"] = rhos[0], rhos[-1]
    return stats


PHASE_KAPPA_TARGETS = [
    CalibrationTarget("kappa_bar:aggregate", 0.69, 0.75),
    CalibrationTarget(f"kappa_bar:{CA}", 0.16, 0.24),
    CalibrationTarget(f"kappa_bar:{AC}", 0.89, 0.97),
    CalibrationTarget("kappa_other_min", 0.57, 1.0),
    CalibrationTarget("rs:judge_amber", 0.92, 1.0),
]

SEED_TARGETS = PHASE_KAPPA_TARGETS + [
    CalibrationTarget("rank1_fraction:aster", 1.0, 1.0),
    CalibrationTarget("full_ranking_ok", 1.0, 1.0),
    CalibrationTarget("lofo_rho:beryl", 0.97, 1.0),
    CalibrationTarget("lofo_rho:coral", 0.97, 1.0),
    CalibrationTarget("lofo_rho:amber", 0.10, 0.35),
    CalibrationTarget("lofo_rank1:amber", 1.0, 1.0),
    CalibrationTarget("holm_count:ensemble", 18, 22),
    CalibrationTarget("cell_a_pass", 1.0, 1.0),
    CalibrationTarget("cell_a_p", 0.0, 0.0011),
    CalibrationTarget("cell_b_delta", -2.95, -2.65),
    CalibrationTarget("cell_b_h1prime", 1.0, 1.0),
    CalibrationTarget("halo:cell_a", 0.0, 0.10),
    CalibrationTarget("halo:cell_b", 0.0, 0.10),
    CalibrationTarget("honest_mean", 4.25, 4.42),
    CalibrationTarget("contamination_p:aggregate", 0.66, 0.995),
    CalibrationTarget("contamination_p:asset:btc", 0.40, 0.70),
    CalibrationTarget("contamination_p:asset:sol", 0.20, 0.50),
    CalibrationTarget("contamination_delta:aggregate", -0.05, 0.05),
    CalibrationTarget("probe_delta", -0.08, 0.0),
    CalibrationTarget("probe_tie", 1.0, 1.0),
    CalibrationTarget("r:length_score", -0.127, -0.027),
    CalibrationTarget("tail:clover", 0.78, 0.90),
    CalibrationTarget("tail:aster", 0.0, 0.0),
    CalibrationTarget("tail:dahlia", 0.0, 0.0),
    CalibrationTarget("tail:basil", 0.004, 0.08),
]


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="skip the seed sweep")
    parser.add_argument("--probe-only", action="store_true", help="print stats for the base sim")
    parser.add_argument("--seed-grid", type=int, default=120)
    args = parser.parse_args()

    start = time.time()
    sim = base_sim()

    if args.probe_only:
        names = [t.name for t in SEED_TARGETS]
        stats = evaluate(sim, names, permutation_N=2000)
        for name in sorted(stats):
            print(f"  {name:36s} {stats[name]: .4f}")
        return 0

    # Phase 1: agreement calibration around the designed noise vector.
    kappa_grids = {
        f"noise:judge_beryl:{CA}": [1.25, 1.4, 1.55, 1.7, 1.9],
        f"noise:judge_coral:{CA}": [1.25, 1.4, 1.55, 1.7, 1.9],
        f"noise:judge_beryl:{AC}": [0.13, 0.17, 0.21, 0.26],
        f"noise:judge_coral:{AC}": [0.13, 0.17, 0.21, 0.26],
        "quality_sd": [0.24, 0.27, 0.30, 0.33, 0.36],
    }
    sim, achieved = calibrate_fixture(
        sim,
        PHASE_KAPPA_TARGETS,
        kappa_grids,
        lambda s, names: evaluate(s, names),
    )
    print("phase 1 (agreement) calibrated:")
    for name, value in achieved.items():
        print(f"  {name:36s} {value: .4f}")

    if not args.quick:
        # Phase 2: deterministic seed sweep for the distribution-shape targets.
        seed_grid = {"seed": [20260141 + k for k in range(args.seed_grid)]}
        sim, achieved = calibrate_fixture(
            sim,
            SEED_TARGETS,
            seed_grid,
            lambda s, names: evaluate(s, names),
            max_passes=1,
        )
        print(f"phase 2 (seed sweep) landed on seed {sim.seed}:")
        for name, value in achieved.items():
            print(f"  {name:36s} {value: .4f}")

    # Final full-strength evaluation for the committed record.
    final = evaluate(sim, [t.name for t in SEED_TARGETS], full=True)
    config = gate_config(sim)
    out = default_fixture_path()
    out.parent.mkdir(parents=True, exist_ok=True)
    save_fixture(out, sim, config, final)
    print(f"fixture saved to {out} in {time.time() - start:.1f}s")
    for name in sorted(final):
        print(f"  {name:36s} {final[name]: .4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
