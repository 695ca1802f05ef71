"""Acceptance suite: one test per release criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion.
"""

from __future__ import annotations

import sys
import time
from itertools import product

import numpy as np
import pytest

from panelgate.adversarial import (
    VERDICT_H1,
    VERDICT_H1_PRIME,
    cell_b_trichotomy,
)
from panelgate.agreement import quadratic_weighted_kappa, repetition_stability
from panelgate.inference import regime_cluster_bootstrap
from panelgate.records import Cell, JudgeCallRecord, cell_rows, honest_scores, panel_scores, average_trials
from panelgate.simulate import (
    SimCell,
    SimComposer,
    SimConfig,
    SimJudge,
    SimRegime,
    TersePenalty,
    generate_panel,
)
from panelgate.verdicts import (
    AdversarialStatus,
    AgreementStatus,
    ClaimScope,
    PublicationLevel,
    StabilityStatus,
    assemble_verdict,
    publication_level,
)

from test_agreement import brute_force_qwk


def _report(criterion: str, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: PASS ({detail})", file=sys.stderr)


# ---------------------------------------------------------------------------
# Criterion 1: kappa oracle equivalence


def test_criterion_1_kappa_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(20260101)
    checked = 0
    worst = 0.0
    while checked < 1000:
        n = int(rng.integers(2, 13))
        a = rng.integers(1, 6, size=n).tolist()
        b = rng.integers(1, 6, size=n).tolist()
        if len(set(a)) == 1 and a == b:
            continue
        value = quadratic_weighted_kappa(a, b)
        oracle = brute_force_qwk(a, b)
        worst = max(worst, abs(value - oracle))
        assert abs(value - oracle) <= 1e-12
        checked += 1
    assert quadratic_weighted_kappa([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]) == 1.0
    assert quadratic_weighted_kappa([1, 5], [5, 1]) == -1.0
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _report("1 kappa-oracle", f"1000 pairs, max |diff| {worst:.1e}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Criterion 2: Holm FWER control


def test_criterion_2_holm_fwer_control():
    start = time.perf_counter()
    rng = np.random.default_rng(20260202)
    n_families, m, alpha = 10_000, 36, 0.05
    composers, dims, n_obs = 4, 6, 40
    # Global null: identical composers; per-family composer-by-dimension
    # sample means share samples across the 36 pairwise contrasts, giving
    # the family its real dependence structure.
    means = rng.normal(0.0, 1.0 / np.sqrt(n_obs), size=(n_families, composers, dims))
    pairs = [(i, j) for i in range(composers) for j in range(i + 1, composers)]
    z = np.stack(
        [
            (means[:, i, :] - means[:, j, :]) / np.sqrt(2.0 / n_obs)
            for i, j in pairs
        ],
        axis=1,
    ).reshape(n_families, m)
    from statistics import NormalDist

    p = 2.0 * np.vectorize(NormalDist().cdf)(-np.abs(z))
    # Vectorised Holm: sort ascending, reject while p_(i) <= alpha/(m-i).
    p_sorted = np.sort(p, axis=1)
    thresholds = alpha / (m - np.arange(m))
    any_rejection = p_sorted[:, 0] <= thresholds[0]
    fwer = float(any_rejection.mean())
    elapsed = time.perf_counter() - start
    assert fwer <= alpha + 0.02
    assert elapsed < 60.0
    _report("2 holm-fwer", f"family-wise rate {fwer:.4f} <= {alpha + 0.02}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 3: repetition-stability identities


def test_criterion_3_rs_identities(config):
    dims = config.rubric_dimensions

    def calls(per_trajectory):
        out = []
        for tid, trials in per_trajectory.items():
            for i, value in enumerate(trials, start=1):
                out.append(
                    JudgeCallRecord(
                        trajectory_id=tid,
                        judge_id="j",
                        judge_family="fam",
                        trial_index=i,
                        dimension_scores={d: value for d in dims},
                    )
                )
        return out

    exact_one = repetition_stability(calls({"t1": [3, 3, 3], "t2": [5, 5, 5]}), config)
    assert exact_one.rs == pytest.approx(1.0)

    exact_zero = repetition_stability(calls({"t1": [1, 5, 3], "t2": [1, 5, 3]}), config)
    assert exact_zero.rs == pytest.approx(0.0, abs=1e-12)

    rng = np.random.default_rng(33)
    sw, sb = 0.4, 0.8
    noisy = []
    for t in range(1000):
        base = 3.0 + rng.normal(0, sb)
        for trial in (1, 2, 3):
            value = int(np.clip(round(base + rng.normal(0, sw)), 1, 5))
            noisy.append(
                JudgeCallRecord(
                    trajectory_id=f"t{t:04d}",
                    judge_id="j",
                    judge_family="fam",
                    trial_index=trial,
                    dimension_scores={d: value for d in dims},
                )
            )
    simulated = repetition_stability(noisy, config)
    expected = 1 - sw**2 / (sw**2 + sb**2)
    assert simulated.rs == pytest.approx(expected, abs=0.02)
    _report(
        "3 rs-identities",
        f"RS=1 exact, RS=0 exact, simulated {simulated.rs:.4f} vs {expected:.4f}",
    )


# ---------------------------------------------------------------------------
# Criterion 4: bootstrap correctness and determinism


def test_criterion_4_bootstrap_correctness():
    clusters = {f"r{i}": float(i + 1) for i in range(5)}
    summary, _ = regime_cluster_bootstrap(clusters, lambda d: 4.25, 500, seed=9)
    assert (summary.ci_lo, summary.ci_hi) == (4.25, 4.25)

    values = [1.0, 2.0, 3.0, 4.0, 5.0]
    exhaustive = np.asarray([np.mean(draw) for draw in product(values, repeat=5)])
    oracle = np.quantile(exhaustive, [0.025, 0.975], method="linear")
    summary, _ = regime_cluster_bootstrap(
        clusters, lambda d: float(np.mean(d)), 10_000, seed=77
    )
    assert summary.ci_lo == pytest.approx(oracle[0], abs=0.05)
    assert summary.ci_hi == pytest.approx(oracle[1], abs=0.05)

    stat = lambda d: float(np.mean(d))
    _, serial = regime_cluster_bootstrap(clusters, stat, 800, seed=123)
    _, parallel = regime_cluster_bootstrap(clusters, stat, 800, seed=123, parallel=True)
    assert serial.tobytes() == parallel.tobytes()
    _report(
        "4 bootstrap",
        f"enumeration CI [{oracle[0]:.3f}, {oracle[1]:.3f}] matched; serial==parallel",
    )


# ---------------------------------------------------------------------------
# Criterion 5: calibrated-fixture regression


def test_criterion_5_calibrated_fixture(fixture_run):
    results = fixture_run.results
    agg = results.agreement_aggregate
    assert 0.67 <= agg.kappa_bar <= 0.77

    kappas = {d: r.kappa_bar for d, r in results.agreement_dimensions.items()}
    lowest = min(kappas, key=kappas.get)
    assert 0.15 <= kappas[lowest] <= 0.25
    assert all(v >= 0.55 for d, v in kappas.items() if d != lowest)

    assert results.rank_dist.per_composer_rank1_fraction["aster"] == 1.0

    lofo = {r.dropped_judge: r for r in results.lofo}
    assert sum(1 for r in results.lofo if r.rho_vs_full == pytest.approx(1.0)) == 2
    assert lofo["amber"].trigger_fired and lofo["amber"].rank1_preserved

    assert results.cell_a.verdict == "A_pass"
    assert results.cell_a.p_value == pytest.approx(1 / fixture_run.config.permutation_N)
    assert results.cell_b.verdict == "H1_prime"
    assert -3.1 <= results.cell_b.delta <= -2.5
    for check in results.halo_checks:
        assert check.halo == pytest.approx(0.0, abs=0.1)
    assert results.contamination.results["aggregate"].p_value > 0.5

    assert fixture_run.elapsed < 30.0
    _report(
        "5 calibrated-fixture",
        f"kappa {agg.kappa_bar:.4f}, {lowest} {kappas[lowest]:.4f}, "
        f"cellB {results.cell_b.delta:.2f}, end-to-end {fixture_run.elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# Criterion 6: verdict-logic totality


def test_criterion_6_verdict_totality():
    combos = 0
    for agreement, stability, adversarial in product(
        AgreementStatus, StabilityStatus, AdversarialStatus
    ):
        level = publication_level(
            agreement, stability, adversarial, ClaimScope.aggregate_ranking()
        )
        combos += 1
        if (
            agreement is AgreementStatus.HALT
            or stability is StabilityStatus.JUDGE_DEPENDENT
            or adversarial is AdversarialStatus.CONTAMINATED
        ):
            assert level is PublicationLevel.NO_CLAIM
        elif (agreement, stability, adversarial) == (
            AgreementStatus.PUBLISH,
            StabilityStatus.STABLE,
            AdversarialStatus.PASSED,
        ):
            assert level is PublicationLevel.HEADLINE
        else:
            assert level is PublicationLevel.QUALIFIED
    assert combos == 36

    worked_1 = assemble_verdict(
        ClaimScope.aggregate_ranking(),
        AgreementStatus.PUBLISH,
        StabilityStatus.STABLE,
        AdversarialStatus.CONSTRUCT_SENSITIVE,
    )
    assert worked_1.permitted_publication_level is PublicationLevel.QUALIFIED
    worked_2 = assemble_verdict(
        ClaimScope.pairwise("clover", "dahlia"),
        AgreementStatus.PUBLISH,
        StabilityStatus.TIE_CLASS,
        AdversarialStatus.CONSTRUCT_SENSITIVE,
    )
    assert worked_2.permitted_publication_level is PublicationLevel.NO_CLAIM
    _report("6 verdict-totality", "36 combinations + both worked verdicts")


# ---------------------------------------------------------------------------
# Criterion 7: detection power sweep


DIMS = (
    "action_coherence",
    "risk_alignment",
    "uncertainty_handling",
    "position_sizing",
    "information_use",
    "constraint_awareness",
)


def _sweep_sim(penalty: float, seed: int) -> SimConfig:
    means = {d: 4.3 for d in DIMS}
    composers = (
        SimComposer(
            composer_id="comp_a",
            family="alpha",
            regime_means={"r1": dict(means), "r2": dict(means)},
            quality_sd=0.3,
            dimension_sd=0.2,
            token_mean=150.0,
            token_sd=20.0,
        ),
    )
    judges = tuple(
        SimJudge(
            judge_id=f"judge_{name}",
            family=name,
            noise_sd={d: 0.3 for d in DIMS},
            terse_penalty=TersePenalty(threshold=60, magnitude=penalty) if penalty else None,
        )
        for name in ("amber", "beryl", "coral")
    )
    cells = (
        SimCell(
            cell=Cell.CELL_B,
            composer_id="comp_a",
            n=50,
            means=dict(means),  # honest-level substance
            quality_sd=0.2,
            token_mean=45.0,
            token_sd=6.0,
        ),
    )
    return SimConfig(
        composers=composers,
        regimes=(SimRegime("r1", {"btc": 100}), SimRegime("r2", {"btc": 100})),
        judges=judges,
        cells=cells,
        seed=seed,
        rubric_dimensions=DIMS,
    )


def test_criterion_7_detection_power():
    start = time.perf_counter()
    outcomes = {2.8: [], 0.0: []}
    for penalty in (2.8, 0.0):
        for k in range(100):
            sim = _sweep_sim(penalty, seed=31000 + k)
            config = sim.gate_config(bootstrap_B=400, permutation_N=200)
            records = generate_panel(sim, config)
            rows = panel_scores(records, average_trials(records))
            verdict = cell_b_trichotomy(
                cell_rows(rows, Cell.CELL_B),
                honest_scores(rows),
                config,
                holm_context={"cell_a": 0.0001},
            )
            outcomes[penalty].append(verdict.verdict)
    h1_prime_rate = np.mean([v == VERDICT_H1_PRIME for v in outcomes[2.8]])
    h1_rate = np.mean([v == VERDICT_H1 for v in outcomes[0.0]])
    elapsed = time.perf_counter() - start
    assert h1_prime_rate >= 0.99
    assert h1_rate >= 0.95
    _report(
        "7 detection-power",
        f"H1' rate {h1_prime_rate:.2f} at penalty 2.8, H1 rate {h1_rate:.2f} at 0, "
        f"{elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# Criterion 8: gate sensitivity under stricter cutoffs


def test_criterion_8_gate_sensitivity(fixture_run):
    rows = {
        (r.scope, r.publish_threshold): r
        for r in fixture_run.results.sensitivity
        if r.publish_threshold == 0.5
    }
    aggregate = rows[("aggregate", 0.5)]
    assert aggregate.band_point is AgreementStatus.PUBLISH

    weak = rows[("constraint_awareness", 0.5)]
    assert weak.band_point is AgreementStatus.HALT
    # CI upper bound below the stricter methodology cutoff: robust halt.
    assert weak.ci[1] < 0.25
    assert weak.band_ci_upper is AgreementStatus.HALT
    _report(
        "8 gate-sensitivity",
        f"aggregate stays publish at (0.5, 0.25); constraint_awareness CI upper "
        f"{weak.ci[1]:.4f} < 0.25 -> halt",
    )
