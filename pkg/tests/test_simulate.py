from __future__ import annotations

import numpy as np
import pytest

from panelgate.adversarial import VERDICT_H1, VERDICT_H1_PRIME, cell_b_trichotomy, lofo_halo_check
from panelgate.agreement import aggregate_kappa_bar
from panelgate.errors import InfeasibleTargetError
from panelgate.records import (
    Cell,
    average_trials,
    canonical_lines,
    cell_rows,
    honest_scores,
    ordinal_round,
    panel_scores,
)
from panelgate.simulate import (
    CalibrationTarget,
    SimCell,
    SimComposer,
    SimConfig,
    SimJudge,
    SimRegime,
    SyntheticJudgeBackend,
    TersePenalty,
    TransientBackendError,
    apply_knob,
    calibrate_fixture,
    generate_panel,
    score_batch,
    validate_call,
)

DIMS = (
    "action_coherence",
    "risk_alignment",
    "uncertainty_handling",
    "position_sizing",
    "information_use",
    "constraint_awareness",
)


def _means(value):
    return {d: value for d in DIMS}


def small_sim(
    *,
    noise=0.0,
    trials=1,
    halo=0.0,
    terse_penalty=None,
    cells=(),
    quality_sd=0.0,
    composer_values=(4.4, 2.8),
    token_means=(120.0, 120.0),
    seed=5,
    cycles=10,
):
    composers = tuple(
        SimComposer(
            composer_id=f"comp_{chr(97 + i)}",
            family=("amber" if i == 0 else f"fam{i}"),
            regime_means={r: _means(v) for r in ("r1", "r2")},
            quality_sd=quality_sd,
            token_mean=token_means[i],
            token_sd=5.0,
        )
        for i, v in enumerate(composer_values)
    )
    judges = tuple(
        SimJudge(
            judge_id=f"judge_{name}",
            family=name,
            trials=trials if name == "amber" else 1,
            noise_sd={d: noise for d in DIMS},
            halo=halo if name == "amber" else 0.0,
            terse_penalty=terse_penalty,
        )
        for name in ("amber", "beryl", "coral")
    )
    return SimConfig(
        composers=composers,
        regimes=(
            SimRegime("r1", {"btc": cycles}),
            SimRegime("r2", {"btc": cycles}),
        ),
        judges=judges,
        cells=tuple(cells),
        seed=seed,
        rubric_dimensions=DIMS,
    )


# ---------------------------------------------------------------------------
# determinism


def test_generate_panel_deterministic():
    sim = small_sim(noise=0.4, trials=3, quality_sd=0.3)
    first = generate_panel(sim)
    second = generate_panel(sim)
    assert first == second
    assert list(canonical_lines(first)) == list(canonical_lines(second))


def test_generate_panel_seed_changes_output():
    sim = small_sim(noise=0.4, seed=5)
    other = small_sim(noise=0.4, seed=6)
    assert list(canonical_lines(generate_panel(sim))) != list(
        canonical_lines(generate_panel(other))
    )


def test_generate_panel_counts_and_tags():
    cells = (
        SimCell(cell=Cell.CELL_A, composer_id="comp_a", n=7, means=_means(1.4), token_mean=200),
        SimCell(cell=Cell.CELL_B, composer_id="comp_a", n=5, means=_means(1.5), token_mean=45),
    )
    sim = small_sim(cells=cells, trials=3)
    records = generate_panel(sim)
    by_cell = {}
    for t in records.trajectories:
        by_cell[t.cell] = by_cell.get(t.cell, 0) + 1
    assert by_cell[Cell.HONEST] == 2 * 2 * 10
    assert by_cell[Cell.CELL_A] == 7
    assert by_cell[Cell.CELL_B] == 5
    # amber contributes 3 trials, the others 1 each.
    assert len(records.calls) == (40 + 12) * 5


# ---------------------------------------------------------------------------
# zero-noise recovery


def test_zero_noise_zero_bias_recovers_truth():
    sim = small_sim(noise=0.0, trials=3)
    records = generate_panel(sim)
    scores = average_trials(records)
    for score in scores:
        composer = score.trajectory_id
        assert score.n_trials in (1, 3)
    # Every judge emits ordinal_round(true mean) identically.
    truth = {"comp_a": ordinal_round(4.4), "comp_b": ordinal_round(2.8)}
    index = records.trajectory_index()
    for call in records.calls:
        composer = index[call.trajectory_id].composer_id
        assert all(v == truth[composer] for v in call.dimension_scores.values())
    config = sim.gate_config()
    honest_raters = [s for s in scores]
    result = aggregate_kappa_bar(honest_raters, config)
    assert result.kappa_bar == pytest.approx(1.0)


def test_zero_noise_contrast_recovers_true_gap():
    sim = small_sim(noise=0.0)
    records = generate_panel(sim)
    rows = panel_scores(records, average_trials(records))
    means = {}
    for row in rows:
        means.setdefault(row.composer_id, []).append(row.aggregate)
    # Each composer mean is recovered within ordinal-rounding error <= 0.5.
    assert abs(np.mean(means["comp_a"]) - 4.4) <= 0.5
    assert abs(np.mean(means["comp_b"]) - 2.8) <= 0.5
    gap = float(np.mean(means["comp_a"]) - np.mean(means["comp_b"]))
    assert gap == pytest.approx(4.4 - 2.8, abs=1.0)


# ---------------------------------------------------------------------------
# bias mechanisms


def test_terse_penalty_hits_short_rationales_only():
    cells = (
        SimCell(
            cell=Cell.CELL_B,
            composer_id="comp_a",
            n=20,
            means=_means(4.4),  # honest-level substance
            token_mean=45.0,
            token_sd=3.0,
        ),
    )
    sim = small_sim(
        cells=cells,
        terse_penalty=TersePenalty(threshold=60, magnitude=2.8),
        token_means=(150.0, 150.0),
        composer_values=(4.4, 4.2),
        noise=0.4,
        quality_sd=0.2,
        cycles=30,
    )
    records = generate_panel(sim)
    rows = panel_scores(records, average_trials(records))
    config = sim.gate_config(bootstrap_B=300, permutation_N=300)
    verdict = cell_b_trichotomy(
        cell_rows(rows, Cell.CELL_B), honest_scores(rows), config, holm_context={"a": 0.001}
    )
    assert verdict.verdict == VERDICT_H1_PRIME
    # Rounding and clipping blunt the injected 2.8 shift a little.
    assert verdict.delta == pytest.approx(-2.8, abs=0.45)
    assert verdict.delta < -config.cellb_outer


def test_family_halo_links_to_measured_halo():
    # comp_a shares the amber family; an injected halo of h on the amber
    # judge should surface as a measured halo within +-0.1 at n = 50.
    h = 0.6
    cells = (
        SimCell(cell=Cell.CELL_B, composer_id="comp_a", n=50, means=_means(1.6), token_mean=45),
    )
    sim = small_sim(cells=cells, halo=h, noise=0.15, quality_sd=0.1, cycles=25)
    records = generate_panel(sim)
    raters = average_trials(records)
    config = sim.gate_config()
    honest_ids = {t.trajectory_id for t in records.trajectories if t.cell is Cell.HONEST}
    cell_ids = {t.trajectory_id for t in records.trajectories if t.cell is Cell.CELL_B}
    judges = config.judge_ids

    def by_judge(ids):
        out = {j: {} for j in judges}
        for s in raters:
            if s.judge_id in out and s.trajectory_id in ids:
                out[s.judge_id][s.trajectory_id] = s.aggregate_mean
        return out

    check = lofo_halo_check(by_judge(cell_ids), by_judge(honest_ids), "judge_amber", config)
    # The halo applies to cell and honest comp_a trajectories alike; the
    # cell-minus-honest gap moves only through the honest pool dilution
    # (comp_a is half the honest pool), so expect h * (1/3) * (1/2).
    assert check.halo == pytest.approx(h / 6, abs=0.1)
    assert check.applicable


# ---------------------------------------------------------------------------
# probe generation


def test_probe_trajectories_scored_by_probe_judge_only():
    from panelgate.simulate import SimProbe

    sim = small_sim()
    probe = SimProbe(
        judge=SimJudge(judge_id="judge_onyx", family="onyx", noise_sd={d: 0.1 for d in DIMS}),
        composer_means={"comp_a": 4.2, "comp_b": 4.16},
        n_per_composer=30,
        quality_sd=0.25,
    )
    sim = SimConfig(
        composers=sim.composers,
        regimes=sim.regimes,
        judges=sim.judges,
        probe=probe,
        seed=9,
        rubric_dimensions=DIMS,
    )
    records = generate_panel(sim)
    probe_ids = {t.trajectory_id for t in records.trajectories if t.cell is Cell.PROBE}
    assert len(probe_ids) == 60
    for call in records.calls:
        if call.trajectory_id in probe_ids:
            assert call.judge_id == "judge_onyx"
        else:
            assert call.judge_id != "judge_onyx"


# ---------------------------------------------------------------------------
# score_batch


class FlakyBackend(SyntheticJudgeBackend):
    """Fails transiently on first contact with selected trajectories."""

    def __init__(self, records, judge_id, flaky_ids, permanent_ids=()):
        super().__init__(records, judge_id)
        self.flaky = set(flaky_ids)
        self.permanent = set(permanent_ids)

    def score(self, batch, rubric):
        for t in batch:
            if t.trajectory_id in self.permanent:
                raise TransientBackendError(f"{t.trajectory_id} always fails")
            if t.trajectory_id in self.flaky:
                self.flaky.discard(t.trajectory_id)
                raise TransientBackendError(f"{t.trajectory_id} transient failure")
        return super().score(batch, rubric)


class CorruptingBackend(SyntheticJudgeBackend):
    """Returns an out-of-range score for one trajectory."""

    def __init__(self, records, judge_id, bad_id):
        super().__init__(records, judge_id)
        self.bad_id = bad_id

    def score(self, batch, rubric):
        calls = super().score(batch, rubric)
        out = []
        for call in calls:
            if call.trajectory_id == self.bad_id:
                scores = dict(call.dimension_scores)
                scores[rubric[0]] = 7
                call = type(call)(
                    trajectory_id=call.trajectory_id,
                    judge_id=call.judge_id,
                    judge_family=call.judge_family,
                    trial_index=call.trial_index,
                    dimension_scores=scores,
                )
            out.append(call)
        return out


def test_score_batch_clean_run():
    sim = small_sim(noise=0.2, trials=2)
    records = generate_panel(sim)
    backend = SyntheticJudgeBackend(records, "judge_amber")
    result = score_batch(backend, records.trajectories[:10], DIMS, batch_size=4)
    assert len(result.records) == 20  # two trials each
    assert not result.failures
    for call in result.records:
        validate_call(call, DIMS)


def test_score_batch_retries_transient_failures():
    sim = small_sim(noise=0.2)
    records = generate_panel(sim)
    flaky = {records.trajectories[3].trajectory_id}
    backend = FlakyBackend(records, "judge_beryl", flaky)
    result = score_batch(backend, records.trajectories[:10], DIMS, batch_size=5)
    assert len(result.records) == 10
    assert not result.failures


def test_score_batch_permanent_failures_surface():
    sim = small_sim(noise=0.2)
    records = generate_panel(sim)
    doomed = {t.trajectory_id for t in records.trajectories[:3]}
    backend = FlakyBackend(records, "judge_beryl", set(), permanent_ids=doomed)
    result = score_batch(backend, records.trajectories[:10], DIMS, batch_size=10)
    assert {t for t, _ in result.failures} == doomed
    assert len(result.records) == 7
    # 247-of-250 pattern: the run continues with failures surfaced.


def test_score_batch_rejects_invalid_scores():
    sim = small_sim(noise=0.2)
    records = generate_panel(sim)
    bad = records.trajectories[2].trajectory_id
    backend = CorruptingBackend(records, "judge_coral", bad)
    result = score_batch(backend, records.trajectories[:8], DIMS, batch_size=8)
    assert {t for t, _ in result.failures} == {bad}
    for call in result.records:
        validate_call(call, DIMS)


# ---------------------------------------------------------------------------
# calibrate_fixture


def _kappa_stat(sim, names):
    records = generate_panel(sim)
    scores = average_trials(records)
    config = sim.gate_config()
    stats = {}
    for name in names:
        if name == "kappa_bar:aggregate":
            stats[name] = aggregate_kappa_bar(list(scores), config).kappa_bar
    return stats


def test_calibrate_zero_noise_hits_kappa_one():
    base = small_sim(noise=0.0)
    sim, achieved = calibrate_fixture(
        base,
        [CalibrationTarget("kappa_bar:aggregate", 0.999, 1.0)],
        {},
        _kappa_stat,
    )
    assert achieved["kappa_bar:aggregate"] == pytest.approx(1.0)
    assert sim == base


def test_calibrate_searches_noise_knob():
    base = small_sim(noise=1.6, quality_sd=0.4)
    grids = {
        f"noise:judge_{name}": [1.6, 1.0, 0.6, 0.35, 0.2]
        for name in ("amber", "beryl", "coral")
    }
    sim, achieved = calibrate_fixture(
        base,
        [CalibrationTarget("kappa_bar:aggregate", 0.55, 0.95)],
        grids,
        _kappa_stat,
    )
    assert 0.55 <= achieved["kappa_bar:aggregate"] <= 0.95


def test_calibrate_contradictory_targets_infeasible():
    base = small_sim(noise=0.0)
    with pytest.raises(InfeasibleTargetError):
        calibrate_fixture(
            base,
            [
                CalibrationTarget("kappa_bar:aggregate", 0.999, 1.0),
                CalibrationTarget("kappa_bar:aggregate", 0.0, 0.0),
            ],
            {},
            _kappa_stat,
        )


def test_apply_knob_variants():
    sim = small_sim(noise=0.5)
    assert apply_knob(sim, "seed", 42).seed == 42
    scaled = apply_knob(sim, "noise:judge_amber", 0.5)
    judge = next(j for j in scaled.judges if j.judge_id == "judge_amber")
    assert judge.noise_sd["risk_alignment"] == pytest.approx(0.25)
    pinned = apply_knob(sim, "noise:judge_amber:risk_alignment", 0.9)
    judge = next(j for j in pinned.judges if j.judge_id == "judge_amber")
    assert judge.noise_sd["risk_alignment"] == pytest.approx(0.9)
    assert judge.noise_sd["action_coherence"] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        apply_knob(sim, "bogus", 1.0)


def test_sim_config_roundtrip():
    cells = (
        SimCell(cell=Cell.CELL_A, composer_id="comp_a", n=3, means=_means(1.4)),
    )
    sim = small_sim(noise=0.3, trials=3, cells=cells, terse_penalty=TersePenalty(60, 2.8))
    rebuilt = SimConfig.from_dict(sim.to_dict())
    assert rebuilt == sim
    assert generate_panel(rebuilt) == generate_panel(sim)
