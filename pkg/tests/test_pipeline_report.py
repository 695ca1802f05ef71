from __future__ import annotations

import json

import pytest

from panelgate.config import MdeInputs
from panelgate.errors import LockMismatchError
from panelgate.pipeline import RunResults, check_lock, run_full_analysis
from panelgate.records import Cell
from panelgate.report import (
    EmptyReportError,
    RunManifest,
    machine_report,
    render_human_report,
    render_machine_report,
    write_reports,
)
from panelgate.simulate import (
    SimCell,
    SimComposer,
    SimConfig,
    SimJudge,
    SimProbe,
    SimRegime,
    generate_panel,
)
from panelgate.verdicts import ClaimScope, PublicationLevel

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


def pipeline_sim(seed=11):
    """Small panel with every analysis surface populated."""
    composers = tuple(
        SimComposer(
            composer_id=name,
            family=family,
            regime_means={r: _means(v) for r in ("r1", "r2", "r3")},
            quality_sd=0.35,
            dimension_sd=0.3,
            token_mean=tokens,
            token_sd=10.0,
        )
        for name, family, v, tokens in (
            ("aster", "amber", 4.5, 150.0),
            ("basil", "beryl", 3.9, 120.0),
            ("clover", "coral", 3.8, 40.0),
            ("dahlia", "dalia", 3.7, 160.0),
        )
    )
    judges = tuple(
        SimJudge(
            judge_id=f"judge_{fam}",
            family=fam,
            trials=3 if fam == "amber" else 1,
            noise_sd={d: 0.25 for d in DIMS},
        )
        for fam in ("amber", "beryl", "coral")
    )
    cells = (
        SimCell(cell=Cell.CELL_A, composer_id="aster", n=12, means=_means(1.4), token_mean=200),
        SimCell(cell=Cell.CELL_B, composer_id="aster", n=12, means=_means(1.5), token_mean=45),
    )
    probe = SimProbe(
        judge=SimJudge(judge_id="judge_onyx", family="onyx", noise_sd={d: 0.1 for d in DIMS}),
        composer_means={"clover": 3.8, "dahlia": 3.78},
        n_per_composer=40,
        quality_sd=0.2,
    )
    return SimConfig(
        composers=composers,
        regimes=tuple(SimRegime(r, {"btc": 8, "sol": 4}) for r in ("r1", "r2", "r3")),
        judges=judges,
        cells=cells,
        probe=probe,
        seed=seed,
        rubric_dimensions=DIMS,
    )


@pytest.fixture(scope="module")
def run():
    sim = pipeline_sim()
    config = sim.gate_config(
        bootstrap_B=150,
        permutation_N=300,
        post_cutoff_regime="r3",
        mde_inputs=MdeInputs(sigma_d=1.0, power=0.8, n_pairs=93),
        in_family_judge=(("cell_a", "judge_amber"), ("cell_b", "judge_amber")),
    )
    records = generate_panel(sim, config)
    results = run_full_analysis(records, config)
    return records, config, results


def test_lock_check_enforced(run):
    records, config, _ = run
    other = config.with_overrides(alpha=0.01)
    with pytest.raises(LockMismatchError):
        check_lock(records, other)
    with pytest.raises(LockMismatchError):
        run_full_analysis(records, other)


def test_pipeline_fills_every_section(run):
    _, config, results = run
    assert results.agreement_aggregate is not None
    assert set(results.agreement_dimensions) == set(DIMS)
    assert results.rank_dist is not None
    assert results.contrasts is not None and len(results.contrasts.results) == 42
    assert len(results.lofo) == 3
    assert results.single_judge is not None
    assert results.probe is not None
    assert results.cell_a is not None and results.cell_b is not None
    assert len(results.halo_checks) == 2
    assert results.token_tails and results.length_corr is not None
    assert results.contamination is not None
    assert results.verdicts and results.sensitivity
    assert results.rs_results and set(results.rs_skipped) == {"judge_beryl", "judge_coral"}


def test_pipeline_default_claims_cover_aggregate_and_dimensions(run):
    _, config, results = run
    labels = {v.claim_scope.label for v in results.verdicts}
    assert "aggregate_ranking" in labels
    for dim in DIMS:
        assert f"per_dimension_ranking:{dim}" in labels


def test_pipeline_custom_pairwise_claim(run):
    records, config, _ = run
    claim = ClaimScope.pairwise("clover", "dahlia")
    results = run_full_analysis(records, config, claims=[claim])
    (verdict,) = results.verdicts
    assert verdict.claim_scope == claim
    assert verdict.permitted_publication_level in PublicationLevel


def test_pipeline_sections_subset(run):
    records, config, _ = run
    results = run_full_analysis(records, config, sections={"agreement"})
    assert results.agreement_aggregate is not None
    assert results.rank_dist is None
    assert results.contrasts is None
    assert not results.verdicts


def test_machine_report_structure(run):
    _, config, results = run
    manifest = RunManifest(lock_hash=config.lock_hash, seed=config.master_seed)
    doc = machine_report(results, manifest)
    assert doc["schema"] == "panelgate.report.v1"
    assert doc["lock_hash"] == config.lock_hash
    assert doc["manifest"]["seed"] == config.master_seed
    assert "agreement" in doc and "aggregate" in doc["agreement"]
    assert len(doc["contrasts"]) == 42
    assert doc["cell_a"]["verdict"] in ("A_pass", "A_fail")
    assert doc["verdicts"]


def test_machine_report_deterministic(run):
    records, config, _ = run
    manifest = RunManifest(lock_hash=config.lock_hash, seed=config.master_seed)
    first = render_machine_report(run_full_analysis(records, config), manifest)
    second = render_machine_report(run_full_analysis(records, config), manifest)
    assert first == second
    json.loads(first)  # valid JSON document


def test_human_report_claim_map(run):
    _, config, results = run
    manifest = RunManifest(lock_hash=config.lock_hash, seed=config.master_seed)
    text = render_human_report(results, manifest)
    assert "| Experiment | What it tests | Result | Permitted conclusion |" in text
    for row in (
        "Aggregate agreement gate",
        "Per-dimension gate",
        "Bootstrap rank distribution",
        "LOFO ranking stability",
        "Single-judge baseline",
        "Cell A",
        "Cell B",
        "Out-of-family fourth-judge probe",
        "Contamination-boundedness probe",
        "Repetition stability",
    ):
        assert row in text, row
    assert "## Verdict tuples" in text


def test_empty_report_refused(run):
    _, config, results = run
    empty = RunResults(config=config, summary=results.summary, sections=frozenset())
    manifest = RunManifest()
    with pytest.raises(EmptyReportError):
        machine_report(empty, manifest)
    with pytest.raises(EmptyReportError):
        render_human_report(empty, manifest)


def test_write_reports_roundtrip(tmp_path, run):
    _, config, results = run
    manifest = RunManifest(lock_hash=config.lock_hash, seed=1)
    written = write_reports(results, manifest, tmp_path, formats="both")
    assert {p.name for p in written} == {"report.json", "report.md"}
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["lock_hash"] == config.lock_hash
