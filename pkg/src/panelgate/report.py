"""Machine- and human-readable run reports.

The machine report is a versioned JSON document with a stable field order
(sorted keys) embedding the run manifest and lock digest; two runs with the
same seed and inputs emit byte-identical documents. The human report is a
markdown claim map: one row per experiment with what it tests, the result,
and the permitted conclusion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import PanelGateError
from .pipeline import RunResults
from .verdicts import PublicationLevel, StabilityStatus

MACHINE_SCHEMA = "panelgate.report.v1"
TOOL_VERSION = "0.1.0"


class EmptyReportError(PanelGateError):
    """No analysis sections completed; refusing to emit an empty report."""


@dataclass(frozen=True)
class RunManifest:
    config_path: str = ""
    lock_hash: str = ""
    input_paths: tuple[str, ...] = ()
    requested_analyses: tuple[str, ...] = ()
    output_paths: tuple[str, ...] = ()
    seed: int = 0
    tool_version: str = TOOL_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "config_path": self.config_path,
            "lock_hash": self.lock_hash,
            "input_paths": list(self.input_paths),
            "requested_analyses": list(self.requested_analyses),
            "output_paths": list(self.output_paths),
            "seed": self.seed,
            "tool_version": self.tool_version,
        }


def _round(value: float | None, places: int = 6) -> float | None:
    return None if value is None else round(float(value), places)


def _ci(ci: tuple[float, float] | None) -> list[float] | None:
    return None if ci is None else [_round(ci[0]), _round(ci[1])]


def machine_report(results: RunResults, manifest: RunManifest) -> dict[str, Any]:
    """Structured document with every computed result and gap entry."""
    if not _has_content(results):
        raise EmptyReportError("no analyses completed; nothing to report")

    doc: dict[str, Any] = {
        "schema": MACHINE_SCHEMA,
        "manifest": manifest.to_dict(),
        "lock_hash": results.config.lock_hash,
        "config": results.config.to_dict(),
        "ingestion": {
            "n_trajectories": results.summary.n_trajectories,
            "n_complete": results.summary.n_complete,
            "n_calls": results.summary.n_calls,
            "incomplete_ids": list(results.summary.incomplete_ids),
        },
        "gaps": list(results.gaps),
    }
    if results.mde_plan is not None:
        plan = results.mde_plan
        doc["mde_plan"] = {
            "sigma_d": plan.sigma_d,
            "alpha": plan.alpha,
            "power": plan.power,
            "n_pairs": plan.n_pairs,
            "mde": _round(plan.mde),
        }
    if results.rs_results or results.rs_skipped:
        doc["repetition_stability"] = {
            judge: {
                "rs": _round(r.rs),
                "within_variance_mean": _round(r.within_variance_mean),
                "total_variance": _round(r.total_variance),
                "gate_passed": r.gate_passed,
                "n_trajectories": r.n_trajectories,
            }
            for judge, r in sorted(results.rs_results.items())
        }
        doc["repetition_stability_undefined"] = list(results.rs_skipped)
    if results.agreement_aggregate is not None:
        scopes = {"aggregate": results.agreement_aggregate}
        scopes.update(results.agreement_dimensions)
        doc["agreement"] = {
            scope: {
                "kappa_bar": _round(r.kappa_bar),
                "fleiss_kappa": _round(r.fleiss_kappa),
                "pairwise": {
                    f"{a}|{b}": _round(k) for (a, b), k in sorted(r.pairwise_kappas.items())
                },
                "ci": _ci(r.ci),
                "n_items": r.n_items,
                "n_excluded": r.n_excluded,
            }
            for scope, r in sorted(scopes.items())
        }
    if results.full_ranking:
        doc["full_ranking"] = list(results.full_ranking)
    if results.rank_dist is not None:
        doc["rank_distribution"] = {
            "B": results.rank_dist.B,
            "rank1_fraction": {
                c: _round(f)
                for c, f in sorted(results.rank_dist.per_composer_rank1_fraction.items())
            },
            "histogram": {
                c: list(h)
                for c, h in sorted(results.rank_dist.per_composer_rank_histogram.items())
            },
        }
    if results.contrasts is not None:
        doc["contrasts"] = [
            {
                "pair": list(r.composer_pair),
                "scope": r.scope,
                "family": r.family,
                "delta": _round(r.delta),
                "ci": _ci(r.ci),
                "p_value": _round(r.p_value),
                "holm_adjusted_p": _round(r.holm_adjusted_p),
                "significant": r.significant,
                "delta_in_mde_units": _round(r.delta_in_mde_units, 3),
                "n_regimes": r.n_regimes,
                "dropped_regimes": list(r.dropped_regimes),
            }
            for r in results.contrasts.results
        ]
    if results.lofo:
        doc["lofo"] = [
            {
                "dropped_judge": r.dropped_judge,
                "reduced_ranking": list(r.reduced_ranking),
                "rho_vs_full": _round(r.rho_vs_full),
                "trigger_fired": r.trigger_fired,
                "rank1_preserved": r.rank1_preserved,
            }
            for r in results.lofo
        ]
    if results.single_judge is not None:
        doc["single_judge"] = {
            "rankings": {
                j: list(r) for j, r in sorted(results.single_judge.rankings.items())
            },
            "rho_matrix": {
                f"{a}|{b}": _round(rho)
                for (a, b), rho in sorted(results.single_judge.rho_matrix.items())
            },
            "holm_significant": {
                judge: sum(1 for c in report.family("composer_by_dimension") if c.significant)
                for judge, report in sorted(results.single_judge.contrast_reports.items())
            },
        }
    if results.probe is not None:
        p = results.probe
        doc["fourth_judge_probe"] = {
            "disputed_pair": list(p.disputed_pair),
            "delta": _round(p.delta),
            "ci": _ci(p.ci),
            "tie_verdict": p.tie_verdict,
            "probe_judge": p.probe_judge,
            "n": [p.n_first, p.n_second],
        }
    for name, verdict in (("cell_a", results.cell_a), ("cell_b", results.cell_b)):
        if verdict is None:
            continue
        doc[name] = {
            "cell_mean": _round(verdict.cell_mean),
            "honest_mean": _round(verdict.honest_mean),
            "delta": _round(verdict.delta),
            "ci": _ci(verdict.ci),
            "p_value": _round(verdict.p_value),
            "verdict": verdict.verdict,
            "anomaly_flag": verdict.anomaly_flag,
            "delta_in_mde_units": _round(verdict.delta_in_mde_units, 3),
            "n_cell": verdict.n_cell,
            "n_honest": verdict.n_honest,
            "warnings": list(verdict.warnings),
        }
    if results.halo_checks:
        doc["halo_checks"] = [
            {
                "cell": h.cell,
                "delta_full": _round(h.delta_full),
                "delta_lofo": _round(h.delta_lofo),
                "halo": _round(h.halo),
                "lofo_becomes_primary": h.lofo_becomes_primary,
                "in_family_judge": h.in_family_judge,
                "applicable": h.applicable,
            }
            for h in results.halo_checks
        ]
    if results.token_tails:
        doc["token_tails"] = {
            composer: {
                "count_below": t.count_below,
                "total": t.total,
                "fraction": _round(t.fraction, 4),
            }
            for composer, t in sorted(results.token_tails.items())
        }
    if results.length_corr is not None:
        doc["length_score_correlation"] = _round(results.length_corr, 4)
    if results.anchor_probe is not None:
        probe = results.anchor_probe
        doc["anchor_probe"] = {
            "dimension": probe.dimension,
            "delta_mean": _round(probe.delta_mean),
            "ci": _ci(probe.ci),
            "std_before": _round(probe.std_before, 4),
            "std_after": _round(probe.std_after, 4),
            "discrimination_gain": probe.discrimination_gain,
            "ranking_before": list(probe.ranking_before),
            "ranking_after": list(probe.ranking_after),
            "ranking_flipped": probe.ranking_flipped,
        }
    if results.contamination is not None:
        doc["contamination_probe"] = {
            split: {
                "delta": _round(r.delta),
                "p_value": _round(r.p_value),
                "n_recent": r.n_recent,
                "n_historical": r.n_historical,
            }
            for split, r in sorted(results.contamination.results.items())
        }
    if results.verdicts:
        doc["verdicts"] = [
            {
                "claim_scope": v.claim_scope.label,
                "agreement_status": v.agreement_status.value,
                "stability_status": v.stability_status.value,
                "adversarial_status": v.adversarial_status.value,
                "permitted_publication_level": v.permitted_publication_level.value,
                "rationale": list(v.rationale),
            }
            for v in results.verdicts
        ]
    if results.sensitivity:
        doc["gate_sensitivity"] = [
            {
                "scope": row.scope,
                "kappa_bar": _round(row.kappa_bar),
                "ci": _ci(row.ci),
                "cutoffs": [row.publish_threshold, row.methodology_threshold],
                "band_point": row.band_point.value,
                "band_ci_lower": row.band_ci_lower.value if row.band_ci_lower else None,
                "band_ci_upper": row.band_ci_upper.value if row.band_ci_upper else None,
            }
            for row in results.sensitivity
        ]
    return doc


def render_machine_report(results: RunResults, manifest: RunManifest) -> str:
    return json.dumps(machine_report(results, manifest), sort_keys=True, indent=2) + "\n"


def _has_content(results: RunResults) -> bool:
    return any(
        (
            results.rs_results,
            results.agreement_aggregate is not None,
            results.rank_dist is not None,
            results.contrasts is not None,
            results.lofo,
            results.cell_a is not None,
            results.cell_b is not None,
            results.contamination is not None,
            results.verdicts,
        )
    )


def _claim_map_rows(results: RunResults) -> list[tuple[str, str, str, str]]:
    rows: list[tuple[str, str, str, str]] = []
    config = results.config
    agg = results.agreement_aggregate
    if agg is not None:
        ci = f", 95% CI [{agg.ci[0]:.4f}, {agg.ci[1]:.4f}]" if agg.ci else ""
        band = "publishable" if agg.kappa_bar >= config.publish_threshold else (
            "methodology finding"
            if agg.kappa_bar >= config.methodology_threshold
            else "halt"
        )
        rows.append(
            (
                "Aggregate agreement gate",
                "Do judges converge overall?",
                f"kappa_bar = {agg.kappa_bar:.4f}{ci}",
                f"Aggregate analysis {band}",
            )
        )
    if results.agreement_dimensions:
        failing = {
            d: r
            for d, r in results.agreement_dimensions.items()
            if r.kappa_bar < config.publish_threshold
        }
        passing = len(results.agreement_dimensions) - len(failing)
        detail = "; ".join(
            f"{d} = {r.kappa_bar:.4f}" for d, r in sorted(failing.items())
        )
        rows.append(
            (
                "Per-dimension gate",
                "Are all dimensions equally reliable?",
                f"{passing} pass" + (f"; {detail}" if detail else ""),
                "No headline claim on downgraded dimensions"
                if failing
                else "All dimensions publishable",
            )
        )
    if results.rank_dist is not None and results.full_ranking:
        top = results.full_ranking[0]
        fraction = results.rank_dist.per_composer_rank1_fraction.get(top, 0.0)
        rows.append(
            (
                "Bootstrap rank distribution",
                "Are model ranks stable?",
                f"{top} rank-1 in {fraction:.1%} of {results.rank_dist.B} resamples",
                "Only rank-1 claim publishable"
                if fraction == 1.0
                else "Rank-1 mass dispersed",
            )
        )
    if results.lofo:
        triplet = "; ".join(
            f"drop-{r.dropped_judge} rho={r.rho_vs_full:.1f}" for r in results.lofo
        )
        fired = [r.dropped_judge for r in results.lofo if r.trigger_fired]
        rank1 = all(r.rank1_preserved for r in results.lofo)
        conclusion = "Rank-1 stable" if rank1 else "Rank-1 judge-dependent"
        if fired:
            conclusion += "; lower ranks require tie-class"
        rows.append(
            (
                "LOFO ranking stability",
                "Does rank structure survive judge-family drops?",
                triplet,
                conclusion,
            )
        )
    if results.single_judge is not None:
        rhos = sorted(results.single_judge.rho_matrix.values())
        rows.append(
            (
                "Single-judge baseline",
                "Is one judge enough?",
                f"rankings differ, rho = {rhos[0]:.1f}-{rhos[-1]:.1f}"
                if rhos
                else "single panel",
                "Single-judge protocol insufficient for lower ranks"
                if rhos and rhos[0] < 0.9
                else "Single-judge rankings agree",
            )
        )
    if results.cell_a is not None:
        v = results.cell_a
        rows.append(
            (
                "Cell A (verbose-confident-wrong)",
                "Reject substantively wrong reasoning?",
                f"cell mean {v.cell_mean:.2f} vs honest {v.honest_mean:.2f}, p = {v.p_value:.2g}",
                "Panel not simply rewarding verbosity"
                if v.verdict == "A_pass"
                else "Cell A failed: contamination",
            )
        )
    if results.cell_b is not None:
        v = results.cell_b
        rows.append(
            (
                "Cell B (terse-but-correct)",
                "Accept correct-but-terse?",
                f"delta = {v.delta:+.2f} ({v.delta_in_mde_units:+.1f}x MDE), verdict {v.verdict}",
                "Rubric is construct-sensitive for terse rationales; headline qualified"
                if v.verdict != "H1"
                else "Terse rationales scored at substance level",
            )
        )
    if results.anchor_probe is not None:
        a = results.anchor_probe
        rows.append(
            (
                "Anchor-specificity probe",
                f"Is {a.dimension} anchor-sensitive?",
                f"delta = {a.delta_mean:+.2f}, std {a.std_before:.2f} -> {a.std_after:.2f}"
                + (", ranking flip" if a.ranking_flipped else ""),
                "Anchor specificity is operationally load-bearing"
                if a.discrimination_gain or a.ranking_flipped
                else "Anchors not load-bearing in this subsample",
            )
        )
    if results.probe is not None:
        p = results.probe
        rows.append(
            (
                "Out-of-family fourth-judge probe",
                f"Is {p.disputed_pair[0]} vs {p.disputed_pair[1]} a strict order?",
                f"delta = {p.delta:+.2f}, 95% CI [{p.ci[0]:+.2f}, {p.ci[1]:+.2f}]",
                "Lower ranks confirmed as tie-class; no strict-order claim"
                if p.tie_verdict == "tie"
                else "Probe resolves a strict order",
            )
        )
    if results.contamination is not None and "aggregate" in results.contamination.results:
        r = results.contamination.results["aggregate"]
        rows.append(
            (
                "Contamination-boundedness probe",
                "Does the post-cutoff regime score differently?",
                f"delta = {r.delta:+.3f}, p = {r.p_value:.2f}",
                "Contamination-bounded interpretation supported"
                if r.p_value > config.alpha
                else "Post-cutoff shift detected",
            )
        )
    for judge, rs in sorted(results.rs_results.items()):
        rows.append(
            (
                "Repetition stability",
                f"Is {judge} trial averaging defensible?",
                f"RS = {rs.rs:.4f}",
                f"Trial averaging {'clears' if rs.gate_passed else 'fails'} the "
                f"{config.rs_gate:.2f} gate",
            )
        )
    return rows


def render_human_report(results: RunResults, manifest: RunManifest) -> str:
    """Markdown claim map plus verdict tuples."""
    if not _has_content(results):
        raise EmptyReportError("no analyses completed; nothing to report")
    lines = [
        "# Panel gate claim map",
        "",
        f"- lock: `{results.config.lock_hash}`",
        f"- seed: {manifest.seed}",
        f"- ingestion: {results.summary.describe()}",
        "",
        "| Experiment | What it tests | Result | Permitted conclusion |",
        "| --- | --- | --- | --- |",
    ]
    for experiment, tests, result, conclusion in _claim_map_rows(results):
        lines.append(f"| {experiment} | {tests} | {result} | {conclusion} |")
    if results.verdicts:
        lines += [
            "",
            "## Verdict tuples",
            "",
            "| Claim scope | Agreement | Stability | Adversarial | Permitted level |",
            "| --- | --- | --- | --- | --- |",
        ]
        for v in results.verdicts:
            level = v.permitted_publication_level.value
            if (
                v.permitted_publication_level is PublicationLevel.NO_CLAIM
                and v.stability_status is StabilityStatus.TIE_CLASS
            ):
                level += " (no strict-order claim)"
            lines.append(
                f"| {v.claim_scope.label} | {v.agreement_status.value} | "
                f"{v.stability_status.value} | {v.adversarial_status.value} | {level} |"
            )
    if results.gaps:
        lines += ["", "## Gaps", ""]
        lines += [f"- {gap}" for gap in results.gaps]
    return "\n".join(lines) + "\n"


def write_reports(
    results: RunResults,
    manifest: RunManifest,
    out_dir: str | Path,
    *,
    formats: str = "both",
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        if formats in ("machine", "both"):
            path = out / "report.json"
            path.write_text(render_machine_report(results, manifest), encoding="utf-8")
            written.append(path)
        if formats in ("human", "both"):
            path = out / "report.md"
            path.write_text(render_human_report(results, manifest), encoding="utf-8")
            written.append(path)
    except OSError as exc:
        raise PanelGateError(f"failed to write report under {out}: {exc}") from exc
    return written
