"""Gate resolution and verdict-tuple assembly.

The deliverable is a five-field verdict per candidate claim: scope, agreement
status, stability status, adversarial status, and the permitted publication
level. The publication-level truth table:

* no_claim whenever agreement is halt, stability is judge-dependent, or the
  adversarial status is contaminated (which is how same-claim contamination
  is surfaced);
* additionally no_claim for a pairwise strict-ordering claim whose stability
  is tie-class -- a tie-class is by definition a set of composers whose
  ordering is not claimable;
* headline exactly when all three fields are green (publish, stable, passed);
* qualified otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .adversarial import (
    VERDICT_A_FAIL,
    VERDICT_H1_DOUBLE_PRIME,
    VERDICT_H1_PRIME,
    CellVerdict,
    HaloCheck,
    TokenTail,
)
from .agreement import AgreementResult
from .config import GateConfig
from .errors import DomainError
from .records import Cell
from .stability import LofoResult, ProbeResult


class AgreementStatus(str, Enum):
    PUBLISH = "publish"
    METHODOLOGY = "methodology"
    HALT = "halt"


class StabilityStatus(str, Enum):
    STABLE = "stable"
    TIE_CLASS = "tie_class"
    JUDGE_DEPENDENT = "judge_dependent"


class AdversarialStatus(str, Enum):
    PASSED = "passed"
    CONSTRUCT_SENSITIVE = "construct_sensitive"
    CONTAMINATED = "contaminated"
    NOT_TESTED = "not_tested"


class PublicationLevel(str, Enum):
    HEADLINE = "headline"
    QUALIFIED = "qualified"
    NO_CLAIM = "no_claim"


class ClaimKind(str, Enum):
    AGGREGATE_RANKING = "aggregate_ranking"
    PER_DIMENSION_RANKING = "per_dimension_ranking"
    PAIRWISE_CONTRAST = "pairwise_contrast"
    ADVERSARIAL_CELL_VERDICT = "adversarial_cell_verdict"


@dataclass(frozen=True)
class ClaimScope:
    kind: ClaimKind
    dimension: str | None = None
    pair: tuple[str, str] | None = None
    cell: str | None = None

    @classmethod
    def aggregate_ranking(cls) -> "ClaimScope":
        return cls(kind=ClaimKind.AGGREGATE_RANKING)

    @classmethod
    def per_dimension(cls, dimension: str) -> "ClaimScope":
        return cls(kind=ClaimKind.PER_DIMENSION_RANKING, dimension=dimension)

    @classmethod
    def pairwise(cls, winner: str, loser: str) -> "ClaimScope":
        """Strict-ordering claim that ``winner`` ranks above ``loser``."""
        return cls(kind=ClaimKind.PAIRWISE_CONTRAST, pair=(winner, loser))

    @classmethod
    def adversarial_cell(cls, cell: str) -> "ClaimScope":
        return cls(kind=ClaimKind.ADVERSARIAL_CELL_VERDICT, cell=cell)

    @property
    def label(self) -> str:
        if self.kind is ClaimKind.PER_DIMENSION_RANKING:
            return f"{self.kind.value}:{self.dimension}"
        if self.kind is ClaimKind.PAIRWISE_CONTRAST:
            return f"{self.kind.value}:{self.pair[0]}>{self.pair[1]}"
        if self.kind is ClaimKind.ADVERSARIAL_CELL_VERDICT:
            return f"{self.kind.value}:{self.cell}"
        return self.kind.value


@dataclass(frozen=True)
class VerdictTuple:
    claim_scope: ClaimScope
    agreement_status: AgreementStatus
    stability_status: StabilityStatus
    adversarial_status: AdversarialStatus
    permitted_publication_level: PublicationLevel
    rationale: tuple[dict[str, str], ...] = ()


@dataclass(frozen=True)
class GateSensitivityRow:
    scope: str
    kappa_bar: float
    ci: tuple[float, float] | None
    publish_threshold: float
    methodology_threshold: float
    band_point: AgreementStatus
    band_ci_lower: AgreementStatus | None
    band_ci_upper: AgreementStatus | None


def agreement_gate(kappa_bar: float, config: GateConfig) -> AgreementStatus:
    """Band the point estimate; CI bounds are sensitivity disclosures only."""
    return _band(kappa_bar, config.publish_threshold, config.methodology_threshold)


def _band(value: float, publish: float, methodology: float) -> AgreementStatus:
    if value >= publish:
        return AgreementStatus.PUBLISH
    if value >= methodology:
        return AgreementStatus.METHODOLOGY
    return AgreementStatus.HALT


def _claim_survives_drop(
    claim: ClaimScope, drop: LofoResult, full_ranking: Sequence[str] | None
) -> bool:
    if claim.kind in (ClaimKind.AGGREGATE_RANKING, ClaimKind.PER_DIMENSION_RANKING):
        return drop.rank1_preserved
    if claim.kind is ClaimKind.PAIRWISE_CONTRAST:
        winner, loser = claim.pair
        ranking = drop.reduced_ranking
        if winner not in ranking or loser not in ranking:
            return False
        return ranking.index(winner) < ranking.index(loser)
    # Cell-verdict claims have no ranking content; they survive a drop unless
    # the drop itself destabilised the panel.
    return not drop.trigger_fired


def resolve_stability(
    claim: ClaimScope,
    lofo_results: Sequence[LofoResult],
    probe: ProbeResult | None = None,
    *,
    full_ranking: Sequence[str] | None = None,
) -> StabilityStatus:
    """Stability of the stated claim under every leave-one-family-out drop.

    Stable when the claim survives all drops (rank-1 identity for ranking
    claims, pair order for pairwise claims). Otherwise the out-of-family
    probe arbitrates: a CI containing zero resolves the failure into a
    tie-class; a significant probe that contradicts the claim, or no probe at
    all, leaves the claim judge-dependent. A significant probe that agrees
    with the claimed order restores stability.
    """
    if not lofo_results:
        raise ValueError("stability resolution requires the full LOFO result set")
    if all(_claim_survives_drop(claim, drop, full_ranking) for drop in lofo_results):
        return StabilityStatus.STABLE
    if probe is None:
        return StabilityStatus.JUDGE_DEPENDENT
    if probe.tie_verdict == "tie":
        return StabilityStatus.TIE_CLASS
    if (
        claim.kind is ClaimKind.PAIRWISE_CONTRAST
        and set(probe.disputed_pair) == set(claim.pair)
    ):
        ordered_winner = (
            probe.disputed_pair[0] if probe.delta > 0 else probe.disputed_pair[1]
        )
        if ordered_winner == claim.pair[0]:
            return StabilityStatus.STABLE
    return StabilityStatus.JUDGE_DEPENDENT


def same_claim_contamination(
    claim: ClaimScope,
    cell_verdicts: Sequence[CellVerdict],
    token_tails: Mapping[str, TokenTail] | None,
    config: GateConfig,
) -> bool:
    """Does a failing adversarial construct target this claim's own subject?

    Two routes: a failing cell explicitly names the claim's dimension (cells
    carry no dimension target in this run, so this arm is vacuous unless a
    caller supplies targeted cells), or the claim is a pairwise contrast and
    either composer's honest rationale distribution materially occupies the
    regime a failing Cell B shows to be penalised (token tail above the
    configured fraction).
    """
    failing_b = [
        v
        for v in cell_verdicts
        if v.cell == Cell.CELL_B.value
        and v.verdict in (VERDICT_H1_PRIME, VERDICT_H1_DOUBLE_PRIME)
    ]
    if not failing_b or token_tails is None:
        return False
    if claim.kind is not ClaimKind.PAIRWISE_CONTRAST:
        return False
    for composer in claim.pair:
        tail = token_tails.get(composer)
        if tail is not None and tail.fraction > config.same_claim_tail_fraction:
            return True
    return False


def resolve_adversarial(
    claim: ClaimScope,
    cell_verdicts: Sequence[CellVerdict],
    halo_checks: Sequence[HaloCheck] = (),
    *,
    token_tails: Mapping[str, TokenTail] | None = None,
    config: GateConfig | None = None,
) -> AdversarialStatus:
    """Adversarial field of the verdict tuple for one claim.

    not_tested without cells; contaminated when Cell A fails or a failing
    cell targets the claim's own construct; construct_sensitive when Cell B
    returns H1' or H1''; passed otherwise.
    """
    if not cell_verdicts:
        return AdversarialStatus.NOT_TESTED
    if any(v.verdict == VERDICT_A_FAIL for v in cell_verdicts):
        return AdversarialStatus.CONTAMINATED
    if config is not None and same_claim_contamination(
        claim, cell_verdicts, token_tails, config
    ):
        return AdversarialStatus.CONTAMINATED
    if any(
        v.verdict in (VERDICT_H1_PRIME, VERDICT_H1_DOUBLE_PRIME) for v in cell_verdicts
    ):
        return AdversarialStatus.CONSTRUCT_SENSITIVE
    return AdversarialStatus.PASSED


def publication_level(
    agreement: AgreementStatus,
    stability: StabilityStatus,
    adversarial: AdversarialStatus,
    claim: ClaimScope | None = None,
) -> PublicationLevel:
    """Total truth table over the status product (see module docstring)."""
    if (
        agreement is AgreementStatus.HALT
        or stability is StabilityStatus.JUDGE_DEPENDENT
        or adversarial is AdversarialStatus.CONTAMINATED
    ):
        return PublicationLevel.NO_CLAIM
    if (
        claim is not None
        and claim.kind is ClaimKind.PAIRWISE_CONTRAST
        and stability is StabilityStatus.TIE_CLASS
    ):
        return PublicationLevel.NO_CLAIM
    if (
        agreement is AgreementStatus.PUBLISH
        and stability is StabilityStatus.STABLE
        and adversarial is AdversarialStatus.PASSED
    ):
        return PublicationLevel.HEADLINE
    return PublicationLevel.QUALIFIED


def assemble_verdict(
    claim: ClaimScope,
    agreement: AgreementStatus,
    stability: StabilityStatus,
    adversarial: AdversarialStatus,
    evidence: Iterable[dict[str, str]] = (),
) -> VerdictTuple:
    return VerdictTuple(
        claim_scope=claim,
        agreement_status=agreement,
        stability_status=stability,
        adversarial_status=adversarial,
        permitted_publication_level=publication_level(
            agreement, stability, adversarial, claim
        ),
        rationale=tuple(evidence),
    )


def gate_sensitivity(
    agreement_results: Mapping[str, AgreementResult],
    alt_cutoffs: Sequence[tuple[float, float]],
    config: GateConfig,
) -> tuple[GateSensitivityRow, ...]:
    """Band assignments under alternate (publish, methodology) cutoff pairs.

    Each row carries the point-estimate band plus CI-lower and CI-upper bands
    as robustness columns: a scope whose CI upper bound is already below the
    methodology cutoff is a robust halt under that rule.
    """
    pairs = [(config.publish_threshold, config.methodology_threshold)]
    for publish, methodology in alt_cutoffs:
        if not 0 <= methodology < publish <= 1:
            raise DomainError(
                f"cutoff pair ({publish}, {methodology}) must satisfy "
                "0 <= methodology < publish <= 1"
            )
        pairs.append((publish, methodology))

    rows: list[GateSensitivityRow] = []
    for scope in sorted(agreement_results):
        result = agreement_results[scope]
        for publish, methodology in pairs:
            ci = result.ci
            rows.append(
                GateSensitivityRow(
                    scope=scope,
                    kappa_bar=result.kappa_bar,
                    ci=ci,
                    publish_threshold=publish,
                    methodology_threshold=methodology,
                    band_point=_band(result.kappa_bar, publish, methodology),
                    band_ci_lower=_band(ci[0], publish, methodology) if ci else None,
                    band_ci_upper=_band(ci[1], publish, methodology) if ci else None,
                )
            )
    return tuple(rows)
