"""Cluster bootstrap, composer contrasts, Holm correction, and MDE planning.

Resampling draws whole regime clusters with replacement and pools their
trajectories; every resample gets its own RNG substream spawned from the
master seed, so serial and parallel evaluation produce identical sample
multisets. Percentile intervals use the linearly interpolated empirical
quantile throughout.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from statistics import NormalDist
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .config import GateConfig
from .errors import BootstrapFailureError, ClusterCountError, DomainError
from .records import Cell, TrajectoryPanelScore

AGGREGATE_SCOPE = "aggregate"
DIMENSION_FAMILY = "composer_by_dimension"
AGGREGATE_FAMILY = "composer_aggregate"

# Budget for resamples on which the statistic is undefined; beyond this the
# bootstrap aborts instead of silently biasing the distribution.
MAX_FAILED_FRACTION = 0.01


@dataclass(frozen=True)
class BootstrapSummary:
    statistic_name: str
    point_estimate: float
    samples_count: int
    ci_level: float
    ci_lo: float
    ci_hi: float
    seed: int
    cluster_key: str
    failed_count: int = 0


@dataclass(frozen=True)
class ContrastResult:
    composer_pair: tuple[str, str]
    scope: str
    family: str
    delta: float
    ci: tuple[float, float]
    p_value: float
    holm_adjusted_p: float
    significant: bool
    delta_in_mde_units: float
    n_regimes: int
    dropped_regimes: tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return f"{self.composer_pair[0]}_vs_{self.composer_pair[1]}:{self.scope}"


@dataclass(frozen=True)
class ContrastReport:
    results: tuple[ContrastResult, ...]
    gaps: tuple[str, ...]

    def family(self, name: str) -> tuple[ContrastResult, ...]:
        return tuple(r for r in self.results if r.family == name)


@dataclass(frozen=True)
class RankDistribution:
    per_composer_rank1_fraction: dict[str, float]
    per_composer_rank_histogram: dict[str, tuple[int, ...]]
    B: int


@dataclass(frozen=True)
class MdePlan:
    sigma_d: float
    alpha: float
    power: float
    n_pairs: int
    mde: float


@dataclass(frozen=True)
class HolmResult:
    adjusted: dict[str, float]
    rejected: dict[str, bool]


@dataclass(frozen=True)
class OverlapCounts:
    n_a: int
    n_b: int
    overlap: int
    a_only: int
    b_only: int


def percentile_ci(samples: Sequence[float], level: float) -> tuple[float, float]:
    """Percentile interval via the linearly interpolated sorted-sample quantile."""
    if not 0 < level < 1:
        raise DomainError(f"ci level must lie in (0, 1), got {level}")
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("no samples")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(arr, [tail, 1.0 - tail], method="linear")
    return float(lo), float(hi)


def resample_cluster_ids(
    cluster_ids: Sequence[str], B: int, seed: int
) -> list[tuple[str, ...]]:
    """Deterministic per-resample cluster draws (index-addressable substreams)."""
    ordered = sorted(cluster_ids)
    children = np.random.SeedSequence(seed).spawn(B)
    draws: list[tuple[str, ...]] = []
    for child in children:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, len(ordered), size=len(ordered))
        draws.append(tuple(ordered[i] for i in idx))
    return draws


def regime_cluster_bootstrap(
    clusters: Mapping[str, Any],
    statistic: Callable[[list[Any]], float],
    B: int,
    seed: int,
    *,
    ci_level: float = 0.95,
    statistic_name: str = "statistic",
    cluster_key: str = "regime_id",
    parallel: bool = False,
) -> tuple[BootstrapSummary, np.ndarray]:
    """Cluster bootstrap of ``statistic`` over whole-cluster resamples.

    Each resample draws ``len(clusters)`` cluster ids with replacement and
    hands the statistic the list of drawn cluster payloads (duplicates
    included). Resamples on which the statistic raises are excluded and
    counted; more than ``MAX_FAILED_FRACTION`` failures aborts.
    """
    if len(clusters) < 2:
        raise ClusterCountError(
            f"cluster bootstrap needs >= 2 clusters, got {len(clusters)}"
        )
    draws = resample_cluster_ids(list(clusters), B, seed)

    def evaluate(draw: tuple[str, ...]) -> float:
        try:
            return float(statistic([clusters[c] for c in draw]))
        except Exception:
            return float("nan")

    if parallel:
        with ThreadPoolExecutor() as pool:
            values = list(pool.map(evaluate, draws))
    else:
        values = [evaluate(d) for d in draws]

    samples = np.asarray(values, dtype=float)
    failed = int(np.isnan(samples).sum())
    if failed > MAX_FAILED_FRACTION * B:
        raise BootstrapFailureError(
            f"{failed} of {B} resamples failed for {statistic_name!r}"
        )
    kept = samples[~np.isnan(samples)]
    lo, hi = percentile_ci(kept, ci_level)
    summary = BootstrapSummary(
        statistic_name=statistic_name,
        point_estimate=float(statistic(list(clusters.values()))),
        samples_count=B,
        ci_level=ci_level,
        ci_lo=lo,
        ci_hi=hi,
        seed=seed,
        cluster_key=cluster_key,
        failed_count=failed,
    )
    return summary, kept


def bootstrap_p_two_sided(samples: Sequence[float], null_value: float = 0.0) -> float:
    """Two-sided sign-fraction bootstrap p-value, floored at 1/B."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("no samples")
    B = arr.size
    below = int((arr <= null_value).sum())
    above = int((arr >= null_value).sum())
    return min(1.0, max(2 * min(below, above), 1) / B)


def holm_step_down(
    p_values: Mapping[str, float], alpha: float
) -> HolmResult:
    """Holm step-down over a fixed, labelled family of p-values.

    Rejects while the i-th smallest p satisfies p <= alpha/(m-i+1); adjusted
    p-values are the running max of (m-i+1)*p, capped at 1.
    """
    if not p_values:
        raise ValueError("empty p-value family")
    for label, p in p_values.items():
        if not 0 < p <= 1:
            raise DomainError(f"p-value for {label!r} outside (0, 1]: {p}")
    m = len(p_values)
    ordered = sorted(p_values.items(), key=lambda kv: kv[1])

    adjusted: dict[str, float] = {}
    rejected: dict[str, bool] = {}
    running = 0.0
    rejecting = True
    for i, (label, p) in enumerate(ordered):
        running = max(running, (m - i) * p)
        adjusted[label] = min(1.0, running)
        if rejecting and p <= alpha / (m - i):
            rejected[label] = True
        else:
            rejecting = False
            rejected[label] = False
    return HolmResult(adjusted=adjusted, rejected=rejected)


def mde(sigma_d: float, alpha: float, power: float, n_pairs: int) -> MdePlan:
    """Two-sided normal-approximation minimum detectable effect."""
    if sigma_d <= 0:
        raise DomainError(f"sigma_d must be positive, got {sigma_d}")
    if not 0 < alpha < 1 or not 0 < power < 1:
        raise DomainError("alpha and power must lie in (0, 1)")
    if n_pairs < 2:
        raise DomainError(f"n_pairs must be >= 2, got {n_pairs}")
    norm = NormalDist()
    z = norm.inv_cdf(1 - alpha / 2) + norm.inv_cdf(power)
    return MdePlan(
        sigma_d=sigma_d,
        alpha=alpha,
        power=power,
        n_pairs=n_pairs,
        mde=z * sigma_d / np.sqrt(n_pairs),
    )


def implied_n_pairs(
    target_mde: float, sigma_d: float, alpha: float, power: float
) -> int:
    """Smallest n for which the planned MDE is at or below the target."""
    if target_mde <= 0:
        raise DomainError("target MDE must be positive")
    norm = NormalDist()
    z = norm.inv_cdf(1 - alpha / 2) + norm.inv_cdf(power)
    return int(np.ceil((z * sigma_d / target_mde) ** 2))


def config_mde(config: GateConfig) -> MdePlan:
    inputs = config.mde_inputs
    return mde(inputs.sigma_d, config.alpha, inputs.power, inputs.n_pairs)


def composer_regime_means(
    rows: Sequence[TrajectoryPanelScore], scope: str
) -> dict[str, dict[str, float]]:
    """Honest-cell per-(composer, regime) means for one scope."""
    sums: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        if row.cell is not Cell.HONEST:
            continue
        value = row.aggregate if scope == AGGREGATE_SCOPE else row.dimensions[scope]
        sums.setdefault((row.composer_id, row.regime_id), []).append(value)
    out: dict[str, dict[str, float]] = {}
    for (composer, regime), values in sums.items():
        out.setdefault(composer, {})[regime] = float(np.mean(values))
    return out


def composer_means(
    rows: Sequence[TrajectoryPanelScore], scope: str = AGGREGATE_SCOPE
) -> dict[str, float]:
    """Regime-equal composer means (each regime weighted equally)."""
    per_regime = composer_regime_means(rows, scope)
    return {
        composer: float(np.mean(list(regimes.values())))
        for composer, regimes in sorted(per_regime.items())
    }


def rank_composers(means: Mapping[str, float]) -> tuple[str, ...]:
    """Descending-score ranking; exact ties break lexicographically."""
    return tuple(sorted(means, key=lambda c: (-means[c], c)))


def pairwise_contrasts(
    rows: Sequence[TrajectoryPanelScore],
    config: GateConfig,
    *,
    composers: Sequence[str] | None = None,
    scopes: Sequence[str] | None = None,
    seed: int | None = None,
) -> ContrastReport:
    """All composer-pair mean differences with cluster-bootstrap inference.

    Delta is the mean over common regimes of the per-regime composer-mean
    difference. Dimension-scope contrasts form the preregistered Holm family;
    aggregate-scope contrasts are corrected as their own family. Deltas are
    also expressed in MDE units from the config's planning inputs.
    """
    if scopes is None:
        scopes = (AGGREGATE_SCOPE, *config.rubric_dimensions)
    base_seed = config.master_seed if seed is None else seed
    plan = config_mde(config)

    per_scope_means = {s: composer_regime_means(rows, s) for s in scopes}
    if composers is None:
        composers = sorted(per_scope_means[scopes[0]])
    if len(composers) < 2:
        raise ValueError("need at least two composers to contrast")

    gaps: list[str] = []
    partial: list[dict[str, Any]] = []
    for pair_idx, (c1, c2) in enumerate(combinations(sorted(composers), 2)):
        for scope_idx, scope in enumerate(scopes):
            means = per_scope_means[scope]
            common = sorted(set(means.get(c1, {})) & set(means.get(c2, {})))
            all_regimes = sorted(set(means.get(c1, {})) | set(means.get(c2, {})))
            dropped = tuple(r for r in all_regimes if r not in common)
            if not common:
                gaps.append(f"contrast {c1} vs {c2} ({scope}): no common regimes")
                continue
            if dropped:
                gaps.append(
                    f"contrast {c1} vs {c2} ({scope}): regimes {list(dropped)} "
                    "missing for one composer, dropped"
                )
            deltas = {r: means[c1][r] - means[c2][r] for r in common}
            summary, samples = regime_cluster_bootstrap(
                deltas,
                lambda drawn: float(np.mean(drawn)),
                config.bootstrap_B,
                base_seed + 7919 * pair_idx + 104729 * scope_idx,
                ci_level=config.ci_level,
                statistic_name=f"delta:{c1}_vs_{c2}:{scope}",
            )
            partial.append(
                {
                    "pair": (c1, c2),
                    "scope": scope,
                    "family": AGGREGATE_FAMILY if scope == AGGREGATE_SCOPE else DIMENSION_FAMILY,
                    "delta": summary.point_estimate,
                    "ci": (summary.ci_lo, summary.ci_hi),
                    "p": bootstrap_p_two_sided(samples),
                    "n_regimes": len(common),
                    "dropped": dropped,
                }
            )

    results: list[ContrastResult] = []
    for family in (DIMENSION_FAMILY, AGGREGATE_FAMILY):
        members = [e for e in partial if e["family"] == family]
        if not members:
            continue
        labels = {f"{e['pair'][0]}_vs_{e['pair'][1]}:{e['scope']}": e["p"] for e in members}
        holm = holm_step_down(labels, config.alpha)
        for entry in members:
            label = f"{entry['pair'][0]}_vs_{entry['pair'][1]}:{entry['scope']}"
            results.append(
                ContrastResult(
                    composer_pair=entry["pair"],
                    scope=entry["scope"],
                    family=family,
                    delta=entry["delta"],
                    ci=entry["ci"],
                    p_value=entry["p"],
                    holm_adjusted_p=holm.adjusted[label],
                    significant=holm.rejected[label],
                    delta_in_mde_units=entry["delta"] / plan.mde,
                    n_regimes=entry["n_regimes"],
                    dropped_regimes=entry["dropped"],
                )
            )
    order = {s: i for i, s in enumerate(scopes)}
    results.sort(key=lambda r: (r.composer_pair, order[r.scope]))
    return ContrastReport(results=tuple(results), gaps=tuple(gaps))


def rank_distribution(rankings: Sequence[Sequence[str]]) -> RankDistribution:
    """Rank-1 frequency and full rank histogram from per-resample orderings."""
    if not rankings:
        raise ValueError("no rankings supplied")
    composers = sorted(rankings[0])
    n = len(composers)
    histogram = {c: [0] * n for c in composers}
    for ranking in rankings:
        if sorted(ranking) != composers:
            raise ValueError("rankings cover different composer sets")
        for position, composer in enumerate(ranking):
            histogram[composer][position] += 1
    B = len(rankings)
    return RankDistribution(
        per_composer_rank1_fraction={c: histogram[c][0] / B for c in composers},
        per_composer_rank_histogram={c: tuple(histogram[c]) for c in composers},
        B=B,
    )


def bootstrap_rankings(
    rows: Sequence[TrajectoryPanelScore],
    config: GateConfig,
    *,
    seed: int | None = None,
    scope: str = AGGREGATE_SCOPE,
) -> list[tuple[str, ...]]:
    """Composer orderings across regime-cluster bootstrap resamples."""
    means = composer_regime_means(rows, scope)
    composers = sorted(means)
    regimes = sorted({r for per in means.values() for r in per})
    if len(regimes) < 2:
        raise ClusterCountError("ranking bootstrap needs >= 2 regimes")
    draws = resample_cluster_ids(
        regimes, config.bootstrap_B, config.master_seed if seed is None else seed
    )
    rankings: list[tuple[str, ...]] = []
    for draw in draws:
        resampled = {
            c: float(np.mean([means[c][r] for r in draw if r in means[c]]))
            for c in composers
        }
        rankings.append(rank_composers(resampled))
    return rankings


def contrast_overlap(
    family_a: Mapping[str, bool], family_b: Mapping[str, bool]
) -> OverlapCounts:
    """Discovery overlap between two significance-flag sets on one family."""
    if set(family_a) != set(family_b):
        raise ValueError("families are labelled differently; cannot compare")
    a = {label for label, flag in family_a.items() if flag}
    b = {label for label, flag in family_b.items() if flag}
    return OverlapCounts(
        n_a=len(a),
        n_b=len(b),
        overlap=len(a & b),
        a_only=len(a - b),
        b_only=len(b - a),
    )


def significance_flags(report: ContrastReport, family: str = DIMENSION_FAMILY) -> dict[str, bool]:
    return {r.label: r.significant for r in report.family(family)}
