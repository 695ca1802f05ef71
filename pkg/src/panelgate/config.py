"""Preregistered gate configuration and its canonical lock digest.

All thresholds, seeds, resample counts, the rubric, and the judge panel are
fixed here before any data are analysed. The configuration serialises to a
canonical JSON form whose SHA-256 digest (``lock_hash``) is embedded in every
ingested record set and report; analyses refuse to run when digests disagree.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError, LockMismatchError

DEFAULT_RUBRIC: tuple[str, ...] = (
    "action_coherence",
    "risk_alignment",
    "uncertainty_handling",
    "position_sizing",
    "information_use",
    "constraint_awareness",
)

CONFIG_SCHEMA = "panelgate.config.v1"
LOCK_SCHEMA = "panelgate.lock.v1"


@dataclass(frozen=True)
class MdeInputs:
    """Planning assumptions behind the minimum-detectable-effect readout."""

    sigma_d: float = 1.0
    power: float = 0.8
    n_pairs: int = 100


@dataclass(frozen=True)
class PanelJudge:
    judge_id: str
    family: str


@dataclass(frozen=True)
class GateConfig:
    """Hash-locked analysis plan for one evaluation run.

    Field defaults are the preregistered operating points; a run may override
    them, but the resulting lock digest then differs and the run is a
    different preregistration.
    """

    publish_threshold: float = 0.4
    methodology_threshold: float = 0.2
    rs_gate: float = 0.90
    lofo_rho: float = 0.9
    halo_threshold: float = 0.3
    cellb_inner: float = 0.3
    cellb_outer: float = 0.5
    alpha: float = 0.05
    bootstrap_B: int = 1000
    permutation_N: int = 10000
    ci_level: float = 0.95
    token_threshold: int = 60
    same_claim_tail_fraction: float = 0.5
    mde_inputs: MdeInputs = field(default_factory=MdeInputs)
    master_seed: int = 20260214
    rubric_dimensions: tuple[str, ...] = DEFAULT_RUBRIC
    panel_judges: tuple[PanelJudge, ...] = ()
    in_family_judge: tuple[tuple[str, str], ...] = ()
    post_cutoff_regime: str | None = None

    def __post_init__(self) -> None:
        if not (0 <= self.methodology_threshold < self.publish_threshold <= 1):
            raise ConfigError(
                "thresholds must satisfy 0 <= methodology < publish <= 1, got "
                f"({self.methodology_threshold}, {self.publish_threshold})"
            )
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.ci_level < 1:
            raise ConfigError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if self.bootstrap_B < 1:
            raise ConfigError("bootstrap_B must be positive")
        if self.permutation_N < 1:
            raise ConfigError("permutation_N must be positive")
        if self.cellb_inner <= 0 or self.cellb_outer <= self.cellb_inner:
            raise ConfigError(
                "cell B bands must satisfy 0 < inner < outer, got "
                f"({self.cellb_inner}, {self.cellb_outer})"
            )
        if self.token_threshold < 0:
            raise ConfigError("token_threshold must be non-negative")
        if len(set(self.rubric_dimensions)) != len(self.rubric_dimensions):
            raise ConfigError("rubric dimensions must be unique")
        judge_ids = [j.judge_id for j in self.panel_judges]
        if len(set(judge_ids)) != len(judge_ids):
            raise ConfigError("panel judge ids must be unique")
        for cell, judge in self.in_family_judge:
            if judge not in judge_ids:
                raise ConfigError(f"in-family judge {judge!r} for {cell!r} is not on the panel")

    @property
    def judge_ids(self) -> tuple[str, ...]:
        return tuple(j.judge_id for j in self.panel_judges)

    @property
    def judge_families(self) -> dict[str, str]:
        return {j.judge_id: j.family for j in self.panel_judges}

    @property
    def panel_families(self) -> tuple[str, ...]:
        seen: list[str] = []
        for j in self.panel_judges:
            if j.family not in seen:
                seen.append(j.family)
        return tuple(seen)

    def in_family_judge_for(self, cell: str) -> str | None:
        return dict(self.in_family_judge).get(cell)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": CONFIG_SCHEMA,
            "publish_threshold": self.publish_threshold,
            "methodology_threshold": self.methodology_threshold,
            "rs_gate": self.rs_gate,
            "lofo_rho": self.lofo_rho,
            "halo_threshold": self.halo_threshold,
            "cellb_inner": self.cellb_inner,
            "cellb_outer": self.cellb_outer,
            "alpha": self.alpha,
            "bootstrap_B": self.bootstrap_B,
            "permutation_N": self.permutation_N,
            "ci_level": self.ci_level,
            "token_threshold": self.token_threshold,
            "same_claim_tail_fraction": self.same_claim_tail_fraction,
            "mde_inputs": {
                "sigma_d": self.mde_inputs.sigma_d,
                "power": self.mde_inputs.power,
                "n_pairs": self.mde_inputs.n_pairs,
            },
            "master_seed": self.master_seed,
            "rubric_dimensions": list(self.rubric_dimensions),
            "panel_judges": [
                {"judge_id": j.judge_id, "family": j.family} for j in self.panel_judges
            ],
            "in_family_judge": {cell: judge for cell, judge in self.in_family_judge},
            "post_cutoff_regime": self.post_cutoff_regime,
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "GateConfig":
        data = dict(payload)
        schema = data.pop("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise ConfigError(f"unsupported config schema {schema!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "mde_inputs" in data:
            data["mde_inputs"] = MdeInputs(**data["mde_inputs"])
        if "rubric_dimensions" in data:
            data["rubric_dimensions"] = tuple(data["rubric_dimensions"])
        if "panel_judges" in data:
            data["panel_judges"] = tuple(
                PanelJudge(judge_id=j["judge_id"], family=j["family"])
                for j in data["panel_judges"]
            )
        if "in_family_judge" in data:
            data["in_family_judge"] = tuple(sorted(data["in_family_judge"].items()))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "GateConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"config file {path} must contain a JSON object")
        return cls.from_dict(payload)

    def canonical_json(self) -> str:
        # Key order is canonicalised so semantically equal configs share a digest.
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def lock_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def with_overrides(self, **kwargs: Any) -> "GateConfig":
        return replace(self, **kwargs)


def write_lock_file(config: GateConfig, path: str | Path) -> str:
    """Write the canonical config plus digest; returns the digest."""
    payload = {
        "schema": LOCK_SCHEMA,
        "lock_hash": config.lock_hash,
        "config": config.to_dict(),
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return config.lock_hash


def read_lock_file(path: str | Path) -> tuple[GateConfig, str]:
    """Load a lock file, recompute the digest, and verify it."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"lock file {path} is not valid JSON: {exc}") from exc
    if payload.get("schema") != LOCK_SCHEMA:
        raise ConfigError(f"lock file {path} has unsupported schema")
    config = GateConfig.from_dict(payload["config"])
    recorded = payload.get("lock_hash", "")
    if recorded != config.lock_hash:
        raise LockMismatchError(
            f"lock file {path} digest {recorded[:12]}... does not recompute from "
            "its canonical config; the file was edited after locking"
        )
    return config, recorded
