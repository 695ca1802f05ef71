"""panelgate: claim-permission gating for multi-judge ordinal evaluation panels.

Ingests judge-call score records, applies preregistered agreement,
stability, and adversarial gates, and emits verdict tuples stating which
evaluation claims are publishable, qualified, or invalid. A synthetic-panel
simulator provides the validation oracle.
"""

from .config import GateConfig, MdeInputs, PanelJudge
from .records import (
    Cell,
    JudgeCallRecord,
    RaterScore,
    RecordSet,
    TrajectoryRecord,
    average_trials,
    ingest_records,
    ordinal_round,
    whitespace_token_count,
)
from .verdicts import (
    AdversarialStatus,
    AgreementStatus,
    ClaimScope,
    PublicationLevel,
    StabilityStatus,
    VerdictTuple,
)

__version__ = "0.1.0"

__all__ = [
    "AdversarialStatus",
    "AgreementStatus",
    "Cell",
    "ClaimScope",
    "GateConfig",
    "JudgeCallRecord",
    "MdeInputs",
    "PanelJudge",
    "PublicationLevel",
    "RaterScore",
    "RecordSet",
    "StabilityStatus",
    "TrajectoryRecord",
    "VerdictTuple",
    "average_trials",
    "ingest_records",
    "ordinal_round",
    "whitespace_token_count",
    "__version__",
]
