"""Command-line front end: lock a config, ingest records, run analyses,
emit reports.

Exit codes are total and documented: 0 success (verdict content never
changes the exit code unless --fail-on requests it), 1 --fail-on condition
met, 2 usage error, 3 lock mismatch, 4 validation failure, 5 analysis
infeasibility, 6 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .config import GateConfig, read_lock_file, write_lock_file
from .errors import (
    BootstrapFailureError,
    ClusterCountError,
    ConfigError,
    DegenerateAgreementError,
    DegenerateVarianceError,
    DimensionSchemaError,
    DomainError,
    DuplicateRecordError,
    InfeasibleTargetError,
    LockMismatchError,
    PairingError,
    PanelArityError,
    PanelGateError,
    RecordParseError,
    RsUndefinedError,
    ScoreValidationError,
    UndefinedCorrelationError,
)
from .pipeline import ALL_SECTIONS, run_full_analysis
from .records import ingest_records, write_canonical
from .report import RunManifest, write_reports
from .simulate import generate_panel, load_default_fixture, load_fixture
from .verdicts import AgreementStatus, PublicationLevel

EXIT_OK = 0
EXIT_FAIL_ON = 1
EXIT_USAGE = 2
EXIT_LOCK = 3
EXIT_VALIDATION = 4
EXIT_INFEASIBLE = 5
EXIT_IO = 6

_ANALYSIS_SECTIONS = {
    "validate": frozenset(),
    "agreement": frozenset({"agreement"}),
    "bootstrap": frozenset({"bootstrap"}),
    "contrasts": frozenset({"contrasts"}),
    "stability": frozenset({"stability"}),
    "adversarial": frozenset({"adversarial"}),
    "verdict": frozenset({"agreement", "bootstrap", "stability", "adversarial", "verdict"}),
    "report": ALL_SECTIONS,
    "all": ALL_SECTIONS,
}

_VALIDATION_ERRORS = (
    RecordParseError,
    DuplicateRecordError,
    ScoreValidationError,
    DimensionSchemaError,
    DomainError,
    PairingError,
)
_INFEASIBILITY_ERRORS = (
    ClusterCountError,
    BootstrapFailureError,
    DegenerateAgreementError,
    DegenerateVarianceError,
    PanelArityError,
    RsUndefinedError,
    UndefinedCorrelationError,
    InfeasibleTargetError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panelgate",
        description="Claim-permission gating for multi-judge ordinal evaluation panels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    lock = sub.add_parser("lock", help="canonicalise and hash-lock a config")
    lock.add_argument("--config", required=True, help="config JSON to lock")
    lock.add_argument("--out", required=True, help="lock file to write")

    simulate = sub.add_parser("simulate", help="generate a synthetic panel")
    simulate.add_argument("--fixture", help="fixture JSON (default: calibrated fixture)")
    simulate.add_argument("--out", required=True, help="output directory")
    simulate.add_argument("--seed", type=int, help="override the fixture seed")

    for name in _ANALYSIS_SECTIONS:
        cmd = sub.add_parser(name, help=f"run the {name} stage")
        cmd.add_argument("--lock", required=True, help="lock file from `panelgate lock`")
        cmd.add_argument("--config", help="config JSON; must match the lock digest")
        cmd.add_argument("--input", required=True, help="line-delimited record file")
        cmd.add_argument("--out", help="output directory for reports")
        cmd.add_argument("--seed", type=int, help="override the config master seed")
        cmd.add_argument(
            "--fail-on",
            choices=["no_claim", "halt"],
            help="exit nonzero when the named verdict outcome occurs",
        )
        cmd.add_argument(
            "--format",
            choices=["machine", "human", "both"],
            default="both",
            help="report format(s) to write",
        )
        cmd.add_argument(
            "--alt-cutoffs",
            default="0.5:0.25",
            help="comma-separated publish:methodology pairs for gate sensitivity",
        )
    return parser


def _parse_cutoffs(raw: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            publish, methodology = chunk.split(":")
            pairs.append((float(publish), float(methodology)))
        except ValueError as exc:
            raise ConfigError(f"malformed --alt-cutoffs entry {chunk!r}") from exc
    return tuple(pairs)


def _cmd_lock(args: argparse.Namespace) -> int:
    config = GateConfig.from_file(args.config)
    digest = write_lock_file(config, args.out)
    print(f"locked {args.config} -> {args.out} ({digest[:16]}...)")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    if args.fixture:
        sim, config, _ = load_fixture(args.fixture)
    else:
        sim, config, _ = load_default_fixture()
    if args.seed is not None:
        from dataclasses import replace

        sim = replace(sim, seed=args.seed)
        config = config.with_overrides(master_seed=args.seed)
    records = generate_panel(sim, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_canonical(records, out / "records.jsonl")
    (out / "config.json").write_text(
        __import__("json").dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    write_lock_file(config, out / "config.lock.json")
    summary = records.summary()
    print(f"simulated {summary.describe()} -> {out}")
    return EXIT_OK


def _cmd_analysis(args: argparse.Namespace) -> int:
    config, digest = read_lock_file(args.lock)
    if args.config:
        supplied = GateConfig.from_file(args.config)
        if supplied.lock_hash != digest:
            raise LockMismatchError(
                f"config {args.config} digest {supplied.lock_hash[:12]}... does not "
                f"match lock {digest[:12]}..."
            )
    if args.seed is not None:
        config = config.with_overrides(master_seed=args.seed)

    records = ingest_records(Path(args.input), config)
    summary = records.summary()
    print(f"ingested {summary.describe()}")
    if args.command == "validate":
        for trajectory_id in summary.incomplete_ids:
            print(f"  incomplete: {trajectory_id}")
        return EXIT_OK

    results = run_full_analysis(
        records,
        config,
        sections=_ANALYSIS_SECTIONS[args.command],
        alt_cutoffs=_parse_cutoffs(args.alt_cutoffs),
        seed=args.seed,
    )

    if results.agreement_aggregate is not None:
        print(f"aggregate kappa_bar = {results.agreement_aggregate.kappa_bar:.4f}")
    for drop in results.lofo:
        print(f"lofo drop-{drop.dropped_judge}: rho = {drop.rho_vs_full:.2f}")
    for verdict in results.verdicts:
        print(
            f"verdict {verdict.claim_scope.label}: "
            f"{verdict.permitted_publication_level.value}"
        )

    if args.out:
        manifest = RunManifest(
            config_path=args.config or args.lock,
            lock_hash=config.lock_hash,
            input_paths=(args.input,),
            requested_analyses=(args.command,),
            output_paths=(args.out,),
            seed=args.seed if args.seed is not None else config.master_seed,
        )
        written = write_reports(results, manifest, args.out, formats=args.format)
        for path in written:
            print(f"wrote {path}")

    if args.fail_on == "no_claim" and any(
        v.permitted_publication_level is PublicationLevel.NO_CLAIM
        for v in results.verdicts
    ):
        print("fail-on: no_claim verdict present", file=sys.stderr)
        return EXIT_FAIL_ON
    if args.fail_on == "halt" and any(
        v.agreement_status is AgreementStatus.HALT for v in results.verdicts
    ):
        print("fail-on: halt agreement status present", file=sys.stderr)
        return EXIT_FAIL_ON
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "lock":
            return _cmd_lock(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_analysis(args)
    except LockMismatchError as exc:
        print(f"lock mismatch: {exc}", file=sys.stderr)
        return EXIT_LOCK
    except _VALIDATION_ERRORS as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _INFEASIBILITY_ERRORS as exc:
        print(f"analysis infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except PanelGateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
