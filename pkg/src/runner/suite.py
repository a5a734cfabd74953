"""Run a list of member configs in declared order and summarise them."""

import logging
from collections.abc import Callable
from pathlib import Path

from src.enums import Subcommand
from src.errors import ConfigError
from src.models import (
    CheckResult,
    RunConfig,
    RunManifest,
    SuiteMemberResult,
    SuiteSummary,
)
from src.persistence import ArtifactWriter, load_config

logger = logging.getLogger(__name__)

SUMMARY_FILE = "suite_summary.json"

MemberRunner = Callable[[Subcommand, RunConfig, Path, Path], RunManifest]


def member_dir_name(index: int, subcommand: Subcommand) -> str:
    return f"{index:02d}_{subcommand}"


def run_suite(
    config: RunConfig,
    writer: ArtifactWriter,
    config_dir: Path,
    run_member: MemberRunner,
) -> list[CheckResult]:
    """Fail-soft: a failing member is recorded and the next one still runs.

    Member config paths resolve against ``config_dir``; each member keeps its
    own seed and writes under ``<out>/<index>_<subcommand>/``.
    """
    results: list[SuiteMemberResult] = []
    for index, member in enumerate(config.suite.members):
        path = Path(config_dir) / member.config
        name = member_dir_name(index, member.subcommand)
        try:
            member_config = load_config(path)
        except ConfigError as e:
            logger.error("suite member %s: %s", name, e)
            results.append(
                SuiteMemberResult(
                    index=index,
                    subcommand=member.subcommand,
                    config=member.config,
                    exit_code=2,
                    error=str(e),
                )
            )
            continue

        manifest = run_member(
            member.subcommand, member_config, writer.out_dir / name, path.parent
        )
        results.append(
            SuiteMemberResult(
                index=index,
                subcommand=member.subcommand,
                config=member.config,
                exit_code=0 if manifest.passed else 1,
                failed_checks=[c.name for c in manifest.checks if not c.passed],
                error=manifest.error,
            )
        )
        logger.info("suite member %s: %s", name, "ok" if manifest.passed else "FAILED")

    summary = SuiteSummary(
        members=results, passed=all(r.exit_code == 0 for r in results)
    )
    writer.json(SUMMARY_FILE, summary, model=SuiteSummary)
    return [
        CheckResult(
            name=member_dir_name(r.index, Subcommand(r.subcommand)),
            passed=r.exit_code == 0,
            detail=r.error or ", ".join(r.failed_checks),
        )
        for r in results
    ]
