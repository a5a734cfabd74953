"""Run one subcommand into an output directory and record its manifest."""

import logging
from pathlib import Path

from src import __version__
from src.enums import Subcommand
from src.models import CheckResult, RunConfig, RunManifest
from src.persistence import (
    MANIFEST_FILE,
    RESOLVED_CONFIG_FILE,
    ArtifactWriter,
    config_hash,
    utc_now_iso,
    write_json,
)
from src.runner.experiments import EXPERIMENTS
from src.runner.suite import run_suite

logger = logging.getLogger(__name__)


def _run_checks(
    subcommand: Subcommand, config: RunConfig, writer: ArtifactWriter, config_dir: Path
) -> list[CheckResult]:
    if subcommand == Subcommand.SUITE:
        return run_suite(config, writer, config_dir, run_experiment)
    return EXPERIMENTS[subcommand](config, writer)


def run_experiment(
    subcommand: Subcommand,
    config: RunConfig,
    out_dir: Path,
    config_dir: Path | None = None,
) -> RunManifest:
    """Write the resolved config, run the experiment, then write the manifest.

    Runtime errors are recorded in the manifest instead of propagating, so a
    manifest exists for every run that got past config validation.
    """
    subcommand = Subcommand(subcommand)
    out_dir = Path(out_dir)
    config_dir = Path.cwd() if config_dir is None else Path(config_dir)
    writer = ArtifactWriter(out_dir)
    started = utc_now_iso()
    tol = config.tolerances
    logger.info(
        "%s: experiment=%s seed=%d fixed_point_tol=%g merge_radius=%g "
        "divergence_bound=%g -> %s",
        subcommand,
        config.experiment,
        config.seed,
        tol.fixed_point_tol,
        tol.merge_radius,
        tol.divergence_bound,
        out_dir,
    )

    checks: list[CheckResult] = []
    error = None
    try:
        writer.json(RESOLVED_CONFIG_FILE, config, model=RunConfig)
        checks = _run_checks(subcommand, config, writer, config_dir)
    except Exception as e:
        logger.exception("%s run failed", subcommand)
        error = f"{type(e).__name__}: {e}"

    for check in checks:
        if not check.passed:
            logger.warning("check failed: %s %s", check.name, check.detail)

    manifest = RunManifest(
        experiment=config.experiment,
        subcommand=subcommand.value,
        seed=config.seed,
        config_hash=config_hash(config),
        code_version=__version__,
        started_at=started,
        finished_at=utc_now_iso(),
        outputs=list(writer.outputs),
        checks=checks,
        passed=error is None and all(c.passed for c in checks),
        error=error,
    )
    write_json(out_dir / MANIFEST_FILE, manifest, model=RunManifest)
    return manifest
