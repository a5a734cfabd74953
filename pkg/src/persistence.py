"""File paths, config loading and artifact writing for experiment runs."""

import csv
import hashlib
import io
import json
import logging
import math
import os
from collections.abc import Callable, Iterable, Sequence
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ValidationError

from src.errors import ConfigError
from src.models import RunConfig

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "FPLAB_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = Path("runs")
RESOLVED_CONFIG_FILE = "resolved_config.json"
MANIFEST_FILE = "manifest.json"


def utc_now_iso() -> str:
    """Current UTC time as ISO-8601 with a trailing ``Z`` (no microseconds)."""
    return datetime.now(UTC).replace(microsecond=0).strftime("%Y-%m-%dT%H:%M:%SZ")


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        key = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{key}: {item['msg']}")
    return "; ".join(parts)


def load_config(path: Path) -> RunConfig:
    """Load and validate a run config; every failure becomes ``ConfigError``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return RunConfig.load_from_file(path)
    except ValidationError as e:
        raise ConfigError(f"{path}: {_describe(e)}") from e


def override_seed(config: RunConfig, seed: int) -> RunConfig:
    """Copy of ``config`` with a new seed, validated like a loaded file."""
    try:
        return RunConfig.model_validate({**config.model_dump(), "seed": seed})
    except ValidationError as e:
        raise ConfigError(f"--seed: {_describe(e)}") from e


def resolved_config_json(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(resolved_config_json(config).encode()).hexdigest()


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, str(DEFAULT_OUTPUT_ROOT)))


def resolve_output_dir(config: RunConfig, override: str | Path | None = None) -> Path:
    """``--out`` wins, then ``output_dir`` from the config, then the env root."""
    if override is not None:
        return Path(override)
    if config.output_dir is not None:
        return Path(config.output_dir)
    return output_root() / config.experiment


def to_jsonable(value: Any) -> Any:
    """Plain JSON data from models, arrays, numpy scalars and containers.

    Non-finite floats become ``None`` so every artifact is strict JSON.
    """
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump(mode="json"))
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (frozenset, set)):
        return [to_jsonable(v) for v in sorted(value)]
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps(payload: Any) -> str:
    text = json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False)
    return text + "\n"


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value)) if math.isfinite(value) else ""
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        writer.writerow([_csv_cell(v) for v in row])
    return buffer.getvalue()


def write_text_atomic(
    path: Path, text: str, validate: Callable[[str], object] | None = None
) -> None:
    """Write to a temporary sibling, validate the re-read text, then replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp = path.with_suffix(path.suffix + ".tmp")
    temp.write_text(text, encoding="utf-8", newline="")
    try:
        reread = temp.read_text(encoding="utf-8")
        if reread != text:
            raise ValueError("re-read text differs from what was written")
        if validate is not None:
            validate(reread)
    except Exception as e:
        temp.unlink(missing_ok=True)
        raise ValueError(f"Failed to validate temporary file {temp}: {e}") from e
    temp.replace(path)


def write_json(path: Path, payload: Any, model: type[BaseModel] | None = None) -> None:
    """Pretty, key-sorted JSON; ``model`` re-validates the written file."""
    text = dumps(payload)
    validate = json.loads if model is None else model.model_validate_json
    write_text_atomic(path, text, validate)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    write_text_atomic(path, csv_text(header, rows))


class ArtifactWriter:
    """Writes a run's artifacts under one directory and remembers their names."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.outputs: list[str] = []

    def _target(self, name: str) -> Path:
        if name in self.outputs:
            raise ValueError(f"artifact {name} written twice")
        self.outputs.append(name)
        return self.out_dir / name

    def json(
        self, name: str, payload: Any, model: type[BaseModel] | None = None
    ) -> None:
        write_json(self._target(name), payload, model)

    def csv(
        self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> None:
        write_csv(self._target(name), header, rows)
