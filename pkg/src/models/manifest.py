from pydantic import BaseModel, Field


class CheckResult(BaseModel):
    """One embedded assertion of an experiment run."""

    name: str
    passed: bool
    detail: str = ""


class RunManifest(BaseModel):
    experiment: str
    subcommand: str
    seed: int
    config_hash: str
    code_version: str
    started_at: str
    finished_at: str
    outputs: list[str] = Field(default_factory=list)
    checks: list[CheckResult] = Field(default_factory=list)
    passed: bool
    error: str | None = None


class SuiteMemberResult(BaseModel):
    index: int
    subcommand: str
    config: str
    exit_code: int
    failed_checks: list[str] = Field(default_factory=list)
    error: str | None = None


class SuiteSummary(BaseModel):
    members: list[SuiteMemberResult] = Field(default_factory=list)
    passed: bool
