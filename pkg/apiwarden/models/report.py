from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional

from pydantic import Field, field_serializer, model_validator

from apiwarden import __version__
from apiwarden.config import config
from apiwarden.models.auth import AuthIdentity
from apiwarden.models.fault import SECURITY_ORACLES, Fault
from apiwarden.models.http import TestCase, WireModel
from apiwarden.models.schema import EndpointId

SuiteFormat = Literal["json-plan", "shell", "httpfile"]
SUITE_FORMATS: tuple[SuiteFormat, ...] = ("json-plan", "shell", "httpfile")


class OracleStats(WireModel):
    code: int
    new_tests_executed: int = 0
    elapsed_ms: float = 0.0


class PhaseStats(WireModel):
    per_oracle: list[OracleStats] = Field(default_factory=list)
    total_elapsed_ms: float = 0.0
    truncated: bool = Field(default=False, exclude=True)

    def record(self, code: int, new_tests: int, elapsed_ms: float) -> OracleStats:
        stats = OracleStats(
            code=code, new_tests_executed=new_tests, elapsed_ms=round(elapsed_ms, 3)
        )
        self.per_oracle.append(stats)
        self.total_elapsed_ms = round(sum(s.elapsed_ms for s in self.per_oracle), 3)
        return stats

    def for_code(self, code: int) -> Optional[OracleStats]:
        return next((s for s in self.per_oracle if s.code == code), None)


class FaultRecord(WireModel):
    code: int
    label: str
    endpoint: EndpointId
    flagged_call_index: int
    evidence: str
    test: TestCase

    @classmethod
    def from_fault(cls, fault: Fault) -> "FaultRecord":
        return cls(
            code=int(fault.code),
            label=fault.label,
            endpoint=fault.endpoint,
            flagged_call_index=fault.flagged_call_index,
            evidence=fault.evidence,
            test=fault.reproduction,
        )


class FaultReport(WireModel):
    format_version: int = 1
    target_base_url: str
    schema_source: str
    run_seed: int
    tool_version: str = __version__
    faults: list[FaultRecord] = Field(default_factory=list)
    phase_stats: PhaseStats = Field(default_factory=PhaseStats)
    generated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    observed_faults: int = 0

    @model_validator(mode="after")
    def faults_sorted(self) -> "FaultReport":
        self.faults.sort(key=lambda f: (f.code, str(f.endpoint)))
        self.observed_faults = len(self.faults)
        return self

    @field_serializer("generated_at")
    def utc_iso(self, value: datetime) -> str:
        return value.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


class PlanTest(WireModel):
    name: str
    fault_code: Optional[int] = None
    flagged_call_index: Optional[int] = None
    comment: Optional[str] = None
    test: TestCase


class TestPlan(WireModel):
    """What the json-plan format stores and `replay` executes."""

    __test__ = False

    format_version: int = 1
    target_base_url: str
    identities: list[AuthIdentity] = Field(default_factory=list)
    tests: list[PlanTest] = Field(default_factory=list)


class EmittedSuite(WireModel):
    format: SuiteFormat
    files: list[tuple[str, str]] = Field(default_factory=list)

    def write(self, out_dir: Path) -> list[Path]:
        written = []
        for name, content in self.files:
            target = out_dir / name
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(content)
            written.append(target)
        return written


class RunConfig(WireModel):
    schema_source: str
    base_url: str
    auth_config: str
    budget_seconds: float = 30.0
    seed: int = config.FUZZ_SEED
    enabled_oracles: frozenset[int] = frozenset(int(c) for c in SECURITY_ORACLES)
    sqli_sleep_seconds: float = config.SQLI_SLEEP_SECONDS
    sqli_baseline_max_ms: float = config.SQLI_BASELINE_MAX_MS
    out_dir: Path = Path("apiwarden-out")
    emit: tuple[SuiteFormat, ...] = SUITE_FORMATS
    corpus_in: Optional[Path] = None
    corpus_out: Optional[Path] = None
    security_budget_seconds: Optional[float] = None
    security_budget_percent: Optional[float] = None
    max_rounds: int = config.FUZZ_MAX_ROUNDS
    deny_list: tuple[str, ...] = tuple(config.MUTATION_DENY_LIST)

    @model_validator(mode="after")
    def budgets_valid(self) -> "RunConfig":
        if self.corpus_in is None and not self.budget_seconds > 0:
            raise ValueError("fuzzing budget must be positive")
        if self.security_budget_percent is not None and not (
            0 < self.security_budget_percent <= 100
        ):
            raise ValueError("security budget percentage must be in (0, 100]")
        if self.security_budget_percent is not None and not self.budget_seconds > 0:
            raise ValueError(
                "security budget percentage needs a fuzzing budget, "
                "give --security-budget-seconds instead"
            )
        if (
            self.security_budget_seconds is not None
            and self.security_budget_percent is not None
        ):
            raise ValueError("give the security budget in seconds or percent, not both")
        return self

    @property
    def security_budget(self) -> Optional[float]:
        if self.security_budget_percent is not None:
            return self.budget_seconds * self.security_budget_percent / 100
        return self.security_budget_seconds
