from enum import IntEnum
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from apiwarden.config import config
from apiwarden.models.http import TestCase, WireModel
from apiwarden.models.schema import EndpointId


class FaultCode(IntEnum):
    HTTP_500 = 100
    SCHEMA_MISMATCH = 101
    SQL_INJECTION = 200
    XSS = 201
    EXISTENCE_LEAKAGE = 204
    NOT_RECOGNIZED_AUTHENTICATION = 205
    MISSED_AUTHORIZATION_CHECKS = 206
    IGNORE_ANONYMOUS = 900
    ANONYMOUS_MODIFICATIONS = 901
    LEAKED_STACK_TRACE = 902
    HIDDEN_ACCESSIBLE = 903

    @property
    def label(self) -> str:
        return FAULT_LABELS[self]


FAULT_LABELS = {
    FaultCode.HTTP_500: "HTTP Status 500",
    FaultCode.SCHEMA_MISMATCH: "schema mismatch",
    FaultCode.SQL_INJECTION: "SQL Injection (SQLi)",
    FaultCode.XSS: "Cross-Site Scripting (XSS)",
    FaultCode.EXISTENCE_LEAKAGE: "Existence Leakage",
    FaultCode.NOT_RECOGNIZED_AUTHENTICATION: "Not Recognized Authentication",
    FaultCode.MISSED_AUTHORIZATION_CHECKS: "Missed Authorization Checks",
    FaultCode.IGNORE_ANONYMOUS: "Ignore Anonymous",
    FaultCode.ANONYMOUS_MODIFICATIONS: "Anonymous Modifications",
    FaultCode.LEAKED_STACK_TRACE: "Leaked Stack Trace",
    FaultCode.HIDDEN_ACCESSIBLE: "Hidden Accessible",
}

# run order of the security phase
SECURITY_ORACLES = (
    FaultCode.NOT_RECOGNIZED_AUTHENTICATION,
    FaultCode.EXISTENCE_LEAKAGE,
    FaultCode.MISSED_AUTHORIZATION_CHECKS,
    FaultCode.ANONYMOUS_MODIFICATIONS,
    FaultCode.IGNORE_ANONYMOUS,
    FaultCode.LEAKED_STACK_TRACE,
    FaultCode.HIDDEN_ACCESSIBLE,
    FaultCode.SQL_INJECTION,
    FaultCode.XSS,
)
TAGGERS = (FaultCode.HTTP_500, FaultCode.SCHEMA_MISMATCH)

# phase-stats code for 403-scenario synthesis
SYNTHESIS_CODE = 0


class Fault(WireModel):
    code: FaultCode
    endpoint: EndpointId
    reproduction: TestCase
    evidence: str
    flagged_call_index: int

    @model_validator(mode="after")
    def flagged_call_exists(self) -> "Fault":
        if not 0 <= self.flagged_call_index < len(self.reproduction.calls):
            raise ValueError(
                f"flagged call {self.flagged_call_index} outside the reproduction"
            )
        return self

    @property
    def label(self) -> str:
        return self.code.label

    @property
    def key(self) -> tuple[int, str]:
        return (int(self.code), str(self.endpoint))


class SecurityConfig(BaseModel):
    enabled_oracles: frozenset[FaultCode] = frozenset(SECURITY_ORACLES)
    sqli_sleep_seconds: float = config.SQLI_SLEEP_SECONDS
    sqli_baseline_max_ms: float = config.SQLI_BASELINE_MAX_MS
    sqli_payloads: list[str] = Field(default_factory=list)
    xss_payloads: list[str] = Field(default_factory=list)
    stack_trace_patterns: dict[str, list[str]] = Field(default_factory=dict)
    phase_time_budget: Optional[float] = None
    http_timeout_seconds: float = config.HTTP_TIMEOUT_SECONDS
    seed: int = 0

    @model_validator(mode="after")
    def thresholds_consistent(self) -> "SecurityConfig":
        if not self.sqli_sleep_seconds * 1000 > self.sqli_baseline_max_ms:
            raise ValueError(
                "SQLi sleep must exceed the baseline threshold: "
                f"{self.sqli_sleep_seconds}s vs {self.sqli_baseline_max_ms}ms"
            )
        needed = self.sqli_sleep_seconds + self.sqli_baseline_max_ms / 1000 + 1
        if FaultCode.SQL_INJECTION in self.enabled_oracles and (
            self.http_timeout_seconds <= needed
        ):
            raise ValueError(
                f"HTTP timeout {self.http_timeout_seconds}s must exceed "
                f"SQLi sleep + baseline + 1s margin ({needed:.1f}s)"
            )
        if FaultCode.SQL_INJECTION in self.enabled_oracles and not self.sqli_payloads:
            raise ValueError("SQLi oracle enabled without payloads")
        if FaultCode.XSS in self.enabled_oracles and not self.xss_payloads:
            raise ValueError("XSS oracle enabled without payloads")
        if (
            FaultCode.LEAKED_STACK_TRACE in self.enabled_oracles
            and not self.stack_trace_patterns
        ):
            raise ValueError("stack-trace oracle enabled without patterns")
        if self.phase_time_budget is not None and self.phase_time_budget < 0:
            raise ValueError("security phase budget must not be negative")
        return self

    def enabled(self, code: FaultCode) -> bool:
        return code in self.enabled_oracles
