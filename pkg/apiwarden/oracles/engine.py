import logging
import time
from typing import Callable, Optional

from apiwarden.auth import AuthManager
from apiwarden.corpus import TestPool
from apiwarden.executor import HttpExecutor
from apiwarden.models.fault import (
    SECURITY_ORACLES,
    SYNTHESIS_CODE,
    TAGGERS,
    Fault,
    FaultCode,
    SecurityConfig,
)
from apiwarden.models.report import PhaseStats
from apiwarden.oracles.access import (
    oracle_f204,
    oracle_f205,
    oracle_f206,
    oracle_f900,
    oracle_f901,
)
from apiwarden.oracles.context import OracleContext
from apiwarden.oracles.disclosure import oracle_f902, oracle_f903, tag_f100, tag_f101
from apiwarden.oracles.injection import oracle_f200, oracle_f201
from apiwarden.oracles.synthesis import synthesize_403
from apiwarden.schema import SchemaModel

logger = logging.getLogger(__name__)

Oracle = Callable[[OracleContext], list[Fault]]

ORACLES: dict[FaultCode, Oracle] = {
    FaultCode.NOT_RECOGNIZED_AUTHENTICATION: oracle_f205,
    FaultCode.EXISTENCE_LEAKAGE: oracle_f204,
    FaultCode.MISSED_AUTHORIZATION_CHECKS: oracle_f206,
    FaultCode.ANONYMOUS_MODIFICATIONS: oracle_f901,
    FaultCode.IGNORE_ANONYMOUS: oracle_f900,
    FaultCode.LEAKED_STACK_TRACE: oracle_f902,
    FaultCode.HIDDEN_ACCESSIBLE: oracle_f903,
    FaultCode.SQL_INJECTION: oracle_f200,
    FaultCode.XSS: oracle_f201,
    FaultCode.HTTP_500: tag_f100,
    FaultCode.SCHEMA_MISMATCH: tag_f101,
}

# oracles that read 403 scenarios from the pool
NEEDS_403 = frozenset(
    {
        FaultCode.NOT_RECOGNIZED_AUTHENTICATION,
        FaultCode.EXISTENCE_LEAKAGE,
        FaultCode.MISSED_AUTHORIZATION_CHECKS,
        FaultCode.IGNORE_ANONYMOUS,
    }
)


def deduplicate(faults: list[Fault]) -> list[Fault]:
    """Keep the first fault per (code, endpoint), sorted by that key."""
    unique: dict[tuple[int, str], Fault] = {}
    for fault in faults:
        if fault.key in unique:
            logger.info(f"Also confirmed F{fault.key[0]} on {fault.endpoint}, keeping the first")
            continue
        unique[fault.key] = fault
    return [unique[key] for key in sorted(unique)]


class SecurityPhase:
    """Runs 403 synthesis and the enabled oracles over one pool, timing each."""

    def __init__(
        self,
        pool: TestPool,
        schema: SchemaModel,
        auth: AuthManager,
        executor: HttpExecutor,
        settings: SecurityConfig,
    ) -> None:
        self.settings = settings
        self.ctx = OracleContext(pool, schema, auth, executor, settings)
        self.stats = PhaseStats()

    def _timed(self, code: int, step: Callable[[], Optional[list[Fault]]]) -> list[Fault]:
        before = self.ctx.new_tests
        started = time.perf_counter()
        try:
            found = step() or []
        except Exception:
            logger.exception(f"Oracle {code} failed, continuing with the next one")
            found = []
        elapsed_ms = (time.perf_counter() - started) * 1000
        self.stats.record(code, self.ctx.new_tests - before, elapsed_ms)
        return found

    def _synthesize(self) -> list[Fault]:
        added = synthesize_403(self.ctx)
        logger.info(f"Added {added} synthesized 403 scenarios to the pool")
        return []

    def run(self) -> tuple[list[Fault], PhaseStats]:
        budget = self.settings.phase_time_budget
        if budget is not None:
            self.ctx.deadline = time.monotonic() + budget
        if budget == 0:
            logger.warning("Security phase budget is zero, no oracle runs")
            self.stats.truncated = True
            return [], self.stats

        # tokens are re-acquired for the security phase
        self.ctx.auth.invalidate()
        enabled = [
            code
            for code in SECURITY_ORACLES + TAGGERS
            if self.settings.enabled(code)
        ]
        if NEEDS_403 & set(enabled):
            self._timed(SYNTHESIS_CODE, self._synthesize)

        faults: list[Fault] = []
        for code in enabled:
            if self.ctx.out_of_time():
                skipped = [int(c) for c in enabled[enabled.index(code):]]
                logger.warning(f"Security phase budget spent, skipping oracles {skipped}")
                self.stats.truncated = True
                break
            logger.info(f"Running oracle F{int(code)} ({code.label})")
            faults.extend(self._timed(int(code), lambda: ORACLES[code](self.ctx)))

        faults = deduplicate(faults)
        logger.info(
            f"Security phase found {len(faults)} faults in "
            f"{self.stats.total_elapsed_ms / 1000:.1f}s"
        )
        return faults, self.stats


def run_security_phase(
    pool: TestPool,
    schema: SchemaModel,
    auth: AuthManager,
    executor: HttpExecutor,
    settings: SecurityConfig,
) -> tuple[list[Fault], PhaseStats]:
    return SecurityPhase(pool, schema, auth, executor, settings).run()
