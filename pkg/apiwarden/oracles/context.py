import json
import logging
import random
import time
from typing import Any, Iterator, Optional

from apiwarden.auth import AuthManager
from apiwarden.corpus import TestPool, observed, refresh_created_ids
from apiwarden.executor import HttpExecutor, verify_statuses
from apiwarden.models.fault import Fault, FaultCode, SecurityConfig
from apiwarden.models.http import Provenance, TestCase, TestRun
from apiwarden.models.schema import EndpointId
from apiwarden.schema import SchemaModel

logger = logging.getLogger(__name__)


def json_strings(body: str) -> Iterator[str]:
    """String leaves of a JSON body; nothing when the body is not JSON."""
    try:
        document: Any = json.loads(body)
    except (json.JSONDecodeError, TypeError):
        return
    stack = [document]
    while stack:
        node = stack.pop()
        if isinstance(node, str):
            yield node
        elif isinstance(node, dict):
            stack.extend(node.values())
        elif isinstance(node, list):
            stack.extend(node)


class OracleContext:
    """Shared state of one security phase: pool, target and new-test accounting."""

    def __init__(
        self,
        pool: TestPool,
        schema: SchemaModel,
        auth: AuthManager,
        executor: HttpExecutor,
        settings: SecurityConfig,
    ) -> None:
        self.pool = pool
        self.schema = schema
        self.auth = auth
        self.executor = executor
        self.settings = settings
        self.rng = random.Random(settings.seed)
        self.new_tests = 0
        self.deadline: Optional[float] = None

    def out_of_time(self) -> bool:
        return self.deadline is not None and time.monotonic() >= self.deadline

    def run(self, test: TestCase) -> tuple[TestCase, TestRun]:
        fresh = refresh_created_ids(test, self.rng)
        self.new_tests += 1
        return fresh, self.executor.run_test_case(fresh)

    def confirm(self, test: TestCase) -> Optional[tuple[TestCase, TestRun]]:
        """Execute `test` and keep it only when every expected status is observed again."""
        fresh, run = self.run(test)
        if run.unbindable or not verify_statuses(fresh, run):
            logger.debug(f"Discarding scenario, statuses drifted: {run.statuses}")
            return None
        return fresh, run

    def fault(
        self,
        code: FaultCode,
        endpoint: EndpointId,
        test: TestCase,
        run: Optional[TestRun],
        flagged: int,
        evidence: str,
    ) -> Fault:
        reproduction = observed(test, run) if run is not None else test
        reproduction = reproduction.model_copy(
            update={"provenance": Provenance(kind="securitySynthesis", oracle_code=int(code))}
        )
        logger.warning(f"F{int(code)} {code.label} on {endpoint}: {evidence}")
        return Fault(
            code=code,
            endpoint=endpoint,
            reproduction=reproduction,
            evidence=evidence,
            flagged_call_index=flagged,
        )
