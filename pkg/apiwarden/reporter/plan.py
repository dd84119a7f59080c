import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from apiwarden.executor import HttpExecutor, verify_statuses, verify_timings
from apiwarden.errors import PlanError
from apiwarden.models.http import TestRun
from apiwarden.models.report import PlanTest, TestPlan

logger = logging.getLogger(__name__)


@dataclass
class ReplayOutcome:
    test: PlanTest
    run: TestRun

    @property
    def passed(self) -> bool:
        return (
            not self.run.unbindable
            and verify_statuses(self.test.test, self.run)
            and verify_timings(self.test.test, self.run)
        )


def load_plan(path: Union[str, Path]) -> TestPlan:
    try:
        return TestPlan.model_validate_json(Path(path).read_text())
    except OSError as err:
        raise PlanError(f"could not read plan {path}: {err}") from err
    except ValidationError as err:
        raise PlanError(f"plan {path} does not parse: {err}") from err


def replay_plan(plan: TestPlan, executor: HttpExecutor) -> list[ReplayOutcome]:
    """Run every plan test in order; transport errors propagate."""
    outcomes = []
    for test in plan.tests:
        outcome = ReplayOutcome(test, executor.run_test_case(test.test))
        if outcome.passed:
            logger.info(f"{test.name}: passed")
        else:
            logger.warning(f"{test.name}: failed, observed {outcome.run.statuses}")
        outcomes.append(outcome)
    return outcomes
