import logging
from pathlib import Path
from typing import Union

from apiwarden.errors import ReportError
from apiwarden.models.fault import Fault
from apiwarden.models.report import FaultRecord, FaultReport, PhaseStats

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"


def build_report(
    faults: list[Fault],
    stats: PhaseStats,
    base_url: str,
    schema_source: str,
    seed: int,
) -> FaultReport:
    return FaultReport(
        target_base_url=base_url,
        schema_source=schema_source,
        run_seed=seed,
        faults=[FaultRecord.from_fault(f) for f in faults],
        phase_stats=stats,
    )


def write_report(report: FaultReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.model_dump_json(by_alias=True, indent=2) + "\n")
    except OSError as err:
        raise ReportError(f"could not write report {path}: {err}") from err
    logger.info(f"Wrote report with {len(report.faults)} faults to {path}")
    return path
