from apiwarden.reporter.plan import load_plan, replay_plan
from apiwarden.reporter.report import build_report, write_report
from apiwarden.reporter.suites import emit_suite

__all__ = ["build_report", "emit_suite", "load_plan", "replay_plan", "write_report"]
