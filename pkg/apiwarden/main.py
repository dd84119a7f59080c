import logging
import sys
from enum import IntEnum
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from apiwarden.auth import AuthManager, read_auth_config
from apiwarden.config import config
from apiwarden.corpus import TestPool, load_pool, save_pool
from apiwarden.errors import ApiWardenError, CorpusError, TransportError
from apiwarden.executor import HttpExecutor
from apiwarden.fixtures import FIXTURES, get_fixture, start_fixture, stop_fixture
from apiwarden.fuzzer import base_fuzz
from apiwarden.logging_conf import configure_logging, stderr_console
from apiwarden.models.fault import SECURITY_ORACLES, TAGGERS, FaultCode, SecurityConfig
from apiwarden.models.report import SUITE_FORMATS, RunConfig
from apiwarden.oracles import run_security_phase
from apiwarden.payloads import (
    load_sqli_payloads,
    load_stack_trace_patterns,
    load_xss_payloads,
)
from apiwarden.reporter import (
    build_report,
    emit_suite,
    load_plan,
    replay_plan,
    write_report,
)
from apiwarden.reporter.report import REPORT_FILE
from apiwarden.schema import SchemaModel, read_schema_source

logger = logging.getLogger(__name__)

_TOGGLEABLE = {int(c) for c in SECURITY_ORACLES + TAGGERS}


class ExitCode(IntEnum):
    CLEAN = 0
    ERROR = 1
    FAULTS = 2


def parse_oracle_toggles(toggles: tuple[str, ...]) -> frozenset[int]:
    enabled = {int(c) for c in SECURITY_ORACLES}
    for toggle in toggles:
        code, _, state = toggle.partition("=")
        if not code.isdigit() or int(code) not in _TOGGLEABLE or state not in ("on", "off"):
            raise click.BadParameter(
                f"{toggle!r} is not <code>=on|off with code in "
                f"{sorted(_TOGGLEABLE)}",
                param_hint="--oracle",
            )
        (enabled.add if state == "on" else enabled.discard)(int(code))
    return frozenset(enabled)


def parse_emit(value: str) -> tuple[str, ...]:
    formats = tuple(f.strip() for f in value.split(",") if f.strip())
    unknown = [f for f in formats if f not in SUITE_FORMATS]
    if unknown:
        raise click.BadParameter(
            f"unknown suite format(s) {', '.join(unknown)}", param_hint="--emit"
        )
    return formats


def security_settings(run: RunConfig) -> SecurityConfig:
    enabled = frozenset(FaultCode(c) for c in run.enabled_oracles)
    return SecurityConfig(
        enabled_oracles=enabled,
        sqli_sleep_seconds=run.sqli_sleep_seconds,
        sqli_baseline_max_ms=run.sqli_baseline_max_ms,
        sqli_payloads=load_sqli_payloads(run.sqli_sleep_seconds, config.SQLI_PAYLOAD_FILE),
        xss_payloads=load_xss_payloads(config.XSS_PAYLOAD_FILE),
        stack_trace_patterns=load_stack_trace_patterns(config.STACK_TRACE_PATTERN_FILE),
        phase_time_budget=run.security_budget,
        http_timeout_seconds=config.HTTP_TIMEOUT_SECONDS,
        seed=run.seed,
    )


def _same_source(recorded: str, given: str) -> bool:
    if recorded.startswith(("http://", "https://")) or given.startswith(
        ("http://", "https://")
    ):
        return recorded.rstrip("/") == given.rstrip("/")
    return Path(recorded).resolve() == Path(given).resolve()


def _load_corpus(run: RunConfig, schema: SchemaModel) -> TestPool:
    pool, corpus = load_pool(run.corpus_in)
    if corpus.base_url.rstrip("/") != run.base_url.rstrip("/"):
        raise CorpusError(
            f"corpus {run.corpus_in} was recorded against {corpus.base_url}, "
            f"not {run.base_url}"
        )
    # corpora saved without a source only get the endpoint check
    if corpus.schema_source and not _same_source(corpus.schema_source, run.schema_source):
        raise CorpusError(
            f"corpus {run.corpus_in} was recorded with schema {corpus.schema_source}, "
            f"not {run.schema_source}"
        )
    undeclared = [str(e) for e in pool.endpoints if not schema.has_endpoint(e)]
    if undeclared:
        raise CorpusError(
            f"corpus {run.corpus_in} holds endpoints the schema does not declare: "
            f"{', '.join(sorted(undeclared))}"
        )
    logger.info(f"Loaded {len(pool)} pool entries from {run.corpus_in}")
    return pool


def run_campaign(run: RunConfig) -> ExitCode:
    """Fuzz (or load a corpus), run the security phase, write report and suites."""
    settings = security_settings(run)
    schema = read_schema_source(run.schema_source, config.HTTP_TIMEOUT_SECONDS)
    auth = AuthManager(read_auth_config(run.auth_config))

    with HttpExecutor(run.base_url, auth) as executor:
        if run.corpus_in is not None:
            pool = _load_corpus(run, schema)
        else:
            pool = base_fuzz(
                schema, auth, executor, run.budget_seconds, run.seed,
                run.max_rounds, run.deny_list,
            )
        if run.corpus_out is not None:
            save_pool(pool, run.corpus_out, run.base_url, run.schema_source, run.seed)
        faults, stats = run_security_phase(pool, schema, auth, executor, settings)

    report = build_report(faults, stats, run.base_url, run.schema_source, run.seed)
    write_report(report, run.out_dir / REPORT_FILE)
    for suite_format in run.emit:
        suite = emit_suite(faults, pool, suite_format, run.base_url, auth.identities)
        for path in suite.write(run.out_dir):
            logger.info(f"Wrote {suite_format} suite {path}")

    for fault in faults:
        stderr_console.print(
            f"[bold red]F{int(fault.code)}[/] {fault.label} at {fault.endpoint}"
        )
    logger.info(
        f"Security phase found {len(faults)} faults in "
        f"{stats.total_elapsed_ms:.0f} ms"
    )
    return ExitCode.FAULTS if faults else ExitCode.CLEAN


def _finish(step) -> None:
    try:
        code = step()
    except (ApiWardenError, ValidationError, click.ClickException) as err:
        logger.error(f"{type(err).__name__}: {err}")
        code = ExitCode.ERROR
    sys.exit(int(code))


def campaign_options(command):
    options = [
        click.option(
            "--schema", "schema_source", required=True, help="OpenAPI v3 file or URL."
        ),
        click.option("--base-url", required=True, help="Root URL of the API under test."),
        click.option(
            "--auth", "auth_config", required=True, type=click.Path(), help="Auth config YAML."
        ),
        click.option("--seed", type=int, default=config.FUZZ_SEED, show_default=True),
        click.option("--oracle", "oracles", multiple=True, metavar="CODE=on|off"),
        click.option(
            "--sqli-sleep-seconds",
            type=float,
            default=config.SQLI_SLEEP_SECONDS,
            show_default=True,
        ),
        click.option(
            "--sqli-baseline-max-ms",
            type=float,
            default=config.SQLI_BASELINE_MAX_MS,
            show_default=True,
        ),
        click.option("--security-budget-seconds", type=float),
        click.option("--security-budget-percent", type=float),
        click.option("--emit", default=",".join(SUITE_FORMATS), show_default=True),
        click.option("--corpus-out", type=click.Path(path_type=Path)),
        click.option(
            "--out-dir",
            type=click.Path(path_type=Path),
            default=Path("apiwarden-out"),
            show_default=True,
        ),
        click.option(
            "--deny", "deny_list", multiple=True, help="Path glob never mutated while fuzzing."
        ),
        click.option("--log-level", default=None),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _run_config(**kwargs) -> RunConfig:
    kwargs["enabled_oracles"] = parse_oracle_toggles(kwargs.pop("oracles"))
    kwargs["emit"] = parse_emit(kwargs["emit"])
    kwargs["deny_list"] = tuple(kwargs["deny_list"]) or tuple(config.MUTATION_DENY_LIST)
    return RunConfig(**kwargs)


@click.group()
def cli():
    """Black-box security fuzzing for REST APIs."""


@cli.command()
@campaign_options
@click.option("--budget-seconds", type=float, default=30.0, show_default=True)
@click.option("--corpus-in", type=click.Path(path_type=Path))
def fuzz(log_level: Optional[str], **kwargs):
    """Fuzz the API, then run the security oracles on the resulting pool."""
    configure_logging(log_level)
    _finish(lambda: run_campaign(_run_config(**kwargs)))


@cli.command()
@campaign_options
@click.option("--corpus-in", type=click.Path(path_type=Path), required=True)
def security(log_level: Optional[str], **kwargs):
    """Run only the security phase on a saved corpus."""
    configure_logging(log_level)
    _finish(lambda: run_campaign(_run_config(budget_seconds=0, **kwargs)))


def _replay(plan_path: Path, base_url: Optional[str]) -> ExitCode:
    plan = load_plan(plan_path)
    auth = AuthManager(plan.identities)
    with HttpExecutor(base_url or plan.target_base_url, auth) as executor:
        try:
            outcomes = replay_plan(plan, executor)
        except TransportError as err:
            logger.error(f"Target unreachable: {err}")
            return ExitCode.ERROR
    failed = [o for o in outcomes if not o.passed]
    logger.info(f"{len(outcomes) - len(failed)}/{len(outcomes)} plan tests passed")
    return ExitCode.ERROR if failed else ExitCode.CLEAN


@cli.command()
@click.argument("plan_path", type=click.Path(path_type=Path))
@click.option("--base-url", help="Override the plan's target URL.")
@click.option("--log-level", default=None)
def replay(plan_path: Path, base_url: Optional[str], log_level: Optional[str]):
    """Re-execute a json-plan suite; exit 0 iff every expectation holds."""
    configure_logging(log_level)
    _finish(lambda: _replay(plan_path, base_url))


@cli.command("list-fixtures")
def list_fixtures():
    """List the bundled fixture APIs and the fault each one seeds."""
    for spec in FIXTURES.values():
        code = f"F{int(spec.seeded_fault)}" if spec.seeded_fault else "-"
        click.echo(f"{spec.name:32} {code:6} {spec.description}")


@cli.command("serve-fixture")
@click.argument("name")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--sleep-seconds", type=float, help="SQL injection fixture delay.")
@click.option("--sleep/--no-sleep", "sleep_enabled", default=True)
def serve_fixture(
    name: str, host: str, port: int, sleep_seconds: Optional[float], sleep_enabled: bool
):
    """Serve one fixture API until interrupted."""
    configure_logging()
    try:
        spec = get_fixture(name)
        options = {}
        if spec.seeded_fault == FaultCode.SQL_INJECTION:
            options["sleep_enabled"] = sleep_enabled
            if sleep_seconds is not None:
                options["sleep_seconds"] = sleep_seconds
        handle = start_fixture(spec, host, port, **options)
    except ApiWardenError as err:
        logger.error(str(err))
        sys.exit(int(ExitCode.ERROR))
    click.echo(handle.base_url)
    try:
        handle.thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        stop_fixture(handle)


def main() -> None:
    """Console entry point; usage errors exit 1 so that 2 always means faults."""
    try:
        cli.main(standalone_mode=False)
    except click.ClickException as err:
        err.show()
        sys.exit(int(ExitCode.ERROR))
    except click.Abort:
        sys.exit(int(ExitCode.ERROR))
