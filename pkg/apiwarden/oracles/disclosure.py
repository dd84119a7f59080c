import logging
import re
from typing import Any, Optional

from apiwarden.corpus import slice_prefix
from apiwarden.fuzzer import ValueGenerator
from apiwarden.models.auth import ANONYMOUS
from apiwarden.models.fault import Fault, FaultCode
from apiwarden.models.http import HttpAction, TestCase
from apiwarden.models.schema import EndpointId, HttpVerb, ParamLocation
from apiwarden.oracles.context import OracleContext, json_strings
from apiwarden.payloads import compile_patterns
from apiwarden.schema import parse_allow_header

logger = logging.getLogger(__name__)

HIDDEN_EXEMPT_STATUSES = frozenset({403, 405, 501})


def find_stack_trace(
    body: str, patterns: dict[str, list[re.Pattern]]
) -> Optional[tuple[str, str]]:
    """First (language, matched text) found in the raw body or its JSON strings."""
    texts = [body] + list(json_strings(body))
    for language, compiled in patterns.items():
        for pattern in compiled:
            for text in texts:
                match = pattern.search(text)
                if match:
                    return language, match.group(0)
    return None


def oracle_f902(ctx: OracleContext) -> list[Fault]:
    patterns = compile_patterns(ctx.settings.stack_trace_patterns)
    faults = []
    for endpoint in ctx.pool.endpoints:
        refs = ctx.pool.find_all(endpoint, 500)
        if not refs:
            continue
        # one representative per endpoint: the shortest 500 body
        ref = min(refs, key=lambda r: len(r.call.response_body))
        found = find_stack_trace(ref.call.response_body, patterns)
        if found is None:
            continue
        language, snippet = found
        faults.append(
            ctx.fault(
                FaultCode.LEAKED_STACK_TRACE,
                endpoint,
                slice_prefix(ref),
                None,
                ref.target_index,
                f"500 response leaks a {language} stack trace: {snippet[:120]!r}",
            )
        )
    return faults


def _probe_args(ctx: OracleContext, path: str, values: ValueGenerator) -> dict[str, Any]:
    for verb in ctx.schema.verbs_at(path):
        ref = ctx.pool.find_entry(EndpointId(verb=verb, path=path))
        if ref is not None:
            return dict(ref.call.action.path_args)
    args: dict[str, Any] = {}
    for verb in ctx.schema.verbs_at(path):
        spec = ctx.schema.endpoint(EndpointId(verb=verb, path=path))
        for param in spec.params_in(ParamLocation.path):
            args.setdefault(param.name, values.value(param))
    return args


def oracle_f903(ctx: OracleContext) -> list[Fault]:
    values = ValueGenerator(ctx.rng)
    faults = []
    flagged: set[EndpointId] = set()
    probes = [ANONYMOUS] + [i.name for i in ctx.auth.authenticated]
    for path in ctx.schema.paths:
        args = _probe_args(ctx, path, values)
        for identity in probes:
            if ctx.out_of_time():
                return faults
            options = HttpAction(
                endpoint=EndpointId(verb=HttpVerb.OPTIONS, path=path),
                identity=identity,
                path_args=args,
            )
            _, run = ctx.run(TestCase(calls=[options]))
            allow = run.last.header("allow") if run.last else None
            if not allow:
                logger.info(f"OPTIONS {path} as {identity} has no Allow header, skipping")
                continue
            for verb in ctx.schema.undeclared_verbs(path, parse_allow_header(allow)):
                hidden = EndpointId(verb=verb, path=path)
                if hidden in flagged:
                    continue
                probe = TestCase(
                    calls=[
                        options,
                        HttpAction(endpoint=hidden, identity=identity, path_args=args),
                    ]
                )
                probe, run = ctx.run(probe)
                if len(run.calls) < 2 or run.calls[1].timed_out:
                    continue
                status = run.calls[1].status
                if status in HIDDEN_EXEMPT_STATUSES:
                    continue
                flagged.add(hidden)
                faults.append(
                    ctx.fault(
                        FaultCode.HIDDEN_ACCESSIBLE,
                        hidden,
                        probe,
                        run,
                        1,
                        f"{verb.value} is advertised by Allow: {allow} but not declared "
                        f"in the schema, and answers {status} to {identity}",
                    )
                )
    return faults


def tag_f100(ctx: OracleContext) -> list[Fault]:
    faults = []
    for endpoint in ctx.pool.endpoints:
        ref = ctx.pool.find_entry(endpoint, 500)
        if ref is not None:
            faults.append(
                ctx.fault(
                    FaultCode.HTTP_500, endpoint, slice_prefix(ref), None,
                    ref.target_index, "server answered 500",
                )
            )
    return faults


def tag_f101(ctx: OracleContext) -> list[Fault]:
    faults = []
    for endpoint in ctx.pool.endpoints:
        if not ctx.schema.has_endpoint(endpoint):
            continue
        spec = ctx.schema.endpoint(endpoint)
        ref = ctx.pool.find_entry(
            endpoint, predicate=lambda c: not spec.declares_status(c.status)
        )
        if ref is not None:
            faults.append(
                ctx.fault(
                    FaultCode.SCHEMA_MISMATCH, endpoint, slice_prefix(ref), None,
                    ref.target_index,
                    f"status {ref.call.status} is not among the declared responses",
                )
            )
    return faults
