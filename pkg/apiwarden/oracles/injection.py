"""Injection oracles: time-based SQL injection and reflected/stored XSS."""

import logging
from typing import Callable, Optional

from apiwarden.corpus import append_call, slice_prefix
from apiwarden.executor import assign_field, lookup_field
from apiwarden.models.fault import Fault, FaultCode
from apiwarden.models.http import Binding, HttpAction, TestCase, status_matches
from apiwarden.models.schema import (
    EndpointId,
    EndpointSpec,
    HttpVerb,
    ParamLocation,
    ParamSpec,
    ValueKind,
)
from apiwarden.oracles.context import OracleContext, json_strings

logger = logging.getLogger(__name__)

_INJECTABLE = (ParamLocation.query, ParamLocation.header, ParamLocation.body)
_STORING_VERBS = (HttpVerb.POST, HttpVerb.PUT, HttpVerb.PATCH)
_NO_INJECT_HEADERS = {"authorization", "content-type", "accept", "content-length"}


def string_inputs(spec: EndpointSpec) -> list[ParamSpec]:
    return [
        p
        for p in spec.parameters
        if p.location in _INJECTABLE
        and p.value_kind == ValueKind.string
        and not (
            p.location == ParamLocation.header and p.name.lower() in _NO_INJECT_HEADERS
        )
    ]


def inject(
    action: HttpAction, inputs: list[ParamSpec], rewrite: Callable[[str], str]
) -> tuple[HttpAction, list[str]]:
    """Rewrite every present string input whose new value still satisfies its constraints."""
    query = dict(action.query)
    headers = dict(action.headers)
    body = action.body.model_copy(deep=True) if action.body else None
    changed = []
    for param in inputs:
        if param.location == ParamLocation.body:
            if body is None or not isinstance(body.value, dict):
                continue
            current = lookup_field(body.value, param.name)
        else:
            current = (query if param.location == ParamLocation.query else headers).get(
                param.name
            )
        if not isinstance(current, str):
            continue
        value = rewrite(current)
        if not param.constraints.accepts(value):
            logger.debug(f"{param.name}: injected value violates constraints, skipped")
            continue
        if param.location == ParamLocation.body:
            assign_field(body.value, param.name, value)
        elif param.location == ParamLocation.query:
            query[param.name] = value
        else:
            headers[param.name] = value
        changed.append(param.name)
    update = {"query": query, "headers": headers, "body": body}
    return action.model_copy(update=update, deep=True), changed


def contains_verbatim(body: str, payload: str) -> bool:
    return payload in body or any(payload in text for text in json_strings(body))


def oracle_f200(ctx: OracleContext) -> list[Fault]:
    baseline_max = ctx.settings.sqli_baseline_max_ms
    sleep_ms = ctx.settings.sqli_sleep_seconds * 1000
    faults = []
    for spec in ctx.schema.endpoints:
        inputs = string_inputs(spec)
        if not inputs:
            continue
        ref = ctx.pool.find_entry(spec.id, "2xx", duration_below=baseline_max)
        if ref is None:
            logger.debug(f"No fast successful call on {spec.id}, SQLi not applicable")
            continue
        prefix = slice_prefix(ref)
        last = len(prefix.calls) - 1
        calls = list(prefix.calls)
        calls[last] = calls[last].model_copy(update={"max_duration_ms": baseline_max})
        prefix = prefix.model_copy(update={"calls": calls})

        for payload in ctx.settings.sqli_payloads:
            if ctx.out_of_time():
                return faults
            injected, changed = inject(calls[last], inputs, lambda v: v + payload)
            if not changed:
                continue
            injected = injected.model_copy(
                update={
                    "expected_status": None,
                    "max_duration_ms": None,
                    "min_duration_ms": sleep_ms,
                }
            )
            test, run = ctx.run(append_call(prefix, injected, copy_bindings_from=last))
            if run.unbindable or len(run.calls) != len(test.calls):
                continue
            baseline, delayed = run.calls[last], run.calls[last + 1]
            if baseline.timed_out or not baseline.duration_ms < baseline_max:
                continue
            if delayed.duration_ms > sleep_ms:
                faults.append(
                    ctx.fault(
                        FaultCode.SQL_INJECTION,
                        spec.id,
                        test,
                        run,
                        last + 1,
                        f"baseline took {baseline.duration_ms:.0f} ms, with {payload!r} "
                        f"in {', '.join(changed)} it took {delayed.duration_ms:.0f} ms",
                    )
                )
                break
    return faults


def _stored_read(ctx: OracleContext, endpoint: EndpointId) -> Optional[EndpointId]:
    same = EndpointId(verb=HttpVerb.GET, path=endpoint.path)
    if ctx.schema.has_endpoint(same):
        return same
    placeholders = endpoint.placeholders
    if not placeholders:
        return None
    collection = endpoint.path[: endpoint.path.rfind("/{" + placeholders[-1] + "}")]
    for candidate in (collection, collection + "/"):
        parent = EndpointId(verb=HttpVerb.GET, path=candidate or "/")
        if ctx.schema.has_endpoint(parent):
            return parent
    return None


def _with_read(test: TestCase, index: int, read: EndpointId) -> TestCase:
    source = test.calls[index]
    action = HttpAction(
        endpoint=read,
        identity=source.identity,
        path_args={k: v for k, v in source.path_args.items() if k in read.placeholders},
    )
    bindings = list(test.bindings) + [
        Binding(
            source_call_index=b.source_call_index,
            extractor=b.extractor,
            target_call_index=len(test.calls),
            target_slot=b.target_slot,
        )
        for b in test.bindings_into(index)
        if b.target_slot.kind == "pathArg" and b.target_slot.name in read.placeholders
    ]
    return TestCase(calls=test.calls + [action], bindings=bindings)


def oracle_f201(ctx: OracleContext) -> list[Fault]:
    faults = []
    for spec in ctx.schema.endpoints:
        inputs = string_inputs(spec)
        if not inputs:
            continue
        ref = ctx.pool.find_entry(spec.id, "2xx")
        if ref is None:
            continue
        prefix = slice_prefix(ref)
        last = len(prefix.calls) - 1
        read = _stored_read(ctx, spec.id) if spec.id.verb in _STORING_VERBS else None
        if spec.id.verb in _STORING_VERBS and read is None:
            logger.info(f"No GET reads back {spec.id}, checking reflected XSS only")

        for payload in ctx.settings.xss_payloads:
            if ctx.out_of_time():
                return faults
            injected, changed = inject(prefix.calls[last], inputs, lambda _: payload)
            if not changed:
                continue
            calls = list(prefix.calls)
            calls[last] = injected.model_copy(update={"expected_status": "2xx"})
            candidate = prefix.model_copy(update={"calls": calls})
            if read is not None:
                candidate = _with_read(candidate, last, read)
            test, run = ctx.run(candidate)
            if run.unbindable or len(run.calls) <= last:
                continue
            written = run.calls[last]
            if written.timed_out or not status_matches("2xx", written.status):
                continue
            if contains_verbatim(written.response_body, payload):
                faults.append(
                    ctx.fault(
                        FaultCode.XSS, spec.id, test, run, last,
                        f"{payload!r} sent in {', '.join(changed)} is echoed unsanitized",
                    )
                )
                break
            if read is None or len(run.calls) <= last + 1:
                continue
            shown = run.calls[last + 1]
            if status_matches("2xx", shown.status) and contains_verbatim(
                shown.response_body, payload
            ):
                faults.append(
                    ctx.fault(
                        FaultCode.XSS, read, test, run, last + 1,
                        f"{payload!r} stored through {spec.id} is served unsanitized",
                    )
                )
                break
    return faults
