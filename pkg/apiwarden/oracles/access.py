"""Authentication and authorization oracles, all built from pool scenarios."""

import logging
from typing import Optional

from apiwarden.corpus import (
    AUTHENTICATED,
    SliceSpec,
    concat_and_bind,
    slice_prefix,
    slice_solo,
    with_expectation,
    with_identity,
)
from apiwarden.errors import CompositionError
from apiwarden.models.auth import ANONYMOUS
from apiwarden.models.fault import Fault, FaultCode
from apiwarden.models.http import Binding, HttpAction, Slot, TestCase
from apiwarden.models.schema import MODIFYING_VERBS, EndpointId, HttpVerb
from apiwarden.oracles.context import OracleContext

logger = logging.getLogger(__name__)

ACCESS_TRIO = (HttpVerb.DELETE, HttpVerb.PUT, HttpVerb.PATCH)


def oracle_f205(ctx: OracleContext) -> list[Fault]:
    faults = []
    for endpoint in ctx.pool.endpoints:
        for t1 in ctx.pool.find_all(endpoint, 401, AUTHENTICATED):
            if ctx.out_of_time():
                return faults
            user = t1.identity
            fault = _not_recognized(ctx, endpoint, t1, user)
            if fault is not None:
                faults.append(fault)
                break
    return faults


def _not_recognized(
    ctx: OracleContext, endpoint: EndpointId, t1: SliceSpec, user: str
) -> Optional[Fault]:
    for other in ctx.pool.endpoints:
        if other == endpoint:
            continue
        t2 = ctx.pool.find_entry(other, "2xx", user)
        t3 = ctx.pool.find_entry(other, (401, 403))
        if t2 is None or t3 is None:
            continue
        scenario = concat_and_bind(
            concat_and_bind(slice_prefix(t3), slice_prefix(t2)), slice_prefix(t1)
        )
        confirmed = ctx.confirm(scenario)
        if confirmed is None:
            continue
        test, run = confirmed
        return ctx.fault(
            FaultCode.NOT_RECOGNIZED_AUTHENTICATION,
            endpoint,
            test,
            run,
            len(test.calls) - 1,
            f"{user} is rejected with 401 on {endpoint} but authenticates fine on "
            f"{other}, which does enforce access control",
        )
    return None


def _ancestor_call(
    test: TestCase, ancestor: EndpointId, identity: str
) -> TestCase:
    """Append a GET on `ancestor`, taking path values positionally from the last call."""
    last = len(test.calls) - 1
    target = test.calls[last]
    pairs = list(zip(ancestor.placeholders, target.endpoint.placeholders))
    action = HttpAction(
        endpoint=ancestor,
        identity=identity,
        path_args={mine: target.path_args[theirs] for mine, theirs in pairs},
        expected_status=404,
    )
    inbound = {
        b.target_slot.name: b
        for b in test.bindings_into(last)
        if b.target_slot.kind == "pathArg"
    }
    bindings = list(test.bindings) + [
        Binding(
            source_call_index=inbound[theirs].source_call_index,
            extractor=inbound[theirs].extractor,
            target_call_index=last + 1,
            target_slot=Slot(kind="pathArg", name=mine),
        )
        for mine, theirs in pairs
        if theirs in inbound
    ]
    return TestCase(calls=test.calls + [action], bindings=bindings)


def oracle_f204(ctx: OracleContext) -> list[Fault]:
    faults = []
    for spec in ctx.schema.endpoints:
        endpoint = spec.id
        if endpoint.verb != HttpVerb.GET or ctx.out_of_time():
            continue
        t1 = ctx.pool.find_entry(endpoint, 403)
        if t1 is None:
            continue
        for t2 in ctx.pool.find_all(endpoint, 404):
            confirmed = ctx.confirm(concat_and_bind(slice_prefix(t1), slice_prefix(t2)))
            if confirmed is None:
                continue
            test, run = confirmed
            user = t2.identity
            evidence = (
                f"{endpoint} answers 403 for an existing resource and 404 for a "
                f"missing one ({user})"
            )
            if ctx.auth.is_anonymous(user):
                faults.append(
                    ctx.fault(
                        FaultCode.EXISTENCE_LEAKAGE, endpoint, test, run,
                        len(test.calls) - 1, evidence + ", even without credentials",
                    )
                )
                break
            ancestor = ctx.schema.top_get_ancestor(endpoint.path)
            if ancestor is None:
                faults.append(
                    ctx.fault(
                        FaultCode.EXISTENCE_LEAKAGE, endpoint, test, run,
                        len(test.calls) - 1, evidence + "; no ancestor GET exists",
                    )
                )
                break
            confirmed = ctx.confirm(_ancestor_call(test, ancestor, user))
            if confirmed is None:
                logger.info(
                    f"{endpoint}: ancestor {ancestor} is not 404 for {user}, "
                    "existence leakage inconclusive"
                )
                break
            extended, run = confirmed
            faults.append(
                ctx.fault(
                    FaultCode.EXISTENCE_LEAKAGE, endpoint, extended, run,
                    len(test.calls) - 1, evidence + f"; ancestor {ancestor} is 404 too",
                )
            )
            break
    return faults


def oracle_f206(ctx: OracleContext) -> list[Fault]:
    faults = []
    flagged: set[EndpointId] = set()
    for path in ctx.schema.paths:
        declared = [v for v in ACCESS_TRIO if v in ctx.schema.verbs_at(path)]
        if len(declared) < 2:
            continue
        for verb in declared:
            denied = EndpointId(verb=verb, path=path)
            for ck in ctx.pool.find_all(denied, 403, AUTHENTICATED)[:2]:
                if ctx.out_of_time():
                    return faults
                for allowed_verb in declared:
                    allowed = EndpointId(verb=allowed_verb, path=path)
                    if allowed_verb == verb or allowed in flagged:
                        continue
                    fault = _missed_check(ctx, ck, allowed)
                    if fault is not None:
                        faults.append(fault)
                        flagged.add(allowed)
    return faults


def _missed_check(
    ctx: OracleContext, ck: SliceSpec, allowed: EndpointId
) -> Optional[Fault]:
    tj = ctx.pool.find_entry(allowed, "2xx")
    if tj is None:
        return None
    user = ck.identity
    tail = with_expectation(with_identity(slice_solo(tj), 0, user), 0, "2xx")
    try:
        scenario = concat_and_bind(slice_prefix(ck), tail, bind_resource=True)
    except CompositionError as err:
        logger.info(f"Cannot compose {ck.call.endpoint} with {allowed}: {err}")
        return None
    confirmed = ctx.confirm(scenario)
    if confirmed is None:
        return None
    test, run = confirmed
    return ctx.fault(
        FaultCode.MISSED_AUTHORIZATION_CHECKS,
        allowed,
        test,
        run,
        len(test.calls) - 1,
        f"{user} is forbidden to {ck.call.endpoint.verb.value} the resource but "
        f"allowed to {allowed.verb.value} it",
    )


def oracle_f901(ctx: OracleContext) -> list[Fault]:
    faults = []
    for endpoint in ctx.pool.endpoints:
        if endpoint.verb not in MODIFYING_VERBS:
            continue
        refs = ctx.pool.find_all(
            endpoint,
            "2xx",
            ANONYMOUS,
            # an anonymous PUT that creates is not a modification
            predicate=lambda c: not (c.endpoint.verb == HttpVerb.PUT and c.status == 201),
        )
        if not refs:
            continue
        ref = refs[0]
        faults.append(
            ctx.fault(
                FaultCode.ANONYMOUS_MODIFICATIONS,
                endpoint,
                slice_prefix(ref),
                None,
                ref.target_index,
                f"anonymous {endpoint.verb.value} got {ref.call.status}",
            )
        )
    return faults


def oracle_f900(ctx: OracleContext) -> list[Fault]:
    faults = []
    for endpoint in ctx.pool.endpoints:
        if ctx.out_of_time():
            break
        t1 = ctx.pool.find_entry(endpoint, (401, 403), AUTHENTICATED)
        if t1 is None:
            continue
        head = slice_prefix(t1)
        t2 = ctx.pool.find_entry(endpoint, "2xx", ANONYMOUS)
        if t2 is not None:
            confirmed = ctx.confirm(concat_and_bind(head, slice_prefix(t2)))
            if confirmed is not None:
                test, run = confirmed
                faults.append(
                    ctx.fault(
                        FaultCode.IGNORE_ANONYMOUS, endpoint, test, run,
                        len(test.calls) - 1,
                        f"{t1.identity} is denied with {t1.call.status} while an "
                        "anonymous request succeeds",
                    )
                )
                continue
        t3 = ctx.pool.find_entry(endpoint, "2xx", AUTHENTICATED)
        if t3 is None:
            continue
        c3 = slice_prefix(t3)
        last = len(c3.calls) - 1
        c3 = with_expectation(with_identity(c3, last, ANONYMOUS), last, "2xx")
        confirmed = ctx.confirm(concat_and_bind(head, c3))
        if confirmed is None:
            continue
        test, run = confirmed
        faults.append(
            ctx.fault(
                FaultCode.IGNORE_ANONYMOUS, endpoint, test, run,
                len(test.calls) - 1,
                f"{t3.identity}'s successful call still succeeds with credentials "
                f"removed, though {t1.identity} gets {t1.call.status}",
            )
        )
    return faults

