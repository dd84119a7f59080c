import logging

from apiwarden.corpus import AUTHENTICATED, append_call, slice_prefix
from apiwarden.models.fault import SYNTHESIS_CODE
from apiwarden.models.http import Provenance
from apiwarden.oracles.context import OracleContext

logger = logging.getLogger(__name__)

MAX_ATTEMPTS_PER_ENDPOINT = 2


def synthesize_403(ctx: OracleContext) -> int:
    """Add 403 scenarios the base fuzzer did not reach; returns how many were added."""
    added = 0
    names = [i.name for i in ctx.auth.authenticated]
    if len(names) < 2:
        logger.info("Fewer than two users configured, no 403 scenarios to synthesize")
        return 0

    for spec in ctx.schema.endpoints:
        endpoint = spec.id
        if ctx.pool.find_entry(endpoint, 403) is not None:
            continue
        if ctx.pool.find_entry(endpoint, 401) is None:
            logger.debug(f"No 401 seen on {endpoint}, likely unauthenticated, skipping")
            continue
        found = False
        for ref in ctx.pool.find_all(endpoint, "2xx", AUTHENTICATED)[:MAX_ATTEMPTS_PER_ENDPOINT]:
            prefix = slice_prefix(ref)
            last = len(prefix.calls) - 1
            for other in names:
                if other == ref.identity or ctx.out_of_time():
                    continue
                duplicate = prefix.calls[last].model_copy(
                    update={"identity": other, "expected_status": 403}
                )
                candidate = append_call(prefix, duplicate, copy_bindings_from=last)
                confirmed = ctx.confirm(candidate)
                if confirmed is None:
                    continue
                test, run = confirmed
                provenance = Provenance(kind="securitySynthesis", oracle_code=SYNTHESIS_CODE)
                ctx.pool.add(test.model_copy(update={"provenance": provenance}), run)
                logger.info(f"Synthesized 403 scenario on {endpoint} for {other}")
                added += 1
                found = True
                break
            if found:
                break
    return added
