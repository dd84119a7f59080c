"""Owned-resource APIs; each fixture differs from the correct one in a single rule."""

import html
import logging
from dataclasses import dataclass
from itertools import count
from typing import Annotated, Optional

from fastapi import (
    APIRouter,
    Body,
    Depends,
    FastAPI,
    HTTPException,
    Request,
    Response,
    status,
)

from apiwarden.fixtures.common import (
    Resource,
    ResourceStore,
    create_credentials_exception,
    fixture_app,
    optional_user,
)

logger = logging.getLogger(__name__)

# server-generated ids stay clear of the ids clients pick for PUT
GENERATED_ID_START = 1_000_000


@dataclass(frozen=True)
class Policy:
    prefix: str = "/api/resources"
    authenticated: bool = True
    with_get: bool = True
    with_delete: bool = True
    with_post: bool = False
    missing_read_status: int = status.HTTP_403_FORBIDDEN
    anonymous_reads_existing: bool = False
    others_may_update: bool = False
    post_rejects: frozenset[str] = frozenset()


CORRECT = Policy()
EXISTENCE_LEAKAGE = Policy(missing_read_status=status.HTTP_404_NOT_FOUND, with_delete=False)
NOT_RECOGNIZED = Policy(
    with_get=False, with_delete=False, with_post=True, post_rejects=frozenset({"FOO"})
)
MISSED_CHECK = Policy(
    prefix="/api/forbiddendelete/resources", with_get=False, others_may_update=True
)
IGNORE_ANONYMOUS = Policy(anonymous_reads_existing=True, with_delete=False)
ANONYMOUS_MODIFICATION = Policy(
    authenticated=False, missing_read_status=status.HTTP_404_NOT_FOUND, with_delete=False
)


def get_store(request: Request) -> ResourceStore:
    return request.app.state.store


def _forbidden() -> HTTPException:
    return HTTPException(status_code=status.HTTP_403_FORBIDDEN, detail="Not your resource")


def _present(resource: Resource) -> dict:
    return {"id": resource.id, "name": html.escape(resource.name)}


def resource_router(policy: Policy) -> APIRouter:
    router = APIRouter(prefix=policy.prefix)

    def caller(user: Optional[str]) -> Optional[str]:
        if policy.authenticated and user is None:
            raise create_credentials_exception("Authentication required")
        return user

    @router.put("/{id}", status_code=status.HTTP_201_CREATED)
    async def put_resource(
        id: int,
        store: Annotated[ResourceStore, Depends(get_store)],
        user: Annotated[Optional[str], Depends(optional_user)],
        payload: Annotated[Optional[dict], Body()] = None,
    ):
        user = caller(user)
        name = str((payload or {}).get("name", ""))
        with store.lock:
            existing = store.get(id)
            if existing is None:
                logger.debug(f"{user} creates resource {id}")
                store.put(Resource(id=id, owner=user, name=name))
                return Response(status_code=status.HTTP_201_CREATED)
            denied = policy.authenticated and existing.owner != user
            if denied and not policy.others_may_update:
                raise _forbidden()
            existing.name = name
        return Response(status_code=status.HTTP_204_NO_CONTENT)

    if policy.with_get:

        @router.get("/{id}")
        async def get_resource(
            id: int,
            store: Annotated[ResourceStore, Depends(get_store)],
            user: Annotated[Optional[str], Depends(optional_user)],
        ):
            if policy.authenticated and user is None and not policy.anonymous_reads_existing:
                raise create_credentials_exception("Authentication required")
            with store.lock:
                resource = store.get(id)
            if resource is None:
                raise HTTPException(
                    status_code=policy.missing_read_status, detail="Cannot read resource"
                )
            if policy.authenticated and user is not None and resource.owner != user:
                raise _forbidden()
            return _present(resource)

    if policy.with_delete:

        @router.delete("/{id}", status_code=status.HTTP_204_NO_CONTENT)
        async def delete_resource(
            id: int,
            store: Annotated[ResourceStore, Depends(get_store)],
            user: Annotated[Optional[str], Depends(optional_user)],
        ):
            user = caller(user)
            with store.lock:
                resource = store.get(id)
                if resource is None:
                    raise HTTPException(
                        status_code=status.HTTP_404_NOT_FOUND, detail="Resource not found"
                    )
                if policy.authenticated and resource.owner != user:
                    raise _forbidden()
                store.delete(id)
            return Response(status_code=status.HTTP_204_NO_CONTENT)

    if policy.with_post:
        ids = count(GENERATED_ID_START)

        @router.post("/", status_code=status.HTTP_201_CREATED)
        async def create_resource(
            response: Response,
            store: Annotated[ResourceStore, Depends(get_store)],
            user: Annotated[Optional[str], Depends(optional_user)],
        ):
            user = caller(user)
            if user in policy.post_rejects:
                raise create_credentials_exception("Authentication required")
            with store.lock:
                resource = Resource(id=next(ids), owner=user)
                store.put(resource)
            response.headers["Location"] = f"{policy.prefix}/{resource.id}"
            return {"id": resource.id}

    return router


def create_app(policy: Policy = CORRECT, title: str = "resources") -> FastAPI:
    app = fixture_app(title, resource_router(policy))
    app.state.store = ResourceStore()
    return app
