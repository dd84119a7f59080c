import logging
import threading
from dataclasses import dataclass
from typing import Annotated, Optional

from asgi_correlation_id import CorrelationIdMiddleware
from fastapi import APIRouter, Depends, FastAPI, Header, HTTPException, status
from fastapi.exception_handlers import http_exception_handler

logger = logging.getLogger(__name__)

# static Authorization header value -> user name
STATIC_USERS = {"FOO": "FOO", "BAR": "BAR"}


def create_credentials_exception(detail: str) -> HTTPException:
    return HTTPException(status_code=status.HTTP_401_UNAUTHORIZED, detail=detail)


async def optional_user(
    authorization: Annotated[Optional[str], Header()] = None,
) -> Optional[str]:
    if authorization is None:
        return None
    user = STATIC_USERS.get(authorization)
    if user is None:
        raise create_credentials_exception("Unknown credentials")
    return user


async def get_current_user(
    user: Annotated[Optional[str], Depends(optional_user)],
) -> str:
    if user is None:
        raise create_credentials_exception("Authentication required")
    return user


@dataclass
class Resource:
    id: int
    owner: Optional[str]
    name: str = ""


class ResourceStore:
    """In-memory resources; a fresh store per app instance is the reset."""

    def __init__(self) -> None:
        self._items: dict[int, Resource] = {}
        self.lock = threading.Lock()

    def get(self, resource_id: int) -> Optional[Resource]:
        return self._items.get(resource_id)

    def put(self, resource: Resource) -> None:
        self._items[resource.id] = resource

    def delete(self, resource_id: int) -> None:
        self._items.pop(resource_id, None)

    def __len__(self) -> int:
        return len(self._items)


def fixture_app(title: str, *routers: APIRouter) -> FastAPI:
    # no generated docs: every reachable path must be one the fixture means to serve
    app = FastAPI(title=title, openapi_url=None, docs_url=None, redoc_url=None)
    app.add_middleware(CorrelationIdMiddleware)
    for router in routers:
        app.include_router(router)

    @app.exception_handler(HTTPException)
    async def http_exception_handle_logging(request, exc):
        logger.debug(f"{title}: HTTP {exc.status_code} - {exc.detail}")
        return await http_exception_handler(request, exc)

    return app
