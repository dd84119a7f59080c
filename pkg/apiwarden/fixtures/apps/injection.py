import logging
from asyncio import sleep
from typing import Annotated

from fastapi import APIRouter, Depends, FastAPI, Request, status
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from apiwarden.config import config
from apiwarden.fixtures.common import fixture_app

logger = logging.getLogger(__name__)

# what a sleep payload looks like to the fake query layer
SLEEP_SIGNATURES = ("sleep(", "pg_sleep", "waitfor delay", "randomblob")


class Credentials(BaseModel):
    username: str = ""
    password: str = ""


class GuestbookEntry(BaseModel):
    name: str
    entry: str


def looks_like_sleep(value: str) -> bool:
    lowered = value.lower()
    return any(signature in lowered for signature in SLEEP_SIGNATURES)


sqli_router = APIRouter(prefix="/api/sqli")
guestbook_router = APIRouter(prefix="/api/stored/json")


@sqli_router.post("/body/vulnerable")
async def login_query(credentials: Credentials, request: Request):
    state = request.app.state
    if state.sleep_enabled and any(
        looks_like_sleep(v) for v in (credentials.username, credentials.password)
    ):
        logger.debug(f"Query for {credentials.username!r} sleeps {state.sleep_seconds}s")
        await sleep(state.sleep_seconds)
    return PlainTextResponse("MATCHED: 0")


def get_entries(request: Request) -> list[GuestbookEntry]:
    return request.app.state.entries


@guestbook_router.post("/guestbook", status_code=status.HTTP_201_CREATED)
async def sign_guestbook(
    name: str, entry: str, entries: Annotated[list, Depends(get_entries)]
):
    entries.append(GuestbookEntry(name=name, entry=entry))
    return {"success": True}


@guestbook_router.get("/guestbook", response_model=list[GuestbookEntry])
async def read_guestbook(entries: Annotated[list, Depends(get_entries)]):
    return entries


def create_sqli_app(
    sleep_seconds: float = config.SQLI_SLEEP_SECONDS, sleep_enabled: bool = True
) -> FastAPI:
    app = fixture_app("sql-injection", sqli_router)
    app.state.sleep_seconds = sleep_seconds
    app.state.sleep_enabled = sleep_enabled
    return app


def create_guestbook_app() -> FastAPI:
    app = fixture_app("stored-xss", guestbook_router)
    app.state.entries = []
    return app
