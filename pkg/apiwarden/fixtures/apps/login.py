import logging
from datetime import datetime, timedelta, timezone
from typing import Annotated, Optional

from fastapi import APIRouter, Depends, FastAPI, Form, Header
from jose import ExpiredSignatureError, JWTError, jwt

from apiwarden.fixtures.common import create_credentials_exception, fixture_app

logger = logging.getLogger(__name__)

SECRET_KEY = "fixture-signing-key"
ALGORITHM = "HS256"
KNOWN_USERS = {"FOO", "BAR"}

router = APIRouter()


def access_token_expire_minutes() -> int:
    return 30


def create_access_token(name: str) -> str:
    logger.debug(f"Creating access token for {name}")
    expire = datetime.now(timezone.utc) + timedelta(minutes=access_token_expire_minutes())
    return jwt.encode({"sub": name, "exp": expire}, key=SECRET_KEY, algorithm=ALGORITHM)


async def get_current_user(
    authorization: Annotated[Optional[str], Header()] = None,
) -> str:
    if not authorization or not authorization.startswith("Bearer "):
        raise create_credentials_exception("Bearer token required")
    try:
        payload = jwt.decode(
            authorization.removeprefix("Bearer "), key=SECRET_KEY, algorithms=[ALGORITHM]
        )
    except ExpiredSignatureError as e:
        raise create_credentials_exception("Token has expired") from e
    except JWTError as e:
        raise create_credentials_exception("Invalid token") from e
    name = payload.get("sub")
    if name not in KNOWN_USERS:
        raise create_credentials_exception("Token is missing 'sub' field")
    return name


@router.post("/azuread/token")
async def token(name: Annotated[str, Form()], grant_type: Annotated[str, Form()]):
    if grant_type != "client_credentials" or name not in KNOWN_USERS:
        raise create_credentials_exception("Incorrect client credentials")
    return {"access_token": create_access_token(name), "token_type": "Bearer"}


@router.get("/api/profile")
async def profile(user: Annotated[str, Depends(get_current_user)]):
    return {"name": user}


def create_app() -> FastAPI:
    return fixture_app("login", router)
