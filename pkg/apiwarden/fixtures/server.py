import logging
import socket
import threading
import time
from dataclasses import dataclass
from typing import Any

import uvicorn

from apiwarden.errors import FixtureError
from apiwarden.fixtures.registry import FixtureSpec

logger = logging.getLogger(__name__)

STARTUP_TIMEOUT_SECONDS = 10.0


@dataclass
class FixtureHandle:
    spec: FixtureSpec
    server: uvicorn.Server
    thread: threading.Thread
    sock: socket.socket
    base_url: str
    stopped: bool = False

    def __enter__(self) -> "FixtureHandle":
        return self

    def __exit__(self, *exc_info) -> None:
        stop_fixture(self)


def start_fixture(
    spec: FixtureSpec, host: str = "127.0.0.1", port: int = 0, **options: Any
) -> FixtureHandle:
    """Serve a fresh instance of the fixture; port 0 picks an ephemeral one."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as err:
        sock.close()
        raise FixtureError(f"cannot bind {spec.name} to {host}:{port}: {err}") from err

    server = uvicorn.Server(
        uvicorn.Config(
            spec.create_app(**options), log_config=None, access_log=False, lifespan="off"
        )
    )
    thread = threading.Thread(
        target=server.run, kwargs={"sockets": [sock]}, name=f"fixture-{spec.name}", daemon=True
    )
    thread.start()

    deadline = time.monotonic() + STARTUP_TIMEOUT_SECONDS
    while not server.started:
        if not thread.is_alive() or time.monotonic() > deadline:
            server.should_exit = True
            sock.close()
            raise FixtureError(f"fixture {spec.name} did not start")
        time.sleep(0.01)

    bound_port = sock.getsockname()[1]
    handle = FixtureHandle(spec, server, thread, sock, f"http://{host}:{bound_port}")
    logger.info(f"Fixture {spec.name} listening on {handle.base_url}")
    return handle


def stop_fixture(handle: FixtureHandle) -> None:
    if handle.stopped:
        return
    handle.server.should_exit = True
    handle.thread.join(timeout=STARTUP_TIMEOUT_SECONDS)
    handle.sock.close()
    handle.stopped = True
    logger.info(f"Fixture {handle.spec.name} stopped")
