import logging

from fastapi import APIRouter, FastAPI, Response, status
from fastapi.responses import JSONResponse, PlainTextResponse

from apiwarden.fixtures.common import fixture_app

logger = logging.getLogger(__name__)

JVM_TRACE = [
    'java.lang.NullPointerException: Cannot invoke "String.length()" because "name" is null',
    "\tat com.foo.rest.api.ResourceRest.nullPointer(ResourceRest.kt:42)",
    "\tat com.foo.rest.api.ResourceRest$$FastClassBySpringCGLIB.invoke(<generated>)",
    "\tat org.springframework.cglib.proxy.MethodProxy.invoke(MethodProxy.java:218)",
    "\tat org.springframework.web.servlet.FrameworkServlet.service(FrameworkServlet.java:883)",
    "\tat javax.servlet.http.HttpServlet.service(HttpServlet.java:764)",
]

ADVERTISED_METHODS = "HEAD,POST,GET,OPTIONS"

stack_trace_router = APIRouter(prefix="/api/resources")
hidden_router = APIRouter()


@stack_trace_router.get("/null-pointer-json")
async def null_pointer_json():
    logger.debug("Crashing with a JSON stack trace")
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={
            "error": {
                "message": JVM_TRACE[0],
                "stack": [line.strip() for line in JVM_TRACE[1:]],
            }
        },
    )


@stack_trace_router.get("/null-pointer-text")
async def null_pointer_text():
    return PlainTextResponse(
        "\n".join(JVM_TRACE), status_code=status.HTTP_500_INTERNAL_SERVER_ERROR
    )


@hidden_router.post("/api/resources", status_code=status.HTTP_201_CREATED)
async def create_resource():
    return {"created": True}


@hidden_router.options("/api/resources")
async def resource_options():
    return Response(status_code=status.HTTP_200_OK, headers={"Allow": ADVERTISED_METHODS})


@hidden_router.get("/api/resources", include_in_schema=False)
async def hidden_listing():
    logger.debug("Undeclared GET served")
    return PlainTextResponse("OK")


def create_stack_trace_app() -> FastAPI:
    return fixture_app("leaked-stack-trace", stack_trace_router)


def create_hidden_app() -> FastAPI:
    return fixture_app("hidden-accessible", hidden_router)
