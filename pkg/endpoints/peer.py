from fastapi import APIRouter, Request
from starlette.concurrency import run_in_threadpool
from starlette.responses import Response

from constants import Method
from transport.base import Handler, WireRequest


def build_router(handler: Handler) -> APIRouter:
    """Expose the peer protocol routes, all funnelled into one wire handler.

    The handler runs on Starlette's threadpool, so each in-flight request
    has its own worker thread and a slow service never blocks the accept
    loop or its neighbours.
    """
    router = APIRouter()

    async def dispatch(request: Request) -> Response:
        body = await request.body()
        path = request.url.path
        if request.url.query:
            path = f"{path}?{request.url.query}"
        wire = WireRequest(method=Method(request.method), path=path, body=body)
        reply = await run_in_threadpool(handler, wire)
        return Response(
            content=reply.body,
            status_code=int(reply.status),
            media_type="application/json",
        )

    @router.get("/services")
    async def list_services(request: Request):
        return await dispatch(request)

    @router.get("/services/{name}")
    async def describe_service(request: Request, name: str):
        return await dispatch(request)

    @router.post("/invoke")
    async def invoke(request: Request):
        return await dispatch(request)

    @router.post("/gossip")
    async def gossip(request: Request):
        return await dispatch(request)

    return router
