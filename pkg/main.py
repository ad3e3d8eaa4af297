import logging
import uuid
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from starlette.middleware.base import BaseHTTPMiddleware

from endpoints import peer as peer_router
from logger import set_request_context, clear_request_context
from transport.base import Handler

logger = logging.getLogger(__name__)


# Middleware to tag every request with the serving peer and a request id for logging
class RequestContextMiddleware(BaseHTTPMiddleware):
    async def dispatch(self, request: Request, call_next):
        clear_request_context()
        set_request_context(
            request.app.state.peer_id,
            request.headers.get("X-Request-Id") or uuid.uuid4().hex[:12],
        )
        try:
            response = await call_next(request)
            logging.getLogger("peernet.requests").info(
                "%s %s -> %s", request.method, request.url.path, response.status_code
            )
            return response
        finally:
            # Clear context after response to avoid leaking into other requests/tasks
            clear_request_context()


def create_app(handler: Handler, peer_id: str) -> FastAPI:
    """Build the HTTP face of one peer around its wire handler."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        logger.info("[Startup] peer %s accepting connections", peer_id)
        yield
        logger.info("[Shutdown] peer %s stopped", peer_id)

    app = FastAPI(title=f"peer {peer_id}", lifespan=lifespan, openapi_url=None)
    app.state.peer_id = peer_id
    app.include_router(peer_router.build_router(handler))
    app.add_middleware(RequestContextMiddleware)

    # Health check endpoint
    @app.get("/health")
    async def health_check():
        return {"status": "healthy", "peer": peer_id}

    return app
