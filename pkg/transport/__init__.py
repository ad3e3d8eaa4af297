# transport package - request/response wire layer with a TCP and a simulated backend

from transport.base import (
    Handler,
    ServerHandle,
    Transport,
    WireRequest,
    WireResponse,
)
