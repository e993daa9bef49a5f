"""Thin HTTP adapter: every request envelope goes through one POST route.

The node service itself is transport-agnostic; this module only maps
JSON bodies onto ``NodeService.handle`` for clients that speak HTTP,
such as the auditor console.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .service import NodeService


def create_app(service: NodeService) -> FastAPI:
    app = FastAPI(title="futureab node", docs_url=None, redoc_url=None)

    @app.post("/rpc")
    async def rpc(request: Request) -> JSONResponse:
        try:
            envelope = await request.json()
        except Exception:
            return JSONResponse(
                {"ok": False, "seq": 0, "error": {"code": "validation", "message": "body must be JSON"}},
                status_code=400,
            )
        return JSONResponse(service.handle(envelope))

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"ok": True, "height": service.ledger.height()}

    return app
