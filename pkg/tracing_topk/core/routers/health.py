# tracing_topk/core/routers/health.py
from fastapi import APIRouter

from tracing_topk import __version__
from tracing_topk.core import config

router = APIRouter()


@router.get("/healthz")
def healthz():
    return {"ok": True, "version": __version__, "workers": config.WORKERS}
