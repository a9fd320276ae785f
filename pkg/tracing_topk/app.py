# tracing_topk/app.py
import logging

from fastapi import FastAPI

from tracing_topk import __version__
from tracing_topk.core.routers import datasets, experiments, health, theory

logger = logging.getLogger(__name__)

app = FastAPI(title="tracing-topk", version=__version__)

# -------------------------------
# Router registration
# -------------------------------

app.include_router(health.router)
app.include_router(datasets.router, prefix="/api", tags=["datasets"])
app.include_router(experiments.router, prefix="/api", tags=["experiments"])
app.include_router(theory.router, prefix="/api", tags=["theory"])

# Logging routes
for r in app.routes:
    logger.info("ROUTE %s %s", getattr(r, "path", ""), getattr(r, "methods", ""))
