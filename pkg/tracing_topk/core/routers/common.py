# tracing_topk/core/routers/common.py
from contextlib import contextmanager
from typing import Iterator

from fastapi import HTTPException

from tracing_topk.core.errors import TracingError


@contextmanager
def domain_errors() -> Iterator[None]:
    """Turn domain errors into 400s with the error message as detail."""
    try:
        yield
    except TracingError as e:
        raise HTTPException(status_code=400, detail=str(e)) from e
