# tracing_topk/core/routers/theory.py
from enum import Enum
from typing import Optional

from fastapi import APIRouter, HTTPException, Query

from tracing_topk.core.bounds import (
    anticonc_lower,
    chernoff_bounds,
    dp_witness,
    exact_regime_check,
    hoeffding_tail,
    noisy_constants,
)
from tracing_topk.core.reports import jsonable
from tracing_topk.core.routers.common import domain_errors

router = APIRouter()


class BoundKind(str, Enum):
    HOEFFDING = "hoeffding"
    CHERNOFF = "chernoff"
    ANTICONC = "anticonc"


@router.get("/regime")
def regime(
    n: int = Query(..., ge=1),
    d: int = Query(..., ge=1),
    k: int = Query(..., ge=1),
    rho: float = Query(..., gt=0, lt=1),
    noisy: bool = Query(False, description="Approximate top-k constants instead of the exact regime"),
):
    with domain_errors():
        result = noisy_constants(rho, n, d, k) if noisy else exact_regime_check(n, d, k, rho)
    return jsonable(result)


@router.get("/witness")
def witness(
    rho_sound: float = Query(..., ge=0, le=1),
    untraced: float = Query(..., ge=0, le=1, description="Untraced fraction m/n"),
    delta: float = Query(0.0, ge=0, le=1),
):
    with domain_errors():
        w = dp_witness(rho_sound, untraced, delta)
    return jsonable({**jsonable(w), "defined": w.defined})


@router.get("/bounds")
def bounds(
    kind: BoundKind = Query(...),
    nu: float = Query(..., description="Deviation"),
    n: Optional[int] = Query(None, ge=1, description="Sample count (hoeffding, anticonc)"),
    mu: Optional[float] = Query(None, gt=0, description="Mean (chernoff)"),
    beta: Optional[float] = Query(None, gt=0, description="Slack (anticonc)"),
):
    with domain_errors():
        if kind is BoundKind.HOEFFDING:
            if n is None:
                raise HTTPException(status_code=400, detail="hoeffding needs n")
            return {"kind": kind.value, "tail": hoeffding_tail(nu, n)}
        if kind is BoundKind.CHERNOFF:
            if mu is None:
                raise HTTPException(status_code=400, detail="chernoff needs mu")
            return jsonable({"kind": kind.value, **jsonable(chernoff_bounds(nu, mu))})
        if n is None or beta is None:
            raise HTTPException(status_code=400, detail="anticonc needs n and beta")
        return jsonable({"kind": kind.value, **jsonable(anticonc_lower(beta, nu, n))})
