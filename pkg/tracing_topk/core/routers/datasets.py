# tracing_topk/core/routers/datasets.py
import logging
from typing import Any, List, Optional

import numpy as np
from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field, field_validator

from tracing_topk.core import rng as rngs
from tracing_topk.core.attack import AttackParams, trace_dataset
from tracing_topk.core.dataset import (
    DatasetMatrix,
    exact_top_k,
    generate_uniform,
    marginals,
    validate_alpha_accurate,
)
from tracing_topk.core.mechanisms import Composition, MechanismConfig, MechanismKind, parse_epsilon, release
from tracing_topk.core.reports import jsonable
from tracing_topk.core.routers.common import domain_errors

logger = logging.getLogger(__name__)

router = APIRouter()

# largest n*d generated per request
MAX_CELLS = 50_000_000


# ============================================
# Pydantic Models for Request/Response
# ============================================

class DatasetRequest(BaseModel):
    """Either explicit ±1 rows, or (n, d, seed) for a uniform random matrix"""
    entries: Optional[List[List[int]]] = Field(default=None, description="Explicit ±1 rows")
    n: Optional[int] = Field(default=None, ge=1, le=100_000, description="Rows to generate")
    d: Optional[int] = Field(default=None, ge=1, le=1_000_000, description="Columns to generate")
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="Generation seed")


class TopKRequest(DatasetRequest):
    k: int = Field(ge=1, description="Columns to select")


class ReleaseRequest(TopKRequest):
    mechanism: MechanismKind = MechanismKind.EXACT
    epsilon: Optional[float] = Field(default=None, description="Privacy budget, or \"noiseless\"")
    alpha: Optional[float] = Field(default=None, ge=0)
    target_row: Optional[int] = Field(default=None, ge=0)
    mechanism_seed: int = Field(default=0, ge=0, lt=2 ** 64)
    composition: Composition = Composition.BASIC
    delta: float = Field(default=0.0, ge=0, lt=1)

    @field_validator("epsilon", mode="before")
    @classmethod
    def _noiseless(cls, value: Any) -> Any:
        return parse_epsilon(value)


class AttackRequest(ReleaseRequest):
    rho: float = Field(gt=0, lt=1, description="Attack confidence parameter")
    target: Optional[List[int]] = Field(default=None, description="Out-of-sample row; random if omitted")
    target_seed: int = Field(default=1, ge=0, lt=2 ** 64)


# ============================================
# Helper Functions
# ============================================

def build_dataset(req: DatasetRequest) -> DatasetMatrix:
    if req.entries is not None:
        return DatasetMatrix.from_entries(req.entries)
    if req.n is None or req.d is None:
        raise HTTPException(status_code=400, detail="Provide either entries or both n and d")
    if req.n * req.d > MAX_CELLS:
        raise HTTPException(status_code=400, detail=f"n*d must not exceed {MAX_CELLS}")
    return generate_uniform(req.n, req.d, req.seed)


def _release(X: DatasetMatrix, req: ReleaseRequest):
    config = MechanismConfig(
        kind=req.mechanism,
        epsilon=req.epsilon,
        alpha=req.alpha,
        target_row=req.target_row,
        seed=req.mechanism_seed,
        composition=req.composition,
        delta=req.delta,
    )
    return release(X, req.k, config)


# ============================================
# Endpoints
# ============================================

@router.post("/topk")
def topk(req: TopKRequest):
    with domain_errors():
        X = build_dataset(req)
        t = exact_top_k(X, req.k)
        q_k = marginals(X).kth(req.k)
    return {
        "n": X.n,
        "d": X.d,
        "k": req.k,
        "selected": list(t.selected),
        "selected_sums": [int(s) for s in X.col_sums[t.indices()]],
        "q_k": {"num": q_k.numerator, "den": q_k.denominator},
    }


@router.post("/release")
def release_topk(req: ReleaseRequest):
    with domain_errors():
        X = build_dataset(req)
        outcome = _release(X, req)
        accurate = validate_alpha_accurate(X, req.k, req.alpha, outcome.t_hat) if req.alpha is not None else None
    return jsonable({
        "mechanism": outcome.mechanism.kind,
        "epsilon": req.epsilon,
        "selected": list(outcome.t_hat.selected),
        "release_error": outcome.error,
        "alpha_accurate": accurate,
    })


@router.post("/attack")
def attack(req: AttackRequest):
    with domain_errors():
        X = build_dataset(req)
        outcome = _release(X, req)
        params = AttackParams.build(req.k, req.rho)
        if req.target is not None:
            y = np.asarray(req.target, dtype=np.int64)
            if not np.all(np.abs(y) == 1):
                raise HTTPException(status_code=400, detail="target entries must be -1 or +1")
        else:
            bits = rngs.generator(req.target_seed).integers(0, 2, size=X.d, dtype=np.int8)
            y = (bits << 1) - 1
        report = trace_dataset(X, outcome.t_hat, params, y)

    logger.info("attack: traced %d of %d rows", report.traced_count, report.n)
    return jsonable({
        "tau": params.tau,
        "selected": list(outcome.t_hat.selected),
        "decisions": report.decisions,
        "inner_products": report.inner_products,
        "traced_count": report.traced_count,
        "out_sample_decision": report.out_sample_decision,
        "out_inner_product": report.out_inner_product,
    })
