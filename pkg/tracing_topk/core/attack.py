# tracing_topk/core/attack.py
"""
Inner-product tracing attack.

Given a target row y in {-1, +1}^d and a released top-k indicator t, the attack
answers IN when <y, t> > tau = sqrt(2 k ln(1/rho)) and OUT otherwise. It sees
only the indicator and the target row, never the marginals.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np

from tracing_topk.core.dataset import DatasetMatrix, TopKVector
from tracing_topk.core.errors import DimensionMismatchError, InvalidParameterError

logger = logging.getLogger(__name__)

# integer inner products within this relative distance of tau count as ties (OUT)
TIE_RTOL = 1e-12

Row = Union[np.ndarray, Sequence[int]]


class Decision(str, Enum):
    IN = "IN"
    OUT = "OUT"


def _check_params(k: int, rho: float) -> None:
    if k < 1:
        raise InvalidParameterError(f"k must be at least 1, got {k}")
    if not 0 < rho < 1:
        raise InvalidParameterError(f"rho must lie in (0, 1), got {rho}")


def threshold_squared(k: int, rho: float) -> float:
    _check_params(k, rho)
    return 2 * k * -math.log(rho)


def threshold(k: int, rho: float) -> float:
    """tau = sqrt(2 k ln(1/rho))."""
    return math.sqrt(threshold_squared(k, rho))


@dataclass(frozen=True)
class AttackParams:
    k: int
    rho: float
    tau: float
    tau_squared: float

    @classmethod
    def build(cls, k: int, rho: float) -> "AttackParams":
        tau_sq = threshold_squared(k, rho)
        return cls(k=k, rho=rho, tau=math.sqrt(tau_sq), tau_squared=tau_sq)


@dataclass(frozen=True)
class TraceReport:
    decisions: Tuple[Decision, ...]
    out_sample_decision: Decision
    inner_products: Tuple[int, ...]
    out_inner_product: int

    @property
    def traced_count(self) -> int:
        return sum(1 for dec in self.decisions if dec is Decision.IN)

    @property
    def n(self) -> int:
        return len(self.decisions)


def traced_mask(inner_products: np.ndarray, params: AttackParams) -> np.ndarray:
    """Vectorised decide(): compares squares so the irrational tau never enters a tie."""
    ip = np.asarray(inner_products, dtype=np.int64)
    squares = ip.astype(np.float64) ** 2
    return (ip > 0) & (squares > params.tau_squared * (1 + TIE_RTOL))


def decision_for(inner_product: int, params: AttackParams) -> Decision:
    if inner_product > 0 and float(inner_product) ** 2 > params.tau_squared * (1 + TIE_RTOL):
        return Decision.IN
    return Decision.OUT


def _check_shapes(t: TopKVector, params: AttackParams, d: int) -> None:
    if t.d != d:
        raise DimensionMismatchError(f"Target has {d} attributes, top-k vector has {t.d}")
    if t.k != params.k:
        raise DimensionMismatchError(f"Attack is tuned for k={params.k}, vector selects {t.k}")


def inner_product(y: Row, t: TopKVector) -> int:
    row = np.asarray(y)
    if row.ndim != 1 or row.shape[0] != t.d:
        raise DimensionMismatchError(f"Target of shape {row.shape} does not match d={t.d}")
    return int(row[t.indices()].sum(dtype=np.int64))


def decide(y: Row, t: TopKVector, params: AttackParams) -> Decision:
    _check_shapes(t, params, t.d)
    return decision_for(inner_product(y, t), params)


def trace_dataset(X: DatasetMatrix, t: TopKVector, params: AttackParams, y_out: Row) -> TraceReport:
    """Run the attack on every row of X and on the independent target y_out."""
    _check_shapes(t, params, X.d)
    idx = t.indices()
    inner = X.entries[:, idx].sum(axis=1, dtype=np.int64)
    traced = traced_mask(inner, params)
    out_ip = inner_product(y_out, t)

    return TraceReport(
        decisions=tuple(Decision.IN if flag else Decision.OUT for flag in traced),
        out_sample_decision=decision_for(out_ip, params),
        inner_products=tuple(int(v) for v in inner),
        out_inner_product=out_ip,
    )
