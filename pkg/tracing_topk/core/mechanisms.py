# tracing_topk/core/mechanisms.py
"""
Top-k release mechanisms.

- exact: the lexicographically first exact top-k (no privacy).
- expmech: k rounds of the exponential mechanism without replacement (peeling),
  utility q_j with sensitivity 2/n, so round weights are exp(eps_r * sums_j / 4).
- adversarial: an alpha-accurate selector that picks, among all columns within
  alpha of q_(k), those on which one targeted row is -1.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Optional, Tuple

import numpy as np

from tracing_topk.core import rng as rngs
from tracing_topk.core.dataset import (
    DatasetMatrix,
    Real,
    TopKVector,
    alpha_floor_sum,
    as_fraction,
    check_k,
    exact_top_k,
    marginals,
    top_k_from_sums,
)
from tracing_topk.core.errors import InvalidBudgetError, InvalidParameterError, InvalidVectorError

logger = logging.getLogger(__name__)

# epsilon = +inf releases the exact top-k
NOISELESS = math.inf

# enumeration limit for the closed-form peeling distribution
MAX_ORACLE_D = 12


class MechanismKind(str, Enum):
    EXACT = "exact"
    EXP_MECH = "expmech"
    ADVERSARIAL = "adversarial"

    @classmethod
    def _missing_(cls, value):
        aliases = {"exp-mech-peeling": cls.EXP_MECH, "exp_mech_peeling": cls.EXP_MECH}
        return aliases.get(value)


class Composition(str, Enum):
    BASIC = "basic"
    CDP = "cdp"


def parse_epsilon(value):
    """Accept the string "noiseless" (any case) as the +inf sentinel."""
    if isinstance(value, str) and value.strip().lower() == "noiseless":
        return NOISELESS
    return value


def is_noiseless(epsilon: Optional[float]) -> bool:
    return epsilon is not None and math.isinf(epsilon) and epsilon > 0


def check_budget(epsilon: Optional[float]) -> None:
    if epsilon is None:
        raise InvalidBudgetError("epsilon is required for the exponential mechanism")
    if is_noiseless(epsilon):
        return
    if not epsilon > 0:
        raise InvalidBudgetError(f"epsilon must be > 0 (or noiseless), got {epsilon}")


@dataclass(frozen=True)
class MechanismConfig:
    kind: MechanismKind
    epsilon: Optional[float] = None
    alpha: Optional[float] = None
    target_row: Optional[int] = None
    seed: int = 0
    composition: Composition = Composition.BASIC
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MechanismKind(self.kind))
        object.__setattr__(self, "composition", Composition(self.composition))
        if self.kind is MechanismKind.EXP_MECH:
            check_budget(self.epsilon)
            if not 0 <= self.delta < 1:
                raise InvalidBudgetError(f"delta must lie in [0, 1), got {self.delta}")
        if self.kind is MechanismKind.ADVERSARIAL:
            if self.alpha is None or self.alpha < 0:
                raise InvalidParameterError("adversarial release needs alpha >= 0")
            if self.target_row is None or self.target_row < 0:
                raise InvalidParameterError("adversarial release needs a target_row >= 0")


@dataclass(frozen=True)
class ReleaseOutcome:
    t_hat: TopKVector
    mechanism: MechanismConfig
    error: float


# ---------------------------
# Accuracy
# ---------------------------

def release_error_exact(X: DatasetMatrix, k: int, t_hat: TopKVector) -> Fraction:
    check_k(k, X.d)
    if t_hat.d != X.d or t_hat.k != k:
        raise InvalidVectorError(f"Expected a {k}-of-{X.d} vector, got {t_hat.k} of {t_hat.d}")
    kth = marginals(X).kth_sum(k)
    lowest = int(X.col_sums[t_hat.indices()].min())
    return max(Fraction(0), Fraction(kth - lowest, X.n))


def release_error(X: DatasetMatrix, k: int, t_hat: TopKVector) -> float:
    """max(0, q_(k) - min selected q_j); zero exactly when t_hat is 0-accurate."""
    return float(release_error_exact(X, k, t_hat))


# ---------------------------
# Exponential mechanism (peeling)
# ---------------------------

def local_epsilon(epsilon: float, delta: float, k: int, composition: Composition = Composition.BASIC) -> float:
    """
    Per-round budget for k exponential-mechanism rounds.

    basic: epsilon / k (pure epsilon-DP by basic composition).
    cdp:   each eps'-DP round is eps'^2/8-CDP; k rounds convert to
           (k eps'^2/8 + eps' sqrt(k ln(1/delta)/2), delta)-DP, solved for eps'.
           Never smaller than epsilon / k; needs delta > 0.
    """
    if Composition(composition) is Composition.BASIC or delta <= 0:
        return epsilon / k
    log_delta = math.log(1 / delta)
    return max(
        epsilon / k,
        math.sqrt((8 * log_delta + 8 * epsilon) / k) - math.sqrt(8 * log_delta / k),
    )


def _round_log_weights(sums: np.ndarray, eps_round: float) -> np.ndarray:
    # exp((eps/k) * u / (2 * sensitivity)) with u = sums/n, sensitivity = 2/n
    return eps_round * sums.astype(np.float64) / 4.0


def exp_mech_peeling(
    X: DatasetMatrix,
    k: int,
    epsilon: float,
    seed: int,
    composition: Composition = Composition.BASIC,
    delta: float = 0.0,
) -> ReleaseOutcome:
    """
    Peeling release. Sampling uses the Gumbel-max trick: adding one Gumbel(0, 1)
    draw to every log-weight and keeping the k largest perturbed scores has exactly
    the distribution of k sequential exponential-mechanism rounds without
    replacement, so a single perturbation serves all rounds.
    """
    check_k(k, X.d)
    check_budget(epsilon)
    config = MechanismConfig(
        kind=MechanismKind.EXP_MECH, epsilon=epsilon, seed=seed,
        composition=composition, delta=delta,
    )

    if is_noiseless(epsilon):
        t_hat = exact_top_k(X, k)
    else:
        eps_round = local_epsilon(epsilon, delta, k, composition)
        noise = rngs.generator(seed).gumbel(size=X.d)
        t_hat = top_k_from_sums(_round_log_weights(X.col_sums, eps_round) + noise, k)

    return ReleaseOutcome(t_hat=t_hat, mechanism=config, error=release_error(X, k, t_hat))


def peeling_distribution(
    col_sums: np.ndarray,
    k: int,
    epsilon: float,
    composition: Composition = Composition.BASIC,
    delta: float = 0.0,
) -> Dict[Tuple[int, ...], float]:
    """
    Closed-form probability of every k-subset under peeling, summed over the k!
    selection orders. Only for small d.
    """
    sums = np.asarray(col_sums, dtype=np.int64)
    d = int(sums.shape[0])
    check_k(k, d)
    check_budget(epsilon)
    if d > MAX_ORACLE_D:
        raise InvalidParameterError(f"Closed-form distribution limited to d <= {MAX_ORACLE_D}, got {d}")

    if is_noiseless(epsilon):
        return {top_k_from_sums(sums, k).selected: 1.0}

    logw = _round_log_weights(sums, local_epsilon(epsilon, delta, k, composition))
    weights = np.exp(logw - logw.max()).tolist()

    dist: Dict[Tuple[int, ...], float] = {}
    for ordered in itertools.permutations(range(d), k):
        p = 1.0
        left = set(range(d))
        for j in ordered:
            # summed afresh each round; subtracting a dominant weight cancels to zero
            p *= weights[j] / math.fsum(weights[m] for m in left)
            left.discard(j)
        key = tuple(sorted(ordered))
        dist[key] = dist.get(key, 0.0) + p
    return dist


# ---------------------------
# Adversarial selector
# ---------------------------

def adversarial_topk(X: DatasetMatrix, k: int, alpha: Real, target_row: int, seed: int = 0) -> ReleaseOutcome:
    """
    Among the eligible columns {j : q_j >= q_(k) - alpha}, pick the k with the
    smallest entry in the target row, lower index first on ties. Eligible always
    contains the exact top-k, so the output is alpha-accurate. The seed is only
    recorded; the choice is a function of X.
    """
    check_k(k, X.d)
    if not 0 <= target_row < X.n:
        raise InvalidParameterError(f"target_row must lie in [0, {X.n}), got {target_row}")
    config = MechanismConfig(
        kind=MechanismKind.ADVERSARIAL, alpha=float(alpha), target_row=target_row, seed=seed,
    )

    if isinstance(alpha, float) and math.isinf(alpha):
        eligible = np.arange(X.d)
    else:
        if as_fraction(alpha) < 0:
            raise InvalidParameterError(f"alpha must be non-negative, got {alpha}")
        eligible = np.flatnonzero(X.col_sums >= alpha_floor_sum(marginals(X), k, alpha))

    target_entries = X.entries[target_row, eligible]
    chosen = eligible[np.argsort(target_entries, kind="stable")[:k]]
    t_hat = TopKVector(X.d, tuple(int(j) for j in chosen))
    logger.debug("adversarial release: %d eligible columns for row %d", eligible.size, target_row)
    return ReleaseOutcome(t_hat=t_hat, mechanism=config, error=release_error(X, k, t_hat))


def exact_release(X: DatasetMatrix, k: int) -> ReleaseOutcome:
    t_hat = exact_top_k(X, k)
    return ReleaseOutcome(t_hat=t_hat, mechanism=MechanismConfig(kind=MechanismKind.EXACT), error=0.0)


def release(X: DatasetMatrix, k: int, config: MechanismConfig) -> ReleaseOutcome:
    if config.kind is MechanismKind.EXACT:
        return exact_release(X, k)
    if config.kind is MechanismKind.EXP_MECH:
        return exp_mech_peeling(X, k, config.epsilon, config.seed, config.composition, config.delta)
    return adversarial_topk(X, k, config.alpha, config.target_row, config.seed)
