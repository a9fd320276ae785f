# tracing_topk/core/bounds.py
"""
Closed-form bound evaluators, regime checks and the DP-violation witness.

Every probability is clamped to [0, 1]. The universal constants of the
asymptotic statements (the anticoncentration constant and the C, C', C4 that
depend on it) are never given numerically, so conditions involving them are
reported as advisories rather than evaluated.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Tuple

from tracing_topk.core.errors import InvalidParameterError, InvalidRegimeError

logger = logging.getLogger(__name__)

# c = e^2 * rho must stay below 1
RHO_NOISY_MAX = math.exp(-2)

UNKNOWN_CONSTANT_ADVISORIES = (
    "d <= 2^(C n) for an unspecified universal constant C",
    "k <= C d for an unspecified universal constant C",
)


class Validity(str, Enum):
    UNVERIFIED = "unverified"


def _clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


def _check_rho(rho: float) -> None:
    if not 0 < rho < 1:
        raise InvalidParameterError(f"rho must lie in (0, 1), got {rho}")


def _check_counts(**counts: float) -> None:
    for name, value in counts.items():
        if value < 1:
            raise InvalidParameterError(f"{name} must be at least 1, got {value}")


# ---------------------------
# Probabilistic inequalities
# ---------------------------

def hoeffding_tail(nu: float, n: int) -> float:
    """P[Z - E[Z] >= nu] <= exp(-nu^2 n / 2) for the mean Z of n independent ±1 variables."""
    if not nu > 0:
        raise InvalidParameterError(f"nu must be > 0, got {nu}")
    _check_counts(n=n)
    return _clamp(math.exp(-0.5 * nu * nu * n))


@dataclass(frozen=True)
class ChernoffBounds:
    upper_tail: Optional[float]
    lower_tail: Optional[float]


def chernoff_bounds(nu: float, mu: float) -> ChernoffBounds:
    """Upper tail exp(-nu^2 mu / (2 + nu)) for nu > 0; lower tail exp(-nu^2 mu / 2) for nu in (0, 1)."""
    if not mu > 0:
        raise InvalidParameterError(f"mu must be > 0, got {mu}")
    upper = _clamp(math.exp(-nu * nu * mu / (2 + nu))) if nu > 0 else None
    lower = _clamp(math.exp(-0.5 * nu * nu * mu)) if 0 < nu < 1 else None
    return ChernoffBounds(upper_tail=upper, lower_tail=lower)


@dataclass(frozen=True)
class AnticoncentrationBound:
    value: float
    validity: Validity = Validity.UNVERIFIED


def anticonc_lower(beta: float, nu: float, n: int) -> AnticoncentrationBound:
    """
    exp(-(1 + beta) nu^2 n / 2). The bound only holds for nu in [K/sqrt(n), 1/K]
    with an unspecified K > 1, so the result is always flagged unverified.
    """
    if not beta > 0:
        raise InvalidParameterError(f"beta must be > 0, got {beta}")
    if not nu > 0:
        raise InvalidParameterError(f"nu must be > 0, got {nu}")
    return AnticoncentrationBound(value=_clamp(math.exp(-0.5 * (1 + beta) * nu * nu * n)))


def binomial_upper_tail(n: int, b_min: int) -> Fraction:
    """Exact P[Bin(n, 1/2) >= b_min]."""
    if b_min <= 0:
        return Fraction(1)
    if b_min > n:
        return Fraction(0)
    return Fraction(sum(math.comb(n, b) for b in range(b_min, n + 1)), 2 ** n)


def count_above_expectation(n: int, d: int, lam: float, strict: bool = True) -> float:
    """Expected number of uniform columns with q_j > lam (or >= lam when strict is False)."""
    _check_counts(n=n, d=d)
    bound = Fraction(lam) * n
    # column sum 2B - n with B ~ Bin(n, 1/2)
    if strict:
        b_min = (math.floor(bound) + n) // 2 + 1
    else:
        b_min = math.ceil((bound + n) / 2)
    return float(d * binomial_upper_tail(n, b_min))


# ---------------------------
# Exact top-k regime
# ---------------------------

@dataclass(frozen=True)
class ExactRegime:
    n: int
    d: int
    k: int
    rho: float
    lhs: float
    rhs: float
    satisfied: bool
    gamma: float
    tau: float
    tau_c: float
    failure_bound: float
    advisories: Tuple[str, ...] = UNKNOWN_CONSTANT_ADVISORIES


def topk_bias_gamma(n: int, d: int, k: int, beta: float = 1.0) -> float:
    """gamma_beta = sqrt(2/(1+beta) * ln(d/2k) / n); beta = 1 gives sqrt(ln(d/2k)/n)."""
    _check_counts(n=n, k=k)
    if d <= 2 * k:
        raise InvalidRegimeError(f"Need d > 2k for a positive gamma, got d={d}, k={k}")
    if not beta > 0:
        raise InvalidParameterError(f"beta must be > 0, got {beta}")
    return math.sqrt(2 / (1 + beta) * math.log(d / (2 * k)) / n)


def exact_failure_bound(rho: float, k: int) -> float:
    """rho + e^{-k/4}: completeness miss probability per row for the exact top-k."""
    return _clamp(rho + math.exp(-k / 4))


def exact_regime_check(n: int, d: int, k: int, rho: float) -> ExactRegime:
    """Evaluate k ln(d/2k) >= 8 n ln(1/rho) and the derived gamma, tau and tau_c."""
    _check_rho(rho)
    gamma = topk_bias_gamma(n, d, k)
    log_inv_rho = -math.log(rho)
    lhs = k * math.log(d / (2 * k))
    rhs = 8 * n * log_inv_rho
    tau = math.sqrt(2 * k * log_inv_rho)
    return ExactRegime(
        n=n, d=d, k=k, rho=rho,
        lhs=lhs, rhs=rhs, satisfied=lhs >= rhs,
        gamma=gamma, tau=tau, tau_c=k * gamma - tau,
        failure_bound=exact_failure_bound(rho, k),
    )


# ---------------------------
# Approximate top-k regime
# ---------------------------

@dataclass(frozen=True)
class ConstantFormulas:
    rho: float
    log_inv_rho: float
    c: float
    C1: float
    C2: float
    C3: float
    C5: float
    beta: float


def constant_formulas(rho: float) -> ConstantFormulas:
    """The rho-dependent constants, evaluated without checking that c < 1."""
    _check_rho(rho)
    log_inv_rho = -math.log(rho)
    c = math.e ** 2 * rho
    C1 = math.sqrt(2 / (1 + c / (8 * log_inv_rho)))
    C3 = math.sqrt(2 / (1 + c / (4 * log_inv_rho)))
    return ConstantFormulas(
        rho=rho,
        log_inv_rho=log_inv_rho,
        c=c,
        C1=C1,
        C2=c / (2 * c + 4 * log_inv_rho),
        C3=C3,
        C5=C1 - C3,
        beta=c / (16 * log_inv_rho),
    )


@dataclass(frozen=True)
class NoisyRegimeConstants:
    rho: float
    c: float
    C1: float
    C2: float
    C3: float
    C5: float
    beta: float
    n: float
    d: int
    k: int
    gamma_n: float
    lam: float
    d_lambda: float
    tau: float
    tau_c: float
    tau_c_reachable: bool
    alpha_max: float
    sample_size_bound: float
    sample_size_satisfied: bool
    side_condition: bool
    union_bound_slack: float
    union_bound_satisfied: bool
    completeness_fraction: float
    failure_bounds: Tuple[float, float] = field(default=(1.0, 1.0))


def noisy_sample_size(rho: float, d: int, k: int) -> float:
    """n = C3^2 k ln(2d) / (8 ln(1/rho)), the sample size at which tau_c equals tau."""
    consts = constant_formulas(rho)
    _check_counts(d=d, k=k)
    return consts.C3 ** 2 * k * math.log(2 * d) / (8 * consts.log_inv_rho)


def noisy_failure_bounds(rho: float, k: int) -> Tuple[float, float]:
    """(2 rho + 2 e^{-k/6}, 2 rho + e^{-k/4} + e^{-k/6}): the overall tracing and the completeness-only forms."""
    overall = 2 * rho + 2 * math.exp(-k / 6)
    completeness = 2 * rho + math.exp(-k / 4) + math.exp(-k / 6)
    return _clamp(overall), _clamp(completeness)


def noisy_constants(rho: float, n: float, d: int, k: int) -> NoisyRegimeConstants:
    """
    Constants of the approximate top-k completeness analysis. n may be real so the
    sample-size identity 8 n ln(1/rho) = C3^2 k ln(2d) can be evaluated exactly.
    """
    _check_rho(rho)
    if rho >= RHO_NOISY_MAX:
        raise InvalidParameterError(f"rho must be below e^-2 so that c = e^2 rho < 1, got {rho}")
    _check_counts(n=n, d=d, k=k)

    consts = constant_formulas(rho)
    scale = math.sqrt(math.log(2 * d) / n)
    lam = consts.C3 * scale
    d_lambda = 2 * d * math.exp(-0.5 * lam * lam * n)
    tau = math.sqrt(2 * k * consts.log_inv_rho)
    tau_c = consts.C3 * k * scale - tau
    sample_size_bound = consts.C3 ** 2 * k * math.log(2 * d) / (8 * consts.log_inv_rho)
    # union bound over subsets: c n >= ln(1/rho) + k ln(d_lambda)
    union_slack = consts.c * n - consts.log_inv_rho - k * math.log(d_lambda)

    return NoisyRegimeConstants(
        rho=rho, c=consts.c,
        C1=consts.C1, C2=consts.C2, C3=consts.C3, C5=consts.C5, beta=consts.beta,
        n=n, d=d, k=k,
        gamma_n=consts.C1 * scale,
        lam=lam,
        d_lambda=d_lambda,
        tau=tau,
        tau_c=tau_c,
        tau_c_reachable=tau_c <= k,
        alpha_max=consts.C5 * scale,
        sample_size_bound=sample_size_bound,
        sample_size_satisfied=n <= sample_size_bound,
        side_condition=4 * k <= (2 * d) ** consts.C2,
        union_bound_slack=union_slack,
        union_bound_satisfied=union_slack >= 0,
        completeness_fraction=1 - consts.c,
        failure_bounds=noisy_failure_bounds(rho, k),
    )


def positive_alpha_scale(n: int, d: int, k: int, epsilon: float, delta: float, beta: float) -> float:
    """sqrt(k ln(1/delta)) ln(kd/beta) / (epsilon n): the accuracy scale of private top-k, without its constant."""
    _check_counts(n=n, d=d, k=k)
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")
    if not 0 < delta < 1 or not 0 < beta < 1:
        raise InvalidParameterError("delta and beta must lie in (0, 1)")
    return math.sqrt(k * math.log(1 / delta)) * math.log(k * d / beta) / (epsilon * n)


# ---------------------------
# DP-violation witness
# ---------------------------

@dataclass(frozen=True)
class DPWitness:
    rho_sound: float
    untraced_fraction: float
    delta: float
    epsilon_max: Optional[float]

    @property
    def defined(self) -> bool:
        return self.epsilon_max is not None

    def rules_out(self, epsilon: float) -> bool:
        """True when (epsilon, delta)-DP is contradicted by the observed attack."""
        return self.epsilon_max is not None and epsilon < self.epsilon_max


def dp_witness(rho_sound: float, untraced_fraction: float, delta: float) -> DPWitness:
    """
    A mechanism cannot be (eps, delta)-DP when e^eps rho + delta < 1 - rho - m/n.
    epsilon_max is the supremum of such eps: +inf when rho = 0, None when no eps works.
    """
    for name, value in (("rho_sound", rho_sound), ("untraced_fraction", untraced_fraction), ("delta", delta)):
        if not 0 <= value <= 1:
            raise InvalidParameterError(f"{name} must lie in [0, 1], got {value}")

    margin = 1 - rho_sound - untraced_fraction - delta
    if rho_sound == 0:
        eps_max = math.inf if margin > 0 else None
    elif margin > rho_sound:
        eps_max = math.log(margin / rho_sound)
    else:
        eps_max = None

    if eps_max is None:
        logger.warning(
            "No DP witness: rho=%.4g, m/n=%.4g, delta=%.4g", rho_sound, untraced_fraction, delta
        )
    return DPWitness(rho_sound=rho_sound, untraced_fraction=untraced_fraction, delta=delta, epsilon_max=eps_max)
