# tracing_topk/core/harness.py
"""
Monte Carlo experiment runner.

Each trial draws a fresh dataset (and, for the attack kinds, a fresh independent
target) from streams keyed by (master_seed, trial_index, purpose), so a trial's
result does not depend on which worker ran it. Results are returned ordered by
trial_index; summaries aggregate integer counters and only divide at the end.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from tracing_topk.core import config as settings
from tracing_topk.core import rng as rngs
from tracing_topk.core.attack import AttackParams, Decision, trace_dataset
from tracing_topk.core.bounds import (
    count_above_expectation,
    dp_witness,
    exact_regime_check,
    topk_bias_gamma,
)
from tracing_topk.core.dataset import (
    DatasetMatrix,
    as_fraction,
    count_above,
    fixed_sum_matrix,
    marginals,
    uniform_matrix,
)
from tracing_topk.core.errors import InvalidParameterError, InvalidRegimeError, InvalidSumError
from tracing_topk.core.mechanisms import MechanismConfig, exp_mech_peeling, release
from tracing_topk.core.models.experiment import (
    ATTACK_KINDS,
    ExperimentConfig,
    ExperimentKind,
    Summary,
    TrialResult,
    WitnessSummary,
)

logger = logging.getLogger(__name__)

PROTOCOLS = {
    ExperimentKind.SOUNDNESS: "fresh uniform X and fresh independent target y per trial; IN rate of y estimates soundness",
    ExperimentKind.COMPLETENESS: "fresh uniform X per trial; traced rates pooled over rows and trials estimate completeness",
    ExperimentKind.ADVERSARIAL: "fresh uniform X per trial; alpha-accurate selector hides target_row; rows compared against the rest",
    ExperimentKind.TOPK_BIAS: "fresh uniform X per trial; counts trials where q_(k) falls below gamma",
    ExperimentKind.COUNT_ABOVE: "fresh uniform X per trial; counts trials where more than d_lambda marginals exceed lambda",
    ExperimentKind.CORR_ROWS: "fresh k-column fixed-sum matrix per trial; per-row and per-pair event frequencies",
    ExperimentKind.MECHANISM_ACCURACY: "fresh uniform X per trial; one peeling release per trial, error against q_(k)",
}


def corr_rows_sum(n: int, lam: float) -> int:
    """lambda*n rounded up to the nearest integer with the parity of n."""
    s = math.ceil(as_fraction(lam) * n)
    if (s - n) % 2:
        s += 1
    if abs(s) > n:
        raise InvalidSumError(f"lambda={lam} gives no feasible column sum for n={n}")
    return s


def d_lambda_value(n: int, d: int, lam: float) -> float:
    return 2 * d * math.exp(-0.5 * lam * lam * n)


@dataclass(frozen=True)
class _TrialContext:
    """Per-experiment quantities computed once and shared by every trial."""

    config: ExperimentConfig
    params: Optional[AttackParams] = None
    gamma: Optional[float] = None
    d_lambda: Optional[float] = None
    corr_sum: Optional[int] = None
    corr_threshold: Optional[float] = None


def _context(config: ExperimentConfig) -> _TrialContext:
    kind = config.kind
    params = AttackParams.build(config.k, config.rho) if kind in ATTACK_KINDS else None
    gamma = topk_bias_gamma(config.n, config.d, config.k) if kind is ExperimentKind.TOPK_BIAS else None
    d_lam = d_lambda_value(config.n, config.d, config.lam) if config.lam is not None else None

    corr_sum = corr_threshold = None
    if kind is ExperimentKind.CORR_ROWS:
        corr_sum = corr_rows_sum(config.n, config.lam)
        realized_lam = corr_sum / config.n
        corr_threshold = config.k * realized_lam - math.sqrt(2 * config.k * -math.log(config.rho))

    return _TrialContext(
        config=config, params=params, gamma=gamma, d_lambda=d_lam,
        corr_sum=corr_sum, corr_threshold=corr_threshold,
    )


# ---------------------------
# Per-kind trials
# ---------------------------

def _data(config: ExperimentConfig, t: int) -> DatasetMatrix:
    return uniform_matrix(config.n, config.d, rngs.trial_stream(config.master_seed, t, "data"))


def _kth_fields(X: DatasetMatrix, k: int) -> Dict[str, int]:
    q_k = marginals(X).kth(k)
    return {"q_k_num": q_k.numerator, "q_k_den": q_k.denominator}


def _count_field(X: DatasetMatrix, config: ExperimentConfig) -> Dict[str, int]:
    if config.lam is None:
        return {}
    return {"count_above": count_above(X, config.lam)}


def _attack_trial(ctx: _TrialContext, t: int) -> TrialResult:
    config = ctx.config
    X = _data(config, t)
    mech = MechanismConfig(
        kind=config.release_mechanism(),
        epsilon=config.epsilon,
        alpha=config.alpha,
        target_row=config.target_row,
        seed=rngs.child_seed(config.master_seed, t, "mechanism"),
        composition=config.composition,
        delta=config.delta,
    )
    outcome = release(X, config.k, mech)
    y = rngs.trial_stream(config.master_seed, t, "target").integers(0, 2, size=config.d, dtype=np.int8)
    report = trace_dataset(X, outcome.t_hat, ctx.params, (y << 1) - 1)

    inner = report.inner_products
    logger.debug("trial %d: traced %d/%d, out-sample %s", t, report.traced_count, X.n, report.out_sample_decision.value)
    return TrialResult(
        trial_index=t,
        traced_count=report.traced_count,
        out_sample_decision=report.out_sample_decision,
        out_inner_product=report.out_inner_product,
        release_error=outcome.error,
        inner_min=min(inner),
        inner_mean=math.fsum(inner) / len(inner),
        row_traced=[dec is Decision.IN for dec in report.decisions],
        **_kth_fields(X, config.k),
        **_count_field(X, config),
    )


def _topk_bias_trial(ctx: _TrialContext, t: int) -> TrialResult:
    config = ctx.config
    X = _data(config, t)
    fields = _kth_fields(X, config.k)
    q_k = Fraction(fields["q_k_num"], fields["q_k_den"])
    return TrialResult(
        trial_index=t,
        below_gamma=q_k < as_fraction(ctx.gamma),
        **fields,
        **_count_field(X, config),
    )


def _count_above_trial(ctx: _TrialContext, t: int) -> TrialResult:
    config = ctx.config
    X = _data(config, t)
    above = count_above(X, config.lam)
    return TrialResult(
        trial_index=t,
        count_above=above,
        exceeds_d_lambda=above > ctx.d_lambda,
        **_kth_fields(X, config.k),
    )


def _corr_rows_trial(ctx: _TrialContext, t: int) -> TrialResult:
    config = ctx.config
    X = fixed_sum_matrix(config.n, config.k, ctx.corr_sum, rngs.trial_stream(config.master_seed, t, "data"))
    row_sums = X.entries.sum(axis=1, dtype=np.int64)
    fired = np.flatnonzero(row_sums < ctx.corr_threshold)
    return TrialResult(
        trial_index=t,
        realized_sum=ctx.corr_sum,
        event_rows=[int(i) for i in fired],
    )


def _accuracy_trial(ctx: _TrialContext, t: int) -> TrialResult:
    config = ctx.config
    X = _data(config, t)
    outcome = exp_mech_peeling(
        X, config.k, config.epsilon,
        seed=rngs.child_seed(config.master_seed, t, "mechanism"),
        composition=config.composition,
        delta=config.delta,
    )
    return TrialResult(
        trial_index=t,
        release_error=outcome.error,
        **_kth_fields(X, config.k),
        **_count_field(X, config),
    )


_TRIALS: Dict[ExperimentKind, Callable[[_TrialContext, int], TrialResult]] = {
    ExperimentKind.SOUNDNESS: _attack_trial,
    ExperimentKind.COMPLETENESS: _attack_trial,
    ExperimentKind.ADVERSARIAL: _attack_trial,
    ExperimentKind.TOPK_BIAS: _topk_bias_trial,
    ExperimentKind.COUNT_ABOVE: _count_above_trial,
    ExperimentKind.CORR_ROWS: _corr_rows_trial,
    ExperimentKind.MECHANISM_ACCURACY: _accuracy_trial,
}


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    """A single trial, exactly as run_experiment would produce it."""
    if not 0 <= trial_index < config.trials:
        raise InvalidParameterError(f"trial_index must lie in [0, {config.trials}), got {trial_index}")
    return _TRIALS[config.kind](_context(config), trial_index)


def _warn_if_outside_regime(config: ExperimentConfig) -> None:
    if config.kind is not ExperimentKind.COMPLETENESS:
        return
    try:
        regime = exact_regime_check(config.n, config.d, config.k, config.rho)
    except InvalidRegimeError as e:
        logger.warning("Completeness experiment outside the exact regime: %s", e)
        return
    if not regime.satisfied:
        logger.warning(
            "Completeness experiment outside the exact regime: k ln(d/2k)=%.2f < 8 n ln(1/rho)=%.2f",
            regime.lhs, regime.rhs,
        )


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> List[TrialResult]:
    workers = settings.WORKERS if workers is None else workers
    if workers < 1:
        raise InvalidParameterError(f"workers must be at least 1, got {workers}")

    _warn_if_outside_regime(config)
    ctx = _context(config)
    trial = _TRIALS[config.kind]

    logger.info(
        "Starting %s experiment: n=%d d=%d k=%d trials=%d workers=%d",
        config.kind.value, config.n, config.d, config.k, config.trials, workers,
    )
    started = time.perf_counter()

    if workers == 1:
        results = [trial(ctx, t) for t in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: trial(ctx, t), range(config.trials)))

    logger.info(
        "Finished %s experiment: %d trials in %.2fs",
        config.kind.value, len(results), time.perf_counter() - started,
    )
    return results


# ---------------------------
# Aggregation
# ---------------------------

def _rate(count: int, total: int) -> float:
    return float(Fraction(count, total))


def _require(results: Sequence[TrialResult], field: str, kind: ExperimentKind) -> None:
    for r in results:
        if getattr(r, field) is None:
            raise InvalidParameterError(f"Trial {r.trial_index} has no {field}; not a {kind.value} result")


def _attack_summary(results: Sequence[TrialResult], config: ExperimentConfig) -> Dict[str, object]:
    _require(results, "out_sample_decision", config.kind)
    _require(results, "row_traced", config.kind)
    trials, n = len(results), config.n

    in_count = sum(1 for r in results if r.out_sample_decision is Decision.IN)
    traced_total = sum(r.traced_count for r in results)
    row_counts = np.zeros(n, dtype=np.int64)
    for r in results:
        row_counts += np.asarray(r.row_traced, dtype=np.int64)

    in_rate = Fraction(in_count, trials)
    traced_fraction = Fraction(traced_total, trials * n)
    out = {
        "in_rate_out_sample": float(in_rate),
        "mean_traced_fraction": float(traced_fraction),
        "row_traced_rate_min": _rate(int(row_counts.min()), trials),
        "row_traced_rate_median": float(np.median(row_counts)) / trials,
    }

    if config.target_row is not None:
        others = int(row_counts.sum()) - int(row_counts[config.target_row])
        out["targeted_row_traced_rate"] = _rate(int(row_counts[config.target_row]), trials)
        if n > 1:
            out["other_rows_traced_rate"] = _rate(others, trials * (n - 1))

    c = math.e ** 2 * config.rho
    if c < 1:
        floor = (1 - c) * n
        out["completeness_fraction"] = 1 - c
        out["noisy_completeness_failure_rate"] = _rate(sum(1 for r in results if r.traced_count < floor), trials)

    ips = [r.out_inner_product for r in results]
    total = sum(ips)
    out["out_inner_mean"] = float(Fraction(total, trials))
    if trials > 1:
        squares = sum(v * v for v in ips)
        out["out_inner_variance"] = float(Fraction(squares * trials - total * total, trials * (trials - 1)))

    witness = dp_witness(float(in_rate), float(1 - traced_fraction), 0.0)
    out["witness"] = WitnessSummary(
        rho_sound=witness.rho_sound,
        untraced_fraction=witness.untraced_fraction,
        delta=witness.delta,
        epsilon_max=witness.epsilon_max,
    )
    return out


def _topk_bias_summary(results: Sequence[TrialResult], config: ExperimentConfig) -> Dict[str, object]:
    _require(results, "below_gamma", config.kind)
    failures = sum(1 for r in results if r.below_gamma)
    return {
        "gamma": topk_bias_gamma(config.n, config.d, config.k),
        "q_k_failure_rate": _rate(failures, len(results)),
        "q_k_failure_bound": min(1.0, math.exp(-config.k / 4)),
    }


def _count_above_summary(results: Sequence[TrialResult], config: ExperimentConfig) -> Dict[str, object]:
    _require(results, "count_above", config.kind)
    d_lam = d_lambda_value(config.n, config.d, config.lam)
    counts = [r.count_above for r in results]
    violations = sum(1 for v in counts if v > d_lam)
    return {
        "d_lambda": d_lam,
        "count_above_violation_rate": _rate(violations, len(results)),
        "count_above_failure_bound": min(1.0, math.exp(-d_lam / 6)),
        "count_above_mean": float(Fraction(sum(counts), len(counts))),
        "count_above_expected": count_above_expectation(config.n, config.d, config.lam),
    }


def _corr_rows_summary(results: Sequence[TrialResult], config: ExperimentConfig) -> Dict[str, object]:
    _require(results, "event_rows", config.kind)
    trials, n = len(results), config.n
    events = np.zeros((trials, n), dtype=np.int64)
    for i, r in enumerate(results):
        events[i, r.event_rows] = 1

    single = events.sum(axis=0)
    out = {
        "corr_rows_realized_sum": results[0].realized_sum,
        "corr_rows_single_rate_max": _rate(int(single.max()), trials),
        "corr_rows_single_bound": config.rho,
        "corr_rows_joint_bound": config.rho ** 2,
    }
    if n > 1:
        joint = events.T @ events
        np.fill_diagonal(joint, 0)
        out["corr_rows_joint_rate_max"] = _rate(int(joint.max()), trials)
    return out


def _accuracy_summary(results: Sequence[TrialResult], config: ExperimentConfig) -> Dict[str, object]:
    _require(results, "release_error", config.kind)
    errors = np.array([r.release_error for r in results], dtype=np.float64)
    p05, median, p95 = np.quantile(errors, [0.05, 0.5, 0.95])
    return {
        "release_error_median": float(median),
        "release_error_p05": float(p05),
        "release_error_p95": float(p95),
        "release_error_mean": math.fsum(errors.tolist()) / errors.size,
    }


_SUMMARIES = {
    ExperimentKind.SOUNDNESS: _attack_summary,
    ExperimentKind.COMPLETENESS: _attack_summary,
    ExperimentKind.ADVERSARIAL: _attack_summary,
    ExperimentKind.TOPK_BIAS: _topk_bias_summary,
    ExperimentKind.COUNT_ABOVE: _count_above_summary,
    ExperimentKind.CORR_ROWS: _corr_rows_summary,
    ExperimentKind.MECHANISM_ACCURACY: _accuracy_summary,
}


def summarize(results: Sequence[TrialResult], config: ExperimentConfig) -> Summary:
    if not results:
        raise InvalidParameterError("Cannot summarize an empty result sequence")
    indices = [r.trial_index for r in results]
    if len(set(indices)) != len(indices):
        raise InvalidParameterError("Trial results repeat a trial_index")

    ordered = sorted(results, key=lambda r: r.trial_index)
    fields = _SUMMARIES[config.kind](ordered, config)
    return Summary(
        kind=config.kind,
        trials=len(ordered),
        n=config.n,
        d=config.d,
        k=config.k,
        protocol=PROTOCOLS[config.kind],
        **fields,
    )
