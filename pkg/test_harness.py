"""
Tests for experiment configs, the Monte Carlo runner and aggregation.

Tests marked slow run the desk-scale statistical suites.
"""
import math

import pytest

from tracing_topk.core.attack import Decision
from tracing_topk.core.errors import ConfigError, InvalidParameterError
from tracing_topk.core.harness import corr_rows_sum, run_experiment, run_trial, summarize
from tracing_topk.core.mechanisms import MechanismKind
from tracing_topk.core.models.experiment import ExperimentConfig, ExperimentKind, TrialResult

RHO_E = math.exp(-1)


def make_config(**overrides) -> ExperimentConfig:
    data = {"kind": "soundness", "n": 2, "d": 4, "k": 1, "rho": RHO_E, "trials": 3, "master_seed": 42}
    data.update(overrides)
    return ExperimentConfig.from_mapping(data)


# ---------------------------
# Config validation
# ---------------------------

def test_config_rejects_zero_trials():
    with pytest.raises(ConfigError):
        make_config(trials=0)


def test_config_requires_rho_for_attack_kinds():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"kind": "completeness", "n": 2, "d": 4, "k": 1, "trials": 1, "master_seed": 0})


def test_config_rejects_unknown_fields():
    with pytest.raises(ConfigError):
        make_config(colour="blue")


def test_config_rejects_k_above_d():
    with pytest.raises(ConfigError):
        make_config(k=5)


@pytest.mark.parametrize(
    "overrides",
    [
        {"kind": "adversarial"},
        {"kind": "claim-count-above"},
        {"kind": "claim-corr-rows", "lambda": 0.5, "rho": None},
        {"kind": "claim-topkbias", "d": 2, "k": 1},
        {"kind": "mechanism-accuracy"},
        {"mechanism": "expmech"},
    ],
)
def test_config_requires_kind_parameters(overrides):
    with pytest.raises(ConfigError):
        make_config(**overrides)


def test_config_accepts_lambda_and_noiseless():
    config = make_config(kind="claim-count-above", **{"lambda": 0.5}, epsilon="noiseless")
    assert config.lam == 0.5
    assert config.epsilon == math.inf
    dumped = config.model_dump(mode="json", by_alias=True)
    assert dumped["lambda"] == 0.5
    assert dumped["epsilon"] == "noiseless"


def test_release_mechanism_defaults():
    assert make_config().release_mechanism() is MechanismKind.EXACT
    adversarial = make_config(kind="adversarial", alpha=0.25, target_row=0)
    assert adversarial.release_mechanism() is MechanismKind.ADVERSARIAL


def test_config_from_json_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"kind": "soundness", "n": 2, "d": 4, "k": 1, "rho": 0.3, "trials": 2, "master_seed": 1}')
    assert ExperimentConfig.from_json_file(path).trials == 2
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json_file(path)


# ---------------------------
# Runner
# ---------------------------

def test_soundness_results_are_in_range():
    results = run_experiment(make_config())
    assert [r.trial_index for r in results] == [0, 1, 2]
    for r in results:
        assert r.out_sample_decision in (Decision.IN, Decision.OUT)
        assert r.traced_count in (0, 1, 2)
        assert len(r.row_traced) == 2


def test_same_config_gives_identical_results():
    config = make_config(n=10, d=60, k=5, trials=8)
    assert run_experiment(config) == run_experiment(config)


def test_results_do_not_depend_on_worker_count():
    config = make_config(kind="mechanism-accuracy", n=20, d=80, k=4, epsilon=1.0, trials=12)
    assert run_experiment(config, workers=1) == run_experiment(config, workers=4)


def test_run_trial_matches_the_full_run():
    config = make_config(n=10, d=60, k=5, trials=5)
    assert run_trial(config, 3) == run_experiment(config)[3]
    with pytest.raises(InvalidParameterError):
        run_trial(config, 5)


def test_master_seed_changes_results():
    a = run_experiment(make_config(n=10, d=200, k=5, trials=4))
    b = run_experiment(make_config(n=10, d=200, k=5, trials=4, master_seed=43))
    assert a != b


@pytest.mark.parametrize("n,lam,expected", [(24, 0.5, 12), (5, 0.5, 3), (4, 0.3, 2), (4, 0.1, 2), (4, 0.99, 4)])
def test_corr_rows_sum_matches_parity(n, lam, expected):
    assert corr_rows_sum(n, lam) == expected


def test_each_kind_populates_its_fields():
    topk_bias = run_experiment(make_config(kind="claim-topkbias", n=8, d=100, k=5, trials=2))
    assert all(r.below_gamma is not None and r.q_k_den is not None for r in topk_bias)

    count = run_experiment(make_config(kind="claim-count-above", n=8, d=100, trials=2, **{"lambda": 0.25}))
    assert all(r.count_above is not None and r.exceeds_d_lambda is not None for r in count)

    corr = run_experiment(make_config(kind="claim-corr-rows", n=6, d=4, k=4, trials=3, **{"lambda": 0.5}))
    assert all(r.realized_sum == 4 and r.event_rows is not None for r in corr)

    accuracy = run_experiment(make_config(kind="mechanism-accuracy", n=8, d=20, k=3, epsilon=2.0, trials=2))
    assert all(r.release_error is not None and r.release_error >= 0 for r in accuracy)

    adversarial = run_experiment(make_config(kind="adversarial", n=6, d=40, k=3, alpha=0.5, target_row=1, trials=2))
    assert all(r.row_traced[1] is False for r in adversarial)


# ---------------------------
# Aggregation
# ---------------------------

def _attack_result(index, out, rows, out_ip=0):
    return TrialResult(
        trial_index=index,
        traced_count=sum(rows),
        out_sample_decision=out,
        out_inner_product=out_ip,
        row_traced=rows,
    )


def test_summarize_rejects_empty_results():
    with pytest.raises(InvalidParameterError):
        summarize([], make_config())


def test_summarize_in_rate():
    config = make_config(trials=4)
    decisions = [Decision.IN, Decision.OUT, Decision.IN, Decision.IN]
    results = [_attack_result(i, dec, [False, False]) for i, dec in enumerate(decisions)]
    assert summarize(results, config).in_rate_out_sample == 0.75


def test_summarize_all_rows_traced():
    config = make_config(trials=3)
    results = [_attack_result(i, Decision.OUT, [True, True]) for i in range(3)]
    summary = summarize(results, config)
    assert summary.mean_traced_fraction == 1.0
    assert summary.row_traced_rate_min == 1.0


def test_summarize_hand_counted_trials():
    # trial 0 reproduces the two-row trace example (both rows at or below tau)
    config = make_config(d=3, k=2, trials=2)
    results = [
        _attack_result(0, Decision.OUT, [False, False], out_ip=0),
        _attack_result(1, Decision.IN, [True, False], out_ip=2),
    ]
    summary = summarize(results, config)
    assert summary.in_rate_out_sample == 0.5
    assert summary.mean_traced_fraction == 0.25
    assert summary.row_traced_rate_min == 0.0
    assert summary.row_traced_rate_median == 0.25
    assert summary.out_inner_mean == 1.0
    assert summary.out_inner_variance == 2.0
    assert summary.witness.epsilon_max is None


def test_summarize_is_order_independent():
    config = make_config(n=10, d=60, k=5, trials=6)
    results = run_experiment(config)
    assert summarize(results, config) == summarize(list(reversed(results)), config)


def test_summarize_rejects_results_of_another_kind():
    config = make_config(kind="claim-count-above", **{"lambda": 0.5})
    with pytest.raises(InvalidParameterError):
        summarize([TrialResult(trial_index=0)], config)


def test_summary_rates_within_unit_interval():
    config = make_config(kind="completeness", n=12, d=400, k=10, rho=0.1, trials=10)
    summary = summarize(run_experiment(config), config)
    for name in ("in_rate_out_sample", "mean_traced_fraction", "row_traced_rate_min", "row_traced_rate_median"):
        assert 0.0 <= getattr(summary, name) <= 1.0
    assert summary.kind is ExperimentKind.COMPLETENESS
    assert summary.trials == 10


def test_completeness_against_a_noisy_release():
    config = make_config(kind="completeness", n=12, d=400, k=10, rho=0.05, mechanism="expmech", epsilon=2.0, trials=8)
    assert config.release_mechanism() is MechanismKind.EXP_MECH
    results = run_experiment(config)
    assert any(r.release_error > 0 for r in results)

    summary = summarize(results, config)
    assert summary.completeness_fraction == pytest.approx(1 - math.e ** 2 * 0.05)
    assert 0.0 <= summary.noisy_completeness_failure_rate <= 1.0
    assert 0.0 <= summary.mean_traced_fraction <= 1.0


def test_noisy_completeness_fields_absent_outside_the_regime():
    config = make_config(kind="completeness", n=12, d=400, k=10, rho=0.2, trials=2)
    summary = summarize(run_experiment(config), config)
    assert summary.completeness_fraction is None
    assert summary.noisy_completeness_failure_rate is None


# ---------------------------
# Desk-scale statistical suites
# ---------------------------

DESK = {"n": 24, "d": 65536, "k": 100, "rho": 0.05, "master_seed": 20240601}


@pytest.fixture(scope="module")
def desk_summary():
    config = ExperimentConfig.from_mapping({"kind": "completeness", "trials": 2000, **DESK})
    return summarize(run_experiment(config), config)


@pytest.mark.slow
def test_soundness_at_desk_scale(desk_summary):
    assert desk_summary.in_rate_out_sample <= 0.065


@pytest.mark.slow
def test_completeness_at_desk_scale(desk_summary):
    assert desk_summary.mean_traced_fraction >= 0.93
    assert desk_summary.witness.epsilon_max is not None


@pytest.mark.slow
def test_noisy_release_is_still_traced():
    config = ExperimentConfig.from_mapping(
        {"kind": "completeness", "trials": 300, "mechanism": "expmech", "epsilon": 800.0, **DESK}
    )
    results = run_experiment(config)
    summary = summarize(results, config)
    assert any(r.release_error > 0 for r in results)
    assert summary.mean_traced_fraction >= 1 - math.e ** 2 * DESK["rho"]
    assert summary.noisy_completeness_failure_rate <= 0.05


@pytest.mark.slow
def test_null_calibration_of_the_out_sample_inner_product():
    config = ExperimentConfig.from_mapping(
        {"kind": "soundness", "n": 24, "d": 1024, "k": 100, "rho": 0.05, "trials": 10_000, "master_seed": 7}
    )
    summary = summarize(run_experiment(config), config)
    assert abs(summary.out_inner_mean) <= 0.3
    assert 90 <= summary.out_inner_variance <= 110


@pytest.mark.slow
def test_kth_marginal_stays_above_gamma():
    config = ExperimentConfig.from_mapping({"kind": "claim-topkbias", "trials": 2000, **DESK})
    summary = summarize(run_experiment(config), config)
    assert summary.gamma == pytest.approx(0.4912, abs=1e-4)
    assert summary.q_k_failure_rate == 0.0


@pytest.mark.slow
def test_count_above_never_exceeds_d_lambda():
    config = ExperimentConfig.from_mapping({"kind": "claim-count-above", "trials": 2000, "lambda": 0.5, **DESK})
    summary = summarize(run_experiment(config), config)
    assert summary.d_lambda == pytest.approx(2 * 65536 * math.exp(-3))
    assert summary.count_above_violation_rate == 0.0
    assert summary.count_above_mean == pytest.approx(summary.count_above_expected, rel=0.05)


@pytest.mark.slow
def test_adversarial_selector_hides_the_target_row():
    config = ExperimentConfig.from_mapping(
        {"kind": "adversarial", "trials": 500, "alpha": 0.25, "target_row": 0, **DESK}
    )
    summary = summarize(run_experiment(config), config)
    assert summary.targeted_row_traced_rate <= 0.05
    assert summary.other_rows_traced_rate >= 0.80


@pytest.mark.slow
def test_correlated_rows_joint_event_rate():
    config = ExperimentConfig.from_mapping(
        {"kind": "claim-corr-rows", "n": 24, "d": 20, "k": 20, "lambda": 0.5, "rho": RHO_E,
         "trials": 100_000, "master_seed": 99}
    )
    summary = summarize(run_experiment(config), config)
    assert summary.corr_rows_realized_sum == 12
    assert summary.corr_rows_single_rate_max <= RHO_E
    assert summary.corr_rows_joint_rate_max <= RHO_E ** 2 * 1.2


@pytest.mark.slow
def test_mechanism_accuracy_improves_with_budget():
    medians = []
    for epsilon in (0.125, 1.0, 8.0):
        config = ExperimentConfig.from_mapping(
            {"kind": "mechanism-accuracy", "n": 1000, "d": 1000, "k": 10, "epsilon": epsilon,
             "trials": 500, "master_seed": 5}
        )
        medians.append(summarize(run_experiment(config), config).release_error_median)
    assert medians[0] > medians[1] > medians[2]
