# tracing_topk/core/models/experiment.py
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_serializer, field_validator, model_validator

from tracing_topk.core.attack import Decision
from tracing_topk.core.errors import ConfigError, ReportError
from tracing_topk.core.mechanisms import Composition, MechanismKind, parse_epsilon


# ============================================
# Experiment configuration
# ============================================

class ExperimentKind(str, Enum):
    SOUNDNESS = "soundness"
    COMPLETENESS = "completeness"
    ADVERSARIAL = "adversarial"
    TOPK_BIAS = "claim-topkbias"
    COUNT_ABOVE = "claim-count-above"
    CORR_ROWS = "claim-corr-rows"
    MECHANISM_ACCURACY = "mechanism-accuracy"


ATTACK_KINDS = frozenset({ExperimentKind.SOUNDNESS, ExperimentKind.COMPLETENESS, ExperimentKind.ADVERSARIAL})


class ExperimentConfig(BaseModel):
    """One Monte Carlo experiment. JSON configs use these field names verbatim."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)

    kind: ExperimentKind
    n: int = Field(ge=1, description="Rows (individuals)")
    d: int = Field(ge=1, description="Columns (attributes)")
    k: int = Field(ge=1, description="Columns released")
    rho: Optional[float] = Field(default=None, gt=0, lt=1, description="Attack confidence parameter")
    alpha: Optional[float] = Field(default=None, ge=0, description="Accuracy slack of the adversarial selector")
    lam: Optional[float] = Field(default=None, alias="lambda", gt=-1, lt=1, description="Marginal threshold")
    epsilon: Optional[float] = Field(default=None, description="Privacy budget, or \"noiseless\"")
    mechanism: Optional[MechanismKind] = Field(default=None, description="Release used by attack kinds")
    composition: Composition = Composition.BASIC
    delta: float = Field(default=0.0, ge=0, lt=1)
    target_row: Optional[int] = Field(default=None, ge=0)
    trials: int = Field(ge=1)
    master_seed: int = Field(ge=0, lt=2 ** 64)

    @field_validator("epsilon", mode="before")
    @classmethod
    def _parse_noiseless(cls, value: Any) -> Any:
        return parse_epsilon(value)

    @field_serializer("epsilon")
    def _dump_noiseless(self, value: Optional[float]) -> Union[float, str, None]:
        if value is not None and math.isinf(value):
            return "noiseless"
        return value

    @model_validator(mode="after")
    def _check_kind_requirements(self) -> "ExperimentConfig":
        if self.k > self.d:
            raise ValueError(f"k={self.k} exceeds d={self.d}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be > 0 or \"noiseless\"")
        if self.target_row is not None and self.target_row >= self.n:
            raise ValueError(f"target_row={self.target_row} outside [0, {self.n})")

        kind = self.kind
        if kind in ATTACK_KINDS and self.rho is None:
            raise ValueError(f"{kind.value} needs rho")
        if kind is ExperimentKind.ADVERSARIAL:
            if self.mechanism not in (None, MechanismKind.ADVERSARIAL):
                raise ValueError("adversarial experiments always use the adversarial selector")
        if kind in ATTACK_KINDS:
            mech = self.release_mechanism()
            if mech is MechanismKind.EXP_MECH and self.epsilon is None:
                raise ValueError("the exponential mechanism needs epsilon")
            if mech is MechanismKind.ADVERSARIAL and (self.alpha is None or self.target_row is None):
                raise ValueError("the adversarial selector needs alpha and target_row")
        if kind is ExperimentKind.TOPK_BIAS and self.d <= 2 * self.k:
            raise ValueError("claim-topkbias needs d > 2k")
        if kind is ExperimentKind.COUNT_ABOVE and self.lam is None:
            raise ValueError("claim-count-above needs lambda")
        if kind is ExperimentKind.CORR_ROWS and (self.lam is None or self.rho is None):
            raise ValueError("claim-corr-rows needs lambda and rho")
        if kind is ExperimentKind.MECHANISM_ACCURACY and self.epsilon is None:
            raise ValueError("mechanism-accuracy needs epsilon")
        return self

    def release_mechanism(self) -> MechanismKind:
        if self.kind is ExperimentKind.ADVERSARIAL:
            return MechanismKind.ADVERSARIAL
        if self.kind is ExperimentKind.MECHANISM_ACCURACY:
            return MechanismKind.EXP_MECH
        return self.mechanism or MechanismKind.EXACT

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Invalid experiment config: {e}") from e

    @classmethod
    def from_json_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ReportError(path, e.strerror or str(e)) from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_mapping(data)


# ============================================
# Per-trial results and summaries
# ============================================

class TrialResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    trial_index: int
    traced_count: Optional[int] = None
    out_sample_decision: Optional[Decision] = None
    out_inner_product: Optional[int] = None
    q_k_num: Optional[int] = None
    q_k_den: Optional[int] = None
    count_above: Optional[int] = None
    release_error: Optional[float] = None
    inner_min: Optional[int] = None
    inner_mean: Optional[float] = None
    row_traced: Optional[List[bool]] = None
    below_gamma: Optional[bool] = None
    exceeds_d_lambda: Optional[bool] = None
    realized_sum: Optional[int] = None
    event_rows: Optional[List[int]] = None


Rate = Optional[float]


class WitnessSummary(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    rho_sound: float
    untraced_fraction: float
    delta: float
    epsilon_max: Optional[float] = None


class Summary(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    kind: ExperimentKind
    trials: int
    n: int
    d: int
    k: int
    protocol: str

    # attack kinds
    in_rate_out_sample: Rate = Field(default=None, ge=0, le=1)
    mean_traced_fraction: Rate = Field(default=None, ge=0, le=1)
    row_traced_rate_min: Rate = Field(default=None, ge=0, le=1)
    row_traced_rate_median: Rate = Field(default=None, ge=0, le=1)
    targeted_row_traced_rate: Rate = Field(default=None, ge=0, le=1)
    other_rows_traced_rate: Rate = Field(default=None, ge=0, le=1)
    completeness_fraction: Optional[float] = None
    noisy_completeness_failure_rate: Rate = Field(default=None, ge=0, le=1)
    out_inner_mean: Optional[float] = None
    out_inner_variance: Optional[float] = None
    witness: Optional[WitnessSummary] = None

    # claim-topkbias
    gamma: Optional[float] = None
    q_k_failure_rate: Rate = Field(default=None, ge=0, le=1)
    q_k_failure_bound: Rate = Field(default=None, ge=0, le=1)

    # claim-count-above
    d_lambda: Optional[float] = None
    count_above_violation_rate: Rate = Field(default=None, ge=0, le=1)
    count_above_failure_bound: Rate = Field(default=None, ge=0, le=1)
    count_above_mean: Optional[float] = None
    count_above_expected: Optional[float] = None

    # claim-corr-rows
    corr_rows_realized_sum: Optional[int] = None
    corr_rows_single_rate_max: Rate = Field(default=None, ge=0, le=1)
    corr_rows_joint_rate_max: Rate = Field(default=None, ge=0, le=1)
    corr_rows_single_bound: Rate = Field(default=None, ge=0, le=1)
    corr_rows_joint_bound: Rate = Field(default=None, ge=0, le=1)

    # mechanism-accuracy
    release_error_median: Optional[float] = None
    release_error_p05: Optional[float] = None
    release_error_p95: Optional[float] = None
    release_error_mean: Optional[float] = None
