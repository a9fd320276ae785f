# tracing_topk/core/dataset.py
"""
±1 dataset matrices, exact marginals and the lexicographically first top-k.

Integer column sums are the source of truth. Thresholds such as alpha*n and
lambda*n are turned into exact rationals and then into an integer bound before
they are compared with the sums, so ties and strict inequalities resolve the
same way on every platform.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from tracing_topk.core import rng as rngs
from tracing_topk.core.errors import (
    InvalidDimensionError,
    InvalidKError,
    InvalidParameterError,
    InvalidSumError,
    InvalidVectorError,
    ReportError,
)

logger = logging.getLogger(__name__)

Real = Union[int, float, Fraction]


# ---------------------------
# Helpers
# ---------------------------

def as_fraction(value: Real) -> Fraction:
    """
    Exact rational value of an int, float or Fraction. A float is read as its
    shortest decimal repr, so 0.3 means 3/10 rather than the nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidParameterError(f"Expected a finite real, got {value!r}")
        return Fraction(repr(value))
    return Fraction(value)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def check_k(k: int, d: int) -> None:
    if k < 1 or k > d:
        raise InvalidKError(f"k must satisfy 1 <= k <= d={d}, got k={k}")


# ---------------------------
# Domain types
# ---------------------------

@dataclass(frozen=True, eq=False)
class DatasetMatrix:
    """n individuals × d binary attributes, entries in {-1, +1}, with exact column sums."""

    entries: np.ndarray
    col_sums: np.ndarray

    def __post_init__(self):
        if self.entries.ndim != 2 or self.entries.shape[0] < 1 or self.entries.shape[1] < 1:
            raise InvalidDimensionError(f"Dataset must be a non-empty n×d matrix, got shape {self.entries.shape}")
        if self.col_sums.shape != (self.entries.shape[1],):
            raise InvalidDimensionError("col_sums must have one entry per column")

    @classmethod
    def from_entries(cls, entries: Union[np.ndarray, Sequence[Sequence[int]]]) -> "DatasetMatrix":
        raw = np.array(entries, dtype=np.int64)
        if raw.ndim != 2 or raw.size == 0:
            raise InvalidDimensionError(f"Dataset must be a non-empty n×d matrix, got shape {raw.shape}")
        if not np.all(np.abs(raw) == 1):
            raise InvalidVectorError("Every dataset entry must be -1 or +1")
        matrix = raw.astype(np.int8)
        return cls(_frozen(matrix), _frozen(matrix.sum(axis=0, dtype=np.int64)))

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def d(self) -> int:
        return int(self.entries.shape[1])

    def row(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n:
            raise InvalidParameterError(f"Row index {i} out of range [0, {self.n})")
        return self.entries[i]

    def check(self) -> None:
        """Re-verify every invariant; raises InvalidVectorError on the first violation."""
        if not np.all(np.abs(self.entries) == 1):
            raise InvalidVectorError("Dataset holds an entry outside {-1, +1}")
        if not np.array_equal(self.entries.sum(axis=0, dtype=np.int64), self.col_sums):
            raise InvalidVectorError("Stored column sums disagree with the entries")
        if np.any((self.col_sums - self.n) % 2 != 0):
            raise InvalidVectorError("A column sum has the wrong parity")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DatasetMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MarginalVector:
    """Column means q_j = sums[j] / n, kept as exact integer numerators."""

    n: int
    sums: np.ndarray

    @property
    def d(self) -> int:
        return int(self.sums.shape[0])

    def value(self, j: int) -> Fraction:
        return Fraction(int(self.sums[j]), self.n)

    def values(self) -> List[Fraction]:
        return [Fraction(int(s), self.n) for s in self.sums]

    def order(self) -> np.ndarray:
        """The lexicographically first permutation putting the marginals in descending order."""
        return np.argsort(-self.sums, kind="stable")

    def sorted_values(self) -> List[Fraction]:
        return [Fraction(int(self.sums[j]), self.n) for j in self.order()]

    def kth_sum(self, k: int) -> int:
        check_k(k, self.d)
        return int(-np.partition(-self.sums, k - 1)[k - 1])

    def kth(self, k: int) -> Fraction:
        return Fraction(self.kth_sum(k), self.n)


@dataclass(frozen=True)
class TopKVector:
    """Indicator of exactly k selected columns out of d, stored as sorted indices."""

    d: int
    selected: Tuple[int, ...]

    def __post_init__(self):
        chosen = tuple(sorted(int(j) for j in self.selected))
        if not chosen:
            raise InvalidVectorError("A top-k vector selects at least one column")
        if len(set(chosen)) != len(chosen):
            raise InvalidVectorError(f"Selected columns must be distinct, got {chosen}")
        if chosen[0] < 0 or chosen[-1] >= self.d:
            raise InvalidVectorError(f"Selected columns must lie in [0, {self.d})")
        object.__setattr__(self, "selected", chosen)

    @property
    def k(self) -> int:
        return len(self.selected)

    def indices(self) -> np.ndarray:
        return np.fromiter(self.selected, dtype=np.intp, count=self.k)

    def indicator(self) -> np.ndarray:
        t = np.zeros(self.d, dtype=np.int8)
        t[self.indices()] = 1
        return t

    @classmethod
    def from_indicator(cls, t: Iterable[int]) -> "TopKVector":
        arr = np.asarray(list(t), dtype=np.int64)
        if not np.all((arr == 0) | (arr == 1)):
            raise InvalidVectorError("Indicator entries must be 0 or 1")
        return cls(int(arr.shape[0]), tuple(int(j) for j in np.flatnonzero(arr)))


@dataclass(frozen=True, eq=False)
class FixedSumColumn:
    n: int
    target_sum: int
    values: np.ndarray


# ---------------------------
# Generation
# ---------------------------

def uniform_matrix(n: int, d: int, rng: np.random.Generator) -> DatasetMatrix:
    """Uniform ±1 matrix drawn from an existing stream."""
    if n < 1 or d < 1:
        raise InvalidDimensionError(f"n and d must be at least 1, got n={n}, d={d}")
    bits = rng.integers(0, 2, size=(n, d), dtype=np.int8)
    entries = (bits << 1) - 1
    return DatasetMatrix(_frozen(entries), _frozen(entries.sum(axis=0, dtype=np.int64)))


def generate_uniform(n: int, d: int, seed: int) -> DatasetMatrix:
    return uniform_matrix(n, d, rngs.generator(seed))


def _check_fixed_sum(n: int, s: int) -> None:
    if n < 1:
        raise InvalidDimensionError(f"Column length must be at least 1, got {n}")
    if abs(s) > n or (n - s) % 2 != 0:
        raise InvalidSumError(f"No ±1 column of length {n} sums to {s}")


def fixed_sum_column(n: int, s: int, rng: np.random.Generator) -> FixedSumColumn:
    _check_fixed_sum(n, s)
    plus = (n + s) // 2
    base = np.full(n, -1, dtype=np.int8)
    base[:plus] = 1
    return FixedSumColumn(n=n, target_sum=s, values=_frozen(rng.permutation(base)))


def generate_fixed_sum_column(n: int, s: int, seed: int) -> FixedSumColumn:
    """Uniformly random arrangement of (n+s)/2 entries +1 and (n-s)/2 entries -1."""
    return fixed_sum_column(n, s, rngs.generator(seed))


def fixed_sum_matrix(n: int, k: int, s: int, rng: np.random.Generator) -> DatasetMatrix:
    """k independent fixed-sum columns of length n, every column summing to s."""
    _check_fixed_sum(n, s)
    if k < 1:
        raise InvalidDimensionError(f"Need at least one column, got {k}")
    base = np.full((k, n), -1, dtype=np.int8)
    base[:, : (n + s) // 2] = 1
    entries = np.ascontiguousarray(rng.permuted(base, axis=1).T)
    return DatasetMatrix(_frozen(entries), _frozen(np.full(k, s, dtype=np.int64)))


# ---------------------------
# Marginals and top-k
# ---------------------------

def marginals(X: DatasetMatrix) -> MarginalVector:
    return MarginalVector(n=X.n, sums=X.col_sums)


def top_k_from_sums(sums: np.ndarray, k: int) -> TopKVector:
    d = int(sums.shape[0])
    check_k(k, d)
    order = np.argsort(-sums, kind="stable")[:k]
    return TopKVector(d, tuple(int(j) for j in order))


def exact_top_k(X: DatasetMatrix, k: int) -> TopKVector:
    """First k columns under the ordering (-column_sum, column_index)."""
    return top_k_from_sums(X.col_sums, k)


def alpha_floor_sum(mv: MarginalVector, k: int, alpha: Real) -> int:
    """Smallest integer column sum whose marginal is >= q_(k) - alpha."""
    return math.ceil(Fraction(mv.kth_sum(k)) - as_fraction(alpha) * mv.n)


def validate_alpha_accurate(X: DatasetMatrix, k: int, alpha: Real, t_hat: TopKVector) -> bool:
    check_k(k, X.d)
    if t_hat.d != X.d or t_hat.k != k:
        raise InvalidVectorError(
            f"Expected a {k}-of-{X.d} vector, got {t_hat.k} of {t_hat.d}"
        )
    if isinstance(alpha, float) and math.isinf(alpha) and alpha > 0:
        return True
    if as_fraction(alpha) < 0:
        raise InvalidParameterError(f"alpha must be non-negative, got {alpha}")
    floor_sum = alpha_floor_sum(marginals(X), k, alpha)
    return bool(np.all(X.col_sums[t_hat.indices()] >= floor_sum))


def count_sums_above(sums: np.ndarray, n: int, lam: Real) -> int:
    # s > lam*n  <=>  s > floor(lam*n) for integer s
    bound = math.floor(as_fraction(lam) * n)
    return int(np.count_nonzero(sums > bound))


def count_above(X: DatasetMatrix, lam: Real) -> int:
    """Number of columns with q_j strictly above lam."""
    return count_sums_above(X.col_sums, X.n, lam)


# ---------------------------
# Text format
# ---------------------------

def format_dataset_text(X: DatasetMatrix) -> str:
    lines = [f"{X.n} {X.d}"]
    for row in X.entries:
        lines.append(" ".join("+1" if v > 0 else "-1" for v in row))
    return "\n".join(lines) + "\n"


def parse_dataset_text(text: str) -> DatasetMatrix:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise InvalidDimensionError("Empty dataset text")
    header = lines[0].split()
    if len(header) != 2 or not all(tok.isdigit() for tok in header):
        raise InvalidDimensionError(f"Header must be 'n d', got {lines[0]!r}")
    n, d = int(header[0]), int(header[1])
    if n < 1 or d < 1:
        raise InvalidDimensionError(f"n and d must be at least 1, got n={n}, d={d}")
    body = lines[1:]
    if len(body) != n:
        raise InvalidDimensionError(f"Header declares {n} rows, found {len(body)}")

    token_values = {"+1": 1, "-1": -1}
    rows = []
    for lineno, line in enumerate(body, start=2):
        tokens = line.split()
        if len(tokens) != d:
            raise InvalidDimensionError(f"Line {lineno}: expected {d} tokens, found {len(tokens)}")
        try:
            rows.append([token_values[tok] for tok in tokens])
        except KeyError as e:
            raise InvalidVectorError(f"Line {lineno}: invalid token {e.args[0]!r}") from e
    return DatasetMatrix.from_entries(rows)


def write_dataset_text(X: DatasetMatrix, path: Union[str, Path]) -> None:
    try:
        Path(path).write_text(format_dataset_text(X), encoding="utf-8")
    except OSError as e:
        raise ReportError(path, e.strerror or str(e)) from e
    logger.info("Wrote %dx%d dataset to %s", X.n, X.d, path)


def read_dataset_text(path: Union[str, Path]) -> DatasetMatrix:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ReportError(path, e.strerror or str(e)) from e
    return parse_dataset_text(text)
