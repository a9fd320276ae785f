"""
Shared fixtures for the test suite.
"""
from typing import Optional, Sequence

import numpy as np
import pytest

from tracing_topk.core.dataset import DatasetMatrix


def matrix_with_sums(n: int, sums: Sequence[int], first_row: Optional[Sequence[int]] = None) -> DatasetMatrix:
    """
    Deterministic n×d matrix with the given column sums. When first_row is given,
    row 0 takes those values and the remaining rows make up the sums.
    """
    columns = []
    for j, s in enumerate(sums):
        plus = (n + s) // 2
        assert (n + s) % 2 == 0 and 0 <= plus <= n, f"infeasible sum {s} for n={n}"
        if first_row is None or first_row[j] == 1:
            col = [1] * plus + [-1] * (n - plus)
        else:
            col = [-1] + [1] * plus + [-1] * (n - 1 - plus)
        columns.append(col)
    return DatasetMatrix.from_entries(np.array(columns, dtype=np.int64).T)


@pytest.fixture
def make_matrix():
    return matrix_with_sums


@pytest.fixture
def q_matrix():
    """n=20, q = (0.6, 0.5, 0.4, 0.1)."""
    return matrix_with_sums(20, [12, 10, 8, 2])
