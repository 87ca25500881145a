import itertools
from pathlib import Path

import numpy as np
import pytest

from dinaid.catalog import (
    DUPLICATE_COLUMN_DESIGNS,
    FOUR_ATTRIBUTE_DESIGN,
    IDENTIFIABLE_DESIGNS,
    SIX_ITEM_DESIGN,
    two_attribute_design,
    two_attribute_truth,
)
from dinaid.model import ModelParams, random_params

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def all_patterns(n):
    """Every binary vector of length ``n`` as rows of an array."""
    return np.array(list(itertools.product([0, 1], repeat=n)), dtype=np.uint8).reshape(-1, n)


def random_complete_q(rng, J, K):
    """Identity block followed by random nonzero rows, then shuffled."""
    rows = [np.eye(K, dtype=np.uint8)]
    while sum(len(r) for r in rows) < J:
        row = rng.integers(0, 2, K, dtype=np.uint8)
        if row.any():
            rows.append(row[None])
    Q = np.vstack(rows)
    return Q[rng.permutation(J)]


def brute_force_identifiable(batch):
    """Verdicts for a stack of Q-matrices (shape M x J x K) by trying every
    choice of K rows to move to the top and comparing with ``I_K``.

    Rows below the chosen block are kept in their original order; their order
    cannot change whether two columns are equal. Zero rows are left in place
    since they add the same entry to every column.
    """
    M, J, K = batch.shape
    counts_ok = (batch.sum(axis=1) >= 3).all(axis=1)
    eye = np.eye(K, dtype=np.uint8)
    weights = 1 << np.arange(J, dtype=np.int64)
    ok = np.zeros(M, dtype=bool)
    for top in itertools.permutations(range(J), K):
        rest = [j for j in range(J) if j not in top]
        head_ok = (batch[:, list(top), :] == eye).all(axis=(1, 2))
        if not rest:
            continue
        codes = np.einsum("mjk,j->mk", batch[:, rest, :].astype(np.int64), weights[: len(rest)])
        distinct = np.ones(M, dtype=bool)
        for a, b in itertools.combinations(range(K), 2):
            distinct &= codes[:, a] != codes[:, b]
        ok |= head_ok & distinct
    return ok & counts_ok


def all_matrices(J, K):
    bits = np.array(list(itertools.product([0, 1], repeat=J * K)), dtype=np.uint8)
    return bits.reshape(-1, J, K)


def uniform_params(J, K, s=0.2, g=0.2):
    return ModelParams(np.full(J, s), np.full(J, g), np.full(1 << K, 1.0 / (1 << K)))


__all__ = [
    "DUPLICATE_COLUMN_DESIGNS",
    "FOUR_ATTRIBUTE_DESIGN",
    "IDENTIFIABLE_DESIGNS",
    "SIX_ITEM_DESIGN",
    "all_matrices",
    "all_patterns",
    "brute_force_identifiable",
    "random_complete_q",
    "random_params",
    "two_attribute_design",
    "two_attribute_truth",
    "uniform_params",
]


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance.RESULTS[key][1])
