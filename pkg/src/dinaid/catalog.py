"""Reference Q-matrices and parameter sets.

These are standard designs from the DINA identifiability literature: a few
that satisfy both identifiability conditions, a few that are complete with
three items per attribute yet have duplicated columns outside the identity
block, the two-attribute duplicated-column family, and the six-item design
used for the Monte Carlo consistency study.
"""

from __future__ import annotations

import numpy as np

from dinaid.model import ModelParams
from dinaid.qmatrix import QMatrix


def _q(block, K):
    return QMatrix(np.vstack([np.eye(K, dtype=np.uint8), np.array(block, dtype=np.uint8)]))


# Complete, three items per attribute, distinct columns below the identity block.
FOUR_ATTRIBUTE_DESIGN = _q([[1, 1, 1, 0], [1, 1, 0, 1], [1, 0, 1, 1], [0, 0, 0, 1]], 4)

IDENTIFIABLE_DESIGNS = {
    "three_a": _q([[1, 1, 0], [1, 0, 1], [1, 1, 1], [1, 1, 1]], 3),
    "three_b": _q([[1, 0, 0], [1, 1, 0], [1, 1, 1], [0, 0, 1]], 3),
    "three_c": _q([[1, 0, 0], [1, 1, 0], [1, 1, 1], [1, 1, 1]], 3),
    "four_a": _q([[1, 1, 1, 0], [1, 1, 0, 1], [1, 0, 1, 1], [0, 1, 0, 1]], 4),
}

# Satisfy completeness and the three-item requirement, but two columns of
# the lower block coincide.
DUPLICATE_COLUMN_DESIGNS = {
    "all_ones": _q([[1, 1, 1]] * 4, 3),
    "paired": _q([[1, 1, 0], [1, 1, 0], [0, 0, 1], [0, 0, 1]], 3),
    "nested": _q([[1, 1, 0], [1, 1, 1], [0, 0, 1], [0, 0, 1]], 3),
    "four_attr": _q([[1, 1, 1, 0], [1, 1, 1, 1], [1, 0, 1, 1], [0, 1, 0, 1]], 4),
}

SIX_ITEM_DESIGN = _q([[0, 1, 1], [1, 0, 1], [1, 1, 0]], 3)


def two_attribute_design(J: int = 10, n_zero: int = 0) -> QMatrix:
    """``I_2`` on top, then ``n_zero`` all-zero items, then ``(1, 1)`` items.

    Every two-attribute Q-matrix that is complete and has duplicated lower
    columns has this form up to a row permutation.
    """
    n_both = J - 2 - n_zero
    if n_both < 0:
        raise ValueError("J too small for the requested number of zero rows")
    rows = [np.eye(2, dtype=np.uint8), np.zeros((n_zero, 2), np.uint8), np.ones((n_both, 2), np.uint8)]
    return QMatrix(np.vstack(rows))


def two_attribute_truth(J: int = 10, n_zero: int = 0) -> ModelParams:
    """Proportions ``(p00, p10, p01, p11) = (0.1, 0.3, 0.4, 0.2)``,
    ``s_j = g_j = 0.2`` (``g_j = 0`` on zero rows)."""
    g = np.full(J, 0.2)
    g[2 : 2 + n_zero] = 0.0
    return ModelParams(np.full(J, 0.2), g, [0.1, 0.3, 0.4, 0.2])


def six_item_truth() -> ModelParams:
    """Uniform proportions over the 8 profiles, ``s_j = g_j = 0.2``."""
    return ModelParams(np.full(6, 0.2), np.full(6, 0.2), np.full(8, 0.125))
