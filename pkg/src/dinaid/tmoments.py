"""Marginal-moment representation of the DINA response distribution.

The T-matrix has one row per response pattern ``r`` and one column per
attribute profile ``alpha``; its entry is the probability that a subject
with profile ``alpha`` answers every item in ``{j : r_j = 1}`` correctly.
``T p`` therefore lists ``P(R >= r)`` for every pattern and determines the
response distribution one-to-one, which makes it the natural object for
comparing two parameter sets.

Rows and columns both follow :func:`canonical_order`.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from dinaid._order import CanonicalOrder, canonical_order
from dinaid.model import ModelParams, ResponseDataset, ideal_matrix
from dinaid.qmatrix import _as_qmatrix

__all__ = [
    "CanonicalOrder",
    "canonical_order",
    "MAX_MOMENT_ITEMS",
    "t_entry",
    "t_matrix",
    "moment_vector",
    "generalized_moment_vector",
    "generalized_transform",
    "empirical_gamma",
    "distribution_distance",
    "moments_from_pattern_probs",
    "moment_vector_csv",
]

MAX_MOMENT_ITEMS = 20
_CHUNK_ELEMENTS = 1 << 23


def _guard(J: int) -> None:
    if J > MAX_MOMENT_ITEMS:
        raise ValueError(
            f"moment vectors have 2^J entries; J={J} exceeds the limit of {MAX_MOMENT_ITEMS}"
        )


def _item_rows(Q, x: NDArray, y: NDArray) -> NDArray[np.float64]:
    """Rows of the T-matrix for single items: ``1 - x_j`` where the ideal
    response is 1, ``y_j`` elsewhere. ``x``, ``y`` may be arbitrary reals."""
    xi = ideal_matrix(Q).astype(bool)
    return np.where(xi, (1.0 - np.asarray(x, float))[:, None], np.asarray(y, float)[:, None])


def _subset_products(rows: NDArray) -> NDArray[np.float64]:
    """Products over every subset of rows, subsets indexed by bit mask."""
    out = np.ones((1, rows.shape[1]))
    for row in rows:
        out = np.concatenate([out, out * row], axis=0)
    return out


def t_entry(Q, s: ArrayLike, g: ArrayLike, r: ArrayLike, alpha: ArrayLike) -> float:
    """Single T-matrix entry: product of positive-response probabilities over
    the items selected by ``r`` (empty product is 1)."""
    Q = _as_qmatrix(Q)
    r = np.asarray(r).ravel()
    alpha = np.asarray(alpha).ravel()
    if r.size != Q.J or alpha.size != Q.K:
        raise ValueError("pattern or profile length does not match Q")
    s = np.asarray(s, float)
    g = np.asarray(g, float)
    out = 1.0
    for j in np.flatnonzero(r):
        out *= (1.0 - s[j]) if np.all(alpha >= Q.entries[j]) else g[j]
    return float(out)


def t_matrix(Q, s: ArrayLike, g: ArrayLike) -> NDArray[np.float64]:
    """Full 2^J x 2^K T-matrix, generalized to arbitrary real ``s``, ``g``."""
    Q = _as_qmatrix(Q)
    _guard(Q.J)
    full = _subset_products(_item_rows(Q, s, g))
    return full[canonical_order(Q.J).masks]


def generalized_moment_vector(Q, x: ArrayLike, y: ArrayLike, p: ArrayLike) -> NDArray[np.float64]:
    """``T(x, y) p`` for real-valued ``x``, ``y`` (no range restrictions)."""
    Q = _as_qmatrix(Q)
    _guard(Q.J)
    p = np.asarray(p, float)
    rows = _item_rows(Q, x, y)
    n_cols = rows.shape[1]
    step = max(1, _CHUNK_ELEMENTS >> Q.J)
    acc = np.zeros(1 << Q.J)
    for start in range(0, n_cols, step):
        cols = slice(start, start + step)
        acc += _subset_products(rows[:, cols]) @ p[cols]
    return acc[canonical_order(Q.J).masks]


def moment_vector(Q, params: ModelParams) -> NDArray[np.float64]:
    """``P(R >= r)`` for every pattern ``r`` in canonical order."""
    return generalized_moment_vector(Q, params.s, params.g, params.p)


def generalized_transform(Q, params: ModelParams, theta: ArrayLike) -> NDArray[np.float64]:
    """Moment vector after shifting ``s -> s + theta`` and ``g -> g - theta``.

    If two parameter sets share a moment vector, they still share it after
    any such shift.
    """
    theta = np.asarray(theta, float)
    return generalized_moment_vector(Q, params.s + theta, params.g - theta, params.p)


def _superset_sums(f: NDArray, J: int) -> NDArray:
    """``out[m] = sum of f[m'] over all masks m' containing m``."""
    f = f.copy()
    for j in range(J):
        bit = 1 << j
        view = f.reshape(-1, 2, bit)
        view[:, 0, :] += view[:, 1, :]
    return f


def empirical_gamma(data: ResponseDataset | ArrayLike) -> NDArray[np.float64]:
    """Fraction of subjects answering every item of ``r`` correctly, for all
    patterns ``r`` in canonical order."""
    rows = data.rows if isinstance(data, ResponseDataset) else np.asarray(data)
    N, J = rows.shape
    _guard(J)
    masks = (rows.astype(np.int64) << np.arange(J)).sum(axis=1)
    counts = np.bincount(masks, minlength=1 << J).astype(np.float64)
    return _superset_sums(counts, J)[canonical_order(J).masks] / N


def moments_from_pattern_probs(probs: ArrayLike, J: int) -> NDArray[np.float64]:
    """Map pattern probabilities (canonical order) to ``P(R >= r)``."""
    _guard(J)
    order = canonical_order(J)
    by_mask = np.empty(1 << J)
    by_mask[order.masks] = np.asarray(probs, float)
    return _superset_sums(by_mask, J)[order.masks]


def distribution_distance(Q, params_a: ModelParams, params_b: ModelParams) -> float:
    """Largest absolute difference between the two moment vectors.

    Zero exactly when both parameter sets give the same response
    distribution.
    """
    Q = _as_qmatrix(Q)
    for prm in (params_a, params_b):
        if prm.J != Q.J or prm.K != Q.K:
            raise ValueError(f"parameters are for J={prm.J}, K={prm.K} but Q is {Q.J}x{Q.K}")
    return float(np.max(np.abs(moment_vector(Q, params_a) - moment_vector(Q, params_b))))


def moment_vector_csv(vec: ArrayLike, J: int) -> str:
    """``pattern,value`` lines, patterns as bit strings in canonical order."""
    vec = np.asarray(vec, float)
    keys = canonical_order(J).bitstrings()
    if vec.size != len(keys):
        raise ValueError(f"vector has {vec.size} entries, expected {len(keys)}")
    return "pattern,value\n" + "".join(f"{k},{v!r}\n" for k, v in zip(keys, vec.tolist()))
