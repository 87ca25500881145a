"""DINA model: parameters, response probabilities, likelihood and simulation.

Attribute profiles are indexed in the canonical order of
:func:`dinaid.tmoments.canonical_order` (weight first, then support set), so
``p[0]`` is the proportion of the all-zero profile, ``p[1:K+1]`` belong to
the single-attribute profiles ``e_1 .. e_K`` and ``p[-1]`` to the all-ones
profile.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from dinaid._order import canonical_order
from dinaid.qmatrix import QMatrix, _as_qmatrix, parse_binary_csv

__all__ = [
    "INTERIOR_EPS",
    "InvalidParamsError",
    "DegeneratePosteriorError",
    "ModelParams",
    "ResponseDataset",
    "ideal_response",
    "ideal_matrix",
    "item_prob",
    "theta_matrix",
    "response_pattern_prob",
    "pattern_probabilities",
    "log_likelihood",
    "pattern_log_probs",
    "simulate",
    "attribute_posterior",
    "read_params",
    "random_params",
]

INTERIOR_EPS = 1e-9
MAX_EXACT_ITEMS = 25


class InvalidParamsError(ValueError):
    """Parameters violate the DINA parameter-space constraints."""


class DegeneratePosteriorError(ValueError):
    """Every attribute profile has zero posterior weight."""


def _readonly(a: ArrayLike) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Slipping ``s``, guessing ``g`` and profile proportions ``p``.

    The constructor only checks structure (shapes, ranges, ``p`` summing to
    one). Constraints that depend on the Q-matrix are checked by
    :meth:`validate`; use :meth:`build` to construct and validate in one go.
    """

    s: NDArray[np.float64]
    g: NDArray[np.float64]
    p: NDArray[np.float64]

    def __post_init__(self):
        s, g, p = _readonly(self.s), _readonly(self.g), _readonly(self.p)
        if s.ndim != 1 or g.ndim != 1 or p.ndim != 1:
            raise InvalidParamsError("s, g and p must be 1-dimensional")
        if s.size != g.size or s.size == 0:
            raise InvalidParamsError(f"s and g must have the same positive length, got {s.size} and {g.size}")
        K = int(np.log2(p.size)) if p.size else -1
        if p.size == 0 or (1 << K) != p.size:
            raise InvalidParamsError(f"length of p must be a power of two, got {p.size}")
        for name, v in (("s", s), ("g", g), ("p", p)):
            if not np.all(np.isfinite(v)):
                raise InvalidParamsError(f"{name} contains non-finite values")
        if np.any((s < 0) | (s > 1)) or np.any((g < 0) | (g > 1)):
            raise InvalidParamsError("s and g must lie in [0, 1]")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidParamsError("p must be a probability vector")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "p", p)

    @property
    def J(self) -> int:
        return self.s.size

    @property
    def K(self) -> int:
        return int(np.log2(self.p.size))

    @classmethod
    def build(cls, Q, s, g, p, *, interior: bool = True) -> "ModelParams":
        """Construct parameters and validate them against ``Q``."""
        params = cls(s, g, p)
        params.validate(Q, interior=interior)
        return params

    def validate(self, Q, *, interior: bool = True, eps: float = INTERIOR_EPS) -> None:
        """Check the parameter-space constraints for ``Q``.

        With ``interior=True`` (the model's parameter space) every ``p`` is
        positive, and for items with a nonzero q-vector
        ``eps <= s_j, g_j <= 1 - eps`` and ``1 - s_j - g_j >= eps``. With
        ``interior=False`` only the boundary-tolerant checks apply. In both
        modes ``g_j`` must be exactly 0 for all-zero q-vectors.

        Raises
        ------
        InvalidParamsError
        """
        Q = _as_qmatrix(Q)
        if Q.J != self.J or Q.K != self.K:
            raise InvalidParamsError(
                f"parameters are for J={self.J}, K={self.K} but Q is {Q.J}x{Q.K}"
            )
        zero = Q.zero_rows()
        if np.any(self.g[zero] != 0):
            bad = [int(j) + 1 for j in np.flatnonzero(zero & (self.g != 0))]
            raise InvalidParamsError(f"guessing must be 0 for items with an all-zero q-vector: items {bad}")
        if not interior:
            return
        if np.any(self.p <= 0):
            raise InvalidParamsError("every profile proportion must be positive")
        if np.any((self.s < eps) | (self.s > 1 - eps)):
            raise InvalidParamsError("slipping parameters must lie strictly inside (0, 1)")
        nz = ~zero
        gs, ss = self.g[nz], self.s[nz]
        if np.any((gs < eps) | (gs > 1 - eps)):
            raise InvalidParamsError("guessing parameters must lie strictly inside (0, 1)")
        if np.any(1 - ss - gs < eps):
            bad = [int(j) + 1 for j in np.flatnonzero(nz & (1 - self.s - self.g < eps))]
            raise InvalidParamsError(f"need g_j < 1 - s_j; violated for items {bad}")

    def is_valid(self, Q, *, interior: bool = True, eps: float = INTERIOR_EPS) -> bool:
        try:
            self.validate(Q, interior=interior, eps=eps)
        except InvalidParamsError:
            return False
        return True

    def to_dict(self) -> dict:
        keys = canonical_order(self.K).bitstrings()
        return {
            "s": self.s.tolist(),
            "g": self.g.tolist(),
            "p": {k: float(v) for k, v in zip(keys, self.p)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        """Inverse of :meth:`to_dict`. ``p`` may be a bitstring-keyed mapping
        or a list in canonical order."""
        p = d["p"]
        if isinstance(p, dict):
            if not p:
                raise InvalidParamsError("p is empty")
            K = len(next(iter(p)))
            order = canonical_order(K)
            keys = order.bitstrings()
            missing = set(keys) - set(p)
            extra = set(p) - set(keys)
            if missing or extra:
                raise InvalidParamsError(f"p keys must be all {K}-bit profiles; missing {sorted(missing)}, unexpected {sorted(extra)}")
            p = [p[k] for k in keys]
        return cls(d["s"], d["g"], p)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))

    def allclose(self, other: "ModelParams", atol: float = 0.0) -> bool:
        return all(
            a.shape == b.shape and np.allclose(a, b, rtol=0, atol=atol)
            for a, b in ((self.s, other.s), (self.g, other.g), (self.p, other.p))
        )


@dataclass(frozen=True, eq=False)
class ResponseDataset:
    """N x J binary response matrix (one subject per row)."""

    rows: NDArray[np.uint8]

    def __post_init__(self):
        r = np.array(self.rows)
        if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 1:
            raise ValueError(f"responses must be a non-empty 2-d array, got shape {r.shape}")
        if not np.all((r == 0) | (r == 1)):
            raise ValueError("responses must be 0 or 1")
        r = r.astype(np.uint8)
        r.setflags(write=False)
        object.__setattr__(self, "rows", r)

    @property
    def N(self) -> int:
        return self.rows.shape[0]

    @property
    def J(self) -> int:
        return self.rows.shape[1]

    def pattern_counts(self) -> tuple[NDArray[np.uint8], NDArray[np.int64]]:
        """Distinct response patterns and how often each occurs."""
        patterns, counts = np.unique(self.rows, axis=0, return_counts=True)
        return patterns, counts.astype(np.int64)

    def to_csv(self) -> str:
        return "".join(",".join("1" if v else "0" for v in row) + "\n" for row in self.rows)

    @classmethod
    def from_csv(cls, text: str) -> "ResponseDataset":
        return cls(parse_binary_csv(text, "response data"))

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "ResponseDataset":
        with open(path, encoding="utf-8") as fh:
            return cls.from_csv(fh.read())


def ideal_response(q_j: ArrayLike, alpha: ArrayLike) -> int:
    """1 if profile ``alpha`` masters every attribute item ``q_j`` requires."""
    q = np.asarray(q_j).ravel()
    a = np.asarray(alpha).ravel()
    if q.size != a.size:
        raise ValueError(f"q-vector has {q.size} entries but profile has {a.size}")
    return int(np.all(a >= q))


def ideal_matrix(Q) -> NDArray[np.uint8]:
    """J x 2^K matrix of ideal responses, profiles in canonical order."""
    Q = _as_qmatrix(Q)
    profiles = canonical_order(Q.K).vectors
    return np.all(profiles[None, :, :] >= Q.entries[:, None, :], axis=2).astype(np.uint8)


def theta_matrix(Q, params: ModelParams) -> NDArray[np.float64]:
    """J x 2^K matrix of positive-response probabilities."""
    xi = ideal_matrix(Q).astype(bool)
    return np.where(xi, (1.0 - params.s)[:, None], params.g[:, None])


def item_prob(Q, params: ModelParams, j: int, alpha: ArrayLike) -> float:
    """Positive-response probability of item ``j`` (0-based) for ``alpha``."""
    Q = _as_qmatrix(Q)
    if ideal_response(Q.entries[j], alpha):
        return float(1.0 - params.s[j])
    return float(params.g[j])


def _check_dims(Q: QMatrix, params: ModelParams) -> None:
    if Q.J != params.J or Q.K != params.K:
        raise ValueError(f"parameters are for J={params.J}, K={params.K} but Q is {Q.J}x{Q.K}")


def _class_log_kernel(R: NDArray, theta: NDArray) -> NDArray[np.float64]:
    """log P(R_i | alpha) for every row of ``R`` and every profile.

    Exact at boundary values: terms with probability 0 yield ``-inf`` rather
    than ``nan``.
    """
    R = np.asarray(R, dtype=np.float64)
    with np.errstate(divide="ignore"):
        l1 = np.log(theta)
        l0 = np.log1p(-theta)
    f1, f0 = np.isfinite(l1), np.isfinite(l0)
    out = R @ np.where(f1, l1, 0.0) + (1.0 - R) @ np.where(f0, l0, 0.0)
    if not (f1.all() and f0.all()):
        impossible = (R @ (~f1) + (1.0 - R) @ (~f0)) > 0
        out[impossible] = -np.inf
    return out


def _log_p(p: NDArray) -> NDArray[np.float64]:
    with np.errstate(divide="ignore"):
        return np.log(p)


def pattern_log_probs(Q, params: ModelParams, R: ArrayLike) -> NDArray[np.float64]:
    """log P(R = r) for each row ``r`` of ``R``."""
    Q = _as_qmatrix(Q)
    _check_dims(Q, params)
    R = np.atleast_2d(np.asarray(R))
    if R.shape[1] != Q.J:
        raise ValueError(f"response vectors have {R.shape[1]} items, Q has {Q.J}")
    logk = _class_log_kernel(R, theta_matrix(Q, params))
    return logsumexp(logk + _log_p(params.p)[None, :], axis=1)


def response_pattern_prob(Q, params: ModelParams, r: ArrayLike) -> float:
    """Probability of observing response vector ``r``.

    Boundary parameters (``s`` or ``g`` equal to 0 or 1) are accepted.
    """
    Q = _as_qmatrix(Q)
    r = np.asarray(r).ravel()
    if r.size != Q.J:
        raise ValueError(f"response vector has {r.size} items, Q has {Q.J}")
    if Q.J > MAX_EXACT_ITEMS:
        raise ValueError(f"exact evaluation limited to J <= {MAX_EXACT_ITEMS}")
    params.validate(Q, interior=False)
    theta = theta_matrix(Q, params)
    per_class = np.prod(np.where(r[:, None] == 1, theta, 1.0 - theta), axis=0)
    return float(per_class @ params.p)


def pattern_probabilities(Q, params: ModelParams) -> NDArray[np.float64]:
    """Probabilities of all 2^J response patterns, in canonical order."""
    Q = _as_qmatrix(Q)
    _check_dims(Q, params)
    if Q.J > 20:
        raise ValueError("full pattern enumeration limited to J <= 20")
    theta = theta_matrix(Q, params)
    # vec[mask, alpha]: item j's response stored in bit j of mask
    vec = np.ones((1, theta.shape[1]))
    for j in range(Q.J):
        vec = np.concatenate([vec * (1.0 - theta[j]), vec * theta[j]], axis=0)
    probs = vec @ params.p
    return probs[canonical_order(Q.J).masks]


def log_likelihood(Q, params: ModelParams, data: ResponseDataset | ArrayLike) -> float:
    """Sum over subjects of log P(R = R_i); may be ``-inf``."""
    Q = _as_qmatrix(Q)
    params.validate(Q, interior=True)
    rows = data.rows if isinstance(data, ResponseDataset) else np.asarray(data)
    patterns, counts = np.unique(rows, axis=0, return_counts=True)
    logp = pattern_log_probs(Q, params, patterns)
    if np.any(np.isneginf(logp)):
        return float("-inf")
    return float(counts @ logp)


def simulate(Q, params: ModelParams, N: int, seed: int) -> ResponseDataset:
    """Draw ``N`` subjects: profiles from ``p``, then independent responses.

    Boundary parameters are accepted, so ``s = g = 0`` reproduces ideal
    responses exactly. The same ``seed`` always yields the same dataset.
    """
    Q = _as_qmatrix(Q)
    if N < 1:
        raise ValueError("N must be at least 1")
    params.validate(Q, interior=False)
    rng = np.random.default_rng(seed)
    profile = rng.choice(params.p.size, size=N, p=params.p)
    theta = theta_matrix(Q, params)
    u = rng.random((N, Q.J))
    return ResponseDataset((u < theta[:, profile].T).astype(np.uint8))


def attribute_posterior(Q, params: ModelParams, r: ArrayLike) -> NDArray[np.float64]:
    """Posterior distribution over profiles given response vector(s) ``r``.

    ``r`` may be one vector (result has shape ``(2^K,)``) or a 2-d array of
    vectors (result ``(n, 2^K)``).

    Raises
    ------
    DegeneratePosteriorError
        If some response vector has probability zero under ``params``.
    """
    Q = _as_qmatrix(Q)
    _check_dims(Q, params)
    r = np.asarray(r)
    single = r.ndim == 1
    R = np.atleast_2d(r)
    if R.shape[1] != Q.J:
        raise ValueError(f"response vectors have {R.shape[1]} items, Q has {Q.J}")
    params.validate(Q, interior=False)
    logw = _class_log_kernel(R, theta_matrix(Q, params)) + _log_p(params.p)[None, :]
    norm = logsumexp(logw, axis=1, keepdims=True)
    if np.any(np.isneginf(norm)):
        raise DegeneratePosteriorError("response vector has zero probability under these parameters")
    w = np.exp(logw - norm)
    return w[0] if single else w


def read_params(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        return ModelParams.from_json(fh.read())


def random_params(Q, rng: np.random.Generator, low: float = 0.05, high: float = 0.35) -> ModelParams:
    """Interior parameters: Dirichlet(1) proportions, uniform ``s`` and ``g``."""
    Q = _as_qmatrix(Q)
    s = rng.uniform(low, high, Q.J)
    g = rng.uniform(low, high, Q.J)
    g[Q.zero_rows()] = 0.0
    p = rng.dirichlet(np.ones(1 << Q.K))
    return ModelParams(s, g, p)
