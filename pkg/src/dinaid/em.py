"""Maximum-likelihood estimation of DINA parameters by EM.

Responses are compressed to distinct patterns with counts before fitting,
which makes each iteration cost O(#patterns * 2^K * J) regardless of N.
Several random starts are advanced together as one batch; every start
follows exactly the trajectory it would follow on its own.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp

from dinaid.model import INTERIOR_EPS, ModelParams, ResponseDataset, ideal_matrix
from dinaid.qmatrix import _as_qmatrix, identifiability_verdict

__all__ = [
    "EMConfig",
    "EMResult",
    "EmptyClassWarning",
    "em_step",
    "fit",
    "block_mse",
    "initial_params",
]


class EmptyClassWarning(RuntimeWarning):
    """An M-step had no posterior mass on one ideal-response class of an item."""


@dataclass(frozen=True)
class EMConfig:
    """Settings for :func:`fit`.

    ``tolerance`` is a threshold on the relative log-likelihood improvement
    between consecutive iterations; ``clip`` keeps every ``s_j`` and ``g_j``
    inside ``[clip, 1 - clip]``.
    """

    max_iterations: int = 2000
    tolerance: float = 1e-8
    starts: int = 8
    seed: int = 0
    clip: float = 1e-4

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.starts < 1:
            raise ValueError("starts must be at least 1")
        if not 0 < self.clip < 0.5:
            raise ValueError("clip must lie in (0, 0.5)")


@dataclass
class EMResult:
    params: ModelParams
    log_likelihood: float
    iterations: int
    converged: bool
    start_index: int
    start_log_likelihoods: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "start_index": self.start_index,
            "start_log_likelihoods": list(self.start_log_likelihoods),
            "warnings": list(self.warnings),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "EMResult":
        d = dict(d)
        d["params"] = ModelParams.from_dict(d["params"])
        return cls(**d)


class _Problem:
    """Compressed data and design shared by all EM iterations."""

    def __init__(self, Q, data: ResponseDataset | NDArray):
        self.Q = _as_qmatrix(Q)
        rows = data.rows if isinstance(data, ResponseDataset) else np.asarray(data)
        if rows.ndim != 2 or rows.shape[1] != self.Q.J:
            raise ValueError(f"data has shape {rows.shape}, Q has J={self.Q.J} items")
        patterns, counts = np.unique(rows, axis=0, return_counts=True)
        self.U = patterns.astype(np.float64)
        self.c = counts.astype(np.float64)
        self.N = float(self.c.sum())
        self.xi = ideal_matrix(self.Q).astype(np.float64)  # (J, C)
        self.xi_bool = self.xi.astype(bool)
        self.zero = self.Q.zero_rows()

    def e_step(self, s, g, p):
        """Posterior weights (times counts) and log-likelihood per start.

        ``s``, ``g`` have shape (S, J), ``p`` has shape (S, C).
        """
        theta = np.where(self.xi_bool[None], 1.0 - s[:, :, None], g[:, :, None])
        with np.errstate(divide="ignore"):
            l1 = np.log(theta)
            l0 = np.log1p(-theta)
            logp = np.log(p)
        # (S, U, C)
        logw = np.matmul(self.U[None], l1) + np.matmul(1.0 - self.U[None], l0) + logp[:, None, :]
        lse = logsumexp(logw, axis=2)
        ll = lse @ self.c
        w = np.exp(logw - lse[:, :, None]) * self.c[None, :, None]
        return w, ll

    def m_step(self, w, s, g, clip):
        p = w.sum(axis=1) / self.N
        tiny = np.finfo(float).tiny
        if np.any(p < tiny):
            p = np.maximum(p, tiny)
        p = p / p.sum(axis=1, keepdims=True)

        m1 = np.matmul(w, self.xi.T)  # (S, U, J) posterior mass with ideal response 1
        m0 = self.c[None, :, None] - m1
        den1 = m1.sum(axis=1)
        den0 = m0.sum(axis=1)
        num_s = np.einsum("suj,uj->sj", m1, 1.0 - self.U)
        num_g = np.einsum("suj,uj->sj", m0, self.U)

        floor = 1e-12 * self.N
        ok1 = den1 > floor
        ok0 = (den0 > floor) & ~self.zero[None, :]
        new_s = np.where(ok1, num_s / np.where(ok1, den1, 1.0), s)
        new_g = np.where(ok0, num_g / np.where(ok0, den0, 1.0), g)
        new_s = np.clip(new_s, clip, 1.0 - clip)
        new_g = np.clip(new_g, clip, 1.0 - clip)
        new_g[:, self.zero] = 0.0
        empty = (~ok1) | ((~ok0) & ~self.zero[None, :])
        return new_s, new_g, p, empty


def em_step(Q, params: ModelParams, data: ResponseDataset | NDArray, clip: float = 1e-4) -> ModelParams:
    """One EM update of ``(s, g, p)``.

    E-step: posterior weights over profiles for every subject. M-step:
    ``p`` is the average posterior; ``s_j`` is the posterior-weighted error
    rate among subjects whose ideal response to item ``j`` is 1 and ``g_j``
    the success rate among those whose ideal response is 0. ``g_j`` stays 0
    for items with an all-zero q-vector. Updates are clipped to
    ``[clip, 1 - clip]``.

    If an item has no posterior mass on one of its ideal-response classes,
    the corresponding parameter keeps its previous (clipped) value and an
    :class:`EmptyClassWarning` is issued.
    """
    prob = _Problem(Q, data)
    params.validate(prob.Q, interior=False)
    s, g, p = params.s[None], params.g[None], params.p[None]
    w, _ = prob.e_step(s, g, p)
    s, g, p, empty = prob.m_step(w, s, g, clip)
    if empty.any():
        items = [int(j) + 1 for j in np.flatnonzero(empty[0])]
        warnings.warn(f"no posterior mass for an ideal-response class of items {items}", EmptyClassWarning, stacklevel=2)
    return ModelParams(s[0], g[0], p[0])


def initial_params(Q, seed: int, start: int) -> ModelParams:
    """Random starting point for start number ``start``.

    ``p`` ~ Dirichlet(1); ``s_j``, ``g_j`` ~ Uniform(0.05, 0.35).
    """
    Q = _as_qmatrix(Q)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(start,)))
    p = rng.dirichlet(np.ones(1 << Q.K))
    s = rng.uniform(0.05, 0.35, Q.J)
    g = rng.uniform(0.05, 0.35, Q.J)
    g[Q.zero_rows()] = 0.0
    return ModelParams(s, g, p)


def fit(Q, data: ResponseDataset | NDArray, config: EMConfig = EMConfig()) -> EMResult:
    """Multi-start EM; returns the best terminal log-likelihood.

    Starts whose final parameters violate ``g_j < 1 - s_j`` are only chosen
    when no start satisfies it; in that case ``converged`` is reported as
    False and a warning is attached. The result is a deterministic function
    of ``(Q, data, config)``.
    """
    prob = _Problem(Q, data)
    notes: list[str] = []
    try:
        report = identifiability_verdict(prob.Q)
        if not report.identifiable:
            notes.append("Q-matrix is not identifiable: " + report.summary() + "; estimates are not unique")
    except ValueError as exc:
        notes.append(f"identifiability check failed: {exc}")

    inits = [initial_params(prob.Q, config.seed, i) for i in range(config.starts)]
    s = np.stack([q.s for q in inits])
    g = np.stack([q.g for q in inits])
    p = np.stack([q.p for q in inits])
    S = config.starts

    iterations = np.zeros(S, dtype=int)
    converged = np.zeros(S, dtype=bool)
    active = np.ones(S, dtype=bool)
    ll_prev = np.full(S, np.nan)
    empty_any = np.zeros(prob.Q.J, dtype=bool)

    for _ in range(config.max_iterations):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        w, ll = prob.e_step(s[idx], g[idx], p[idx])
        prev = ll_prev[idx]
        have_prev = ~np.isnan(prev)
        rel = np.where(have_prev, (ll - np.where(have_prev, prev, 0.0)) / np.abs(np.where(have_prev, prev, 1.0)), np.inf)
        done = have_prev & (rel < config.tolerance)
        converged[idx[done]] = True
        active[idx[done]] = False

        keep = ~done
        upd = idx[keep]
        if upd.size:
            ns, ng, np_, empty = prob.m_step(w[keep], s[upd], g[upd], config.clip)
            s[upd], g[upd], p[upd] = ns, ng, np_
            empty_any |= empty.any(axis=0)
            iterations[upd] += 1
            ll_prev[upd] = ll[keep]

    _, final_ll = prob.e_step(s, g, p)
    results = [ModelParams(s[i], g[i], p[i]) for i in range(S)]
    admissible = np.array([r.is_valid(prob.Q, eps=INTERIOR_EPS) for r in results])

    pool = np.flatnonzero(admissible) if admissible.any() else np.arange(S)
    best = int(pool[np.argmax(final_ll[pool])])
    ok = bool(converged[best])
    if not admissible[best]:
        ok = False
        notes.append("no start satisfies g_j < 1 - s_j for every item; returned estimate is outside the parameter space")
    if empty_any.any():
        items = [int(j) + 1 for j in np.flatnonzero(empty_any)]
        notes.append(f"empty ideal-response class during M-step for items {items}")

    return EMResult(
        params=results[best],
        log_likelihood=float(final_ll[best]),
        iterations=int(iterations[best]),
        converged=ok,
        start_index=best,
        start_log_likelihoods=[float(v) for v in final_ll],
        warnings=notes,
    )


def block_mse(estimates: list[ModelParams], truth: ModelParams) -> tuple[float, float, float]:
    """Mean over replications of the per-block sum of squared errors.

    Returns ``(mse_p, mse_s, mse_g)``.
    """
    if not estimates:
        raise ValueError("need at least one estimate")
    sq = np.zeros(3)
    for est in estimates:
        if est.p.shape != truth.p.shape or est.s.shape != truth.s.shape:
            raise ValueError("estimate dimensions do not match the truth")
        sq += [
            np.sum((est.p - truth.p) ** 2),
            np.sum((est.s - truth.s) ** 2),
            np.sum((est.g - truth.g) ** 2),
        ]
    mse = sq / len(estimates)
    return float(mse[0]), float(mse[1]), float(mse[2])
