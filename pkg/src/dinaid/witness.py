"""Constructive non-identifiability certificates.

When a Q-matrix is complete with every attribute required by at least three
items, but two columns ``k, k'`` of the lower block coincide, the guessing
parameters of the two identity items and the proportions of the profiles
that differ only in attributes ``k, k'`` can be moved together without
changing the response distribution. The functions here solve for such a
move explicitly and verify it by comparing full moment vectors.

Two constructions are provided:

* :func:`solve_k2_witness` for two attributes: keep ``s``, all other ``g``
  and ``p_11`` fixed, shrink ``p_00`` by a factor ``c`` and solve four
  equations for ``(p_10, p_01, g_1, g_2)``.
* :func:`solve_general_witness` for any ``K``: parameters whose
  proportions satisfy ``p(0,1,a)/p(0,0,a) = u`` and ``p(1,0,a)/p(0,0,a) = v``
  for every setting ``a`` of the remaining attributes; scale every
  ``p(0,0,a)`` by ``rho`` and solve four equations for ``(u', v', g_1, g_2)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from dinaid._order import canonical_order
from dinaid.model import ModelParams
from dinaid.qmatrix import (
    QMatrix,
    _as_qmatrix,
    check_condition1,
    check_condition2,
    find_identity_rows,
    identifiability_verdict,
    strip_zero_rows,
)
from dinaid.tmoments import distribution_distance

__all__ = [
    "WitnessError",
    "UnsupportedPatternError",
    "NotInFamilyError",
    "IdentifiableQMatrixError",
    "InfeasiblePerturbationError",
    "WrongSideError",
    "SolverError",
    "DuplicatePattern",
    "WitnessPair",
    "NewtonResult",
    "damped_newton",
    "detect_duplicate_pattern",
    "solve_k2_witness",
    "solve_general_witness",
    "certify_nonidentifiable",
    "project_to_family",
    "DEFAULT_PERTURBATION",
]

DEFAULT_PERTURBATION = 0.998
ALTERNATE_MARGIN = 1e-6
SOLVER_TOL = 1e-12
MAX_SOLVER_ITERATIONS = 200


class WitnessError(ValueError):
    """Base class for failures to build a witness pair."""


class UnsupportedPatternError(WitnessError):
    """The Q-matrix is outside the scope of the construction."""


class NotInFamilyError(UnsupportedPatternError):
    """Parameters do not have the constant-ratio structure the construction needs."""


class IdentifiableQMatrixError(WitnessError):
    """The Q-matrix is identifiable, so no witness pair exists."""


class InfeasiblePerturbationError(WitnessError):
    """The solved alternate parameters leave the parameter space."""


class WrongSideError(InfeasiblePerturbationError):
    """Solutions only exist for perturbations on the other side of 1."""


class SolverError(WitnessError):
    """Newton iteration did not reach the residual tolerance."""


@dataclass
class NewtonResult:
    x: NDArray[np.float64]
    residual: float
    iterations: int
    converged: bool


def damped_newton(
    fun: Callable[[NDArray], NDArray],
    jac: Callable[[NDArray], NDArray],
    x0,
    tol: float = SOLVER_TOL,
    maxiter: int = MAX_SOLVER_ITERATIONS,
) -> NewtonResult:
    """Newton's method with step halving on residual increase.

    The residual is the max-norm of ``fun(x)``. Iteration stops once it is
    at most ``tol``.
    """
    x = np.array(x0, dtype=float)
    f = np.asarray(fun(x), float)
    res = float(np.max(np.abs(f)))
    for it in range(maxiter):
        if res <= tol:
            return NewtonResult(x, res, it, True)
        try:
            step = np.linalg.solve(jac(x), -f)
        except np.linalg.LinAlgError:
            return NewtonResult(x, res, it, False)
        lam = 1.0
        while True:
            x_new = x + lam * step
            f_new = np.asarray(fun(x_new), float)
            res_new = float(np.max(np.abs(f_new)))
            if res_new < res or lam < 1e-10:
                break
            lam *= 0.5
        if not res_new < res:
            return NewtonResult(x, res, it + 1, False)
        x, f, res = x_new, f_new, res_new
    return NewtonResult(x, res, maxiter, res <= tol)


def _solve_from_identity(fun, jac, x0, c: float) -> NewtonResult:
    """Solve ``fun(x, c) = 0`` given ``fun(x0, 1) = 0``.

    Newton starts at ``x0`` when the Jacobian there is well conditioned.
    At a fold (singular Jacobian) the solution branch is quadratic in the
    null direction ``n``; the start is moved to ``x0 + t n`` with ``t`` from
    the second-order expansion, and both signs are tried.

    Raises
    ------
    InfeasiblePerturbationError
        :class:`WrongSideError` if the expansion shows no real solution on
        this side of ``c = 1``.
    """
    x0 = np.asarray(x0, float)
    if c == 1.0:
        return NewtonResult(x0, float(np.max(np.abs(fun(x0, c)))), 0, True)
    best = NewtonResult(x0, float(np.max(np.abs(fun(x0, c)))), 0, False)
    U, sv, Vt = np.linalg.svd(jac(x0, 1.0))
    if sv[-1] > 1e-8 * sv[0]:
        sol = damped_newton(lambda x: fun(x, c), lambda x: jac(x, c), x0)
        if sol.converged:
            return sol
        best = sol

    n, m = Vt[-1], U[:, -1]
    if n[np.flatnonzero(np.abs(n) > 1e-12)[0]] < 0:
        n = -n
    h = 1e-6
    d_c = (fun(x0, 1.0 + h) - fun(x0, 1.0 - h)) / (2 * h)
    # residual is quadratic in x, so the second difference is exact
    d_nn = fun(x0 + n, 1.0) + fun(x0 - n, 1.0) - 2 * fun(x0, 1.0)
    denom = m @ d_nn
    t2 = -2.0 * (c - 1.0) * (m @ d_c) / denom if abs(denom) > 1e-14 else -1.0
    if t2 <= 0:
        side = "below" if c > 1 else "above"
        raise WrongSideError(
            f"no solution branch near the original parameters for perturbation {c!r}; "
            f"at this fold solutions only exist {side} 1"
        )
    t = np.sqrt(t2)
    for start in (x0 + t * n, x0 - t * n):
        sol = damped_newton(lambda x: fun(x, c), lambda x: jac(x, c), start)
        if sol.converged:
            return sol
        if sol.residual < best.residual:
            best = sol
    return best


@dataclass(frozen=True)
class DuplicatePattern:
    """Where a Q-matrix matches the duplicated-column template.

    Attributes
    ----------
    pair : (int, int)
        1-based attributes ``k < k'`` whose lower-block columns coincide.
    identity_rows : list of int
        1-based row of ``e_k`` for every attribute (original numbering).
    row_permutation : tuple of int
        1-based rows: identity rows in column-permuted attribute order, then
        the remaining rows in their original order.
    column_permutation : tuple of int
        1-based attributes: ``k, k'`` first, then the others.
    """

    pair: tuple[int, int]
    identity_rows: list[int]
    row_permutation: tuple[int, ...]
    column_permutation: tuple[int, ...]

    def apply(self, Q) -> QMatrix:
        Q = _as_qmatrix(Q)
        rows = [j - 1 for j in self.row_permutation]
        cols = [k - 1 for k in self.column_permutation]
        return QMatrix(Q.entries[rows][:, cols])


def detect_duplicate_pattern(Q) -> DuplicatePattern | None:
    """Find the lowest pair of attributes with identical lower-block columns.

    Returns ``None`` when all lower-block columns are distinct.

    Raises
    ------
    UnsupportedPatternError
        If completeness or the three-items-per-attribute requirement fails.
    """
    Q = _as_qmatrix(Q)
    Qp, _ = strip_zero_rows(Q)
    _, counts, cond1 = check_condition1(Qp)
    if not cond1:
        raise UnsupportedPatternError(
            "the construction needs a complete Q-matrix with every attribute required by at least 3 items"
        )
    ident = find_identity_rows(Q)
    holds, pairs = check_condition2(Q, ident)
    if holds:
        return None
    k, kp = pairs[0]
    cols = (k, kp) + tuple(a for a in range(1, Q.K + 1) if a not in (k, kp))
    top = [ident[a - 1] for a in cols]
    rest = [j for j in range(1, Q.J + 1) if j not in set(top)]
    pattern = DuplicatePattern((k, kp), list(ident), tuple(top + rest), cols)

    permuted = pattern.apply(Q).entries
    lower = permuted[Q.K :]
    assert np.array_equal(permuted[: Q.K], np.eye(Q.K, dtype=np.uint8))
    assert np.array_equal(lower[:, 0], lower[:, 1])
    return pattern


@dataclass
class WitnessPair:
    """Two different parameter sets with the same response distribution."""

    original: ModelParams
    alternate: ModelParams
    rho_bar: float
    residual: float
    distribution_gap: float
    attributes: tuple[int, int] = (1, 2)
    method: str = ""
    solver_iterations: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def max_difference(self) -> float:
        a, b = self.original, self.alternate
        return float(max(np.max(np.abs(a.s - b.s)), np.max(np.abs(a.g - b.g)), np.max(np.abs(a.p - b.p))))

    @property
    def is_distinct(self) -> bool:
        return self.max_difference > 1e-6

    def to_dict(self) -> dict:
        return {
            "original": self.original.to_dict(),
            "alternate": self.alternate.to_dict(),
            "rho_bar": self.rho_bar,
            "residual": self.residual,
            "distribution_gap": self.distribution_gap,
            "attributes": list(self.attributes),
            "method": self.method,
            "solver_iterations": self.solver_iterations,
            "max_difference": self.max_difference,
            "notes": list(self.notes),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _pair_profile_indices(K: int, k: int, kp: int):
    """Canonical positions of profiles (0,0,a), (0,1,a), (1,0,a), (1,1,a)
    for every setting ``a`` of the other attributes (0-based ``k``, ``kp``),
    aligned so that entry ``i`` of each array shares the same ``a``."""
    order = canonical_order(K)
    others = [a for a in range(K) if a not in (k, kp)]
    vecs = order.vectors
    rest_key = (vecs[:, others].astype(np.int64) << np.arange(len(others))).sum(axis=1) if others else np.zeros(len(vecs), np.int64)
    out = []
    for bk, bkp in ((0, 0), (0, 1), (1, 0), (1, 1)):
        sel = np.flatnonzero((vecs[:, k] == bk) & (vecs[:, kp] == bkp))
        out.append(sel[np.argsort(rest_key[sel], kind="stable")])
    return tuple(out)


def _check_alternate(Q, alt: ModelParams) -> None:
    if not alt.is_valid(Q, eps=ALTERNATE_MARGIN) or np.any(alt.p < ALTERNATE_MARGIN):
        raise InfeasiblePerturbationError(
            "the solved alternate parameters leave the parameter space; "
            "choose a perturbation closer to 1"
        )


def _require_duplicate(Q) -> DuplicatePattern:
    pattern = detect_duplicate_pattern(Q)
    if pattern is None:
        raise IdentifiableQMatrixError("lower-block columns are distinct; no duplicated pair to exploit")
    return pattern


def solve_k2_witness(Q, params: ModelParams, shrink: float = DEFAULT_PERTURBATION) -> WitnessPair:
    """Two-attribute witness with ``p_00`` scaled by ``shrink``.

    ``s``, the guessing parameters of all non-identity items and ``p_11``
    are kept; ``(p_10, p_01, g_1, g_2)`` (``g_1``, ``g_2`` belonging to the
    identity items) solve the equations matching the joint distribution of
    the two identity items over the profiles other than ``(1,1)``.
    """
    Q = _as_qmatrix(Q)
    if Q.K != 2:
        raise UnsupportedPatternError("solve_k2_witness needs exactly two attributes")
    if not shrink > 0:
        raise ValueError("shrink factor must be positive")
    params.validate(Q)
    pattern = _require_duplicate(Q)
    a, b = pattern.identity_rows[0] - 1, pattern.identity_rows[1] - 1

    s1, s2 = params.s[a], params.s[b]
    g1, g2 = params.g[a], params.g[b]
    p00, p10, p01, p11 = params.p  # canonical order 00, 10, 01, 11
    target = np.array([
        p00 + p10 + p01 + p11,
        g1 * (p00 + p01) + (1 - s1) * (p10 + p11),
        g2 * (p00 + p10) + (1 - s2) * (p01 + p11),
        g1 * g2 * p00 + g1 * (1 - s2) * p01 + (1 - s1) * g2 * p10 + (1 - s1) * (1 - s2) * p11,
    ])

    def fun(x, c):
        q10, q01, h1, h2 = x
        q00 = c * p00
        return np.array([
            q00 + q10 + q01 + p11,
            h1 * (q00 + q01) + (1 - s1) * (q10 + p11),
            h2 * (q00 + q10) + (1 - s2) * (q01 + p11),
            h1 * h2 * q00 + h1 * (1 - s2) * q01 + (1 - s1) * h2 * q10 + (1 - s1) * (1 - s2) * p11,
        ]) - target

    def jac(x, c):
        q10, q01, h1, h2 = x
        q00 = c * p00
        return np.array([
            [1.0, 1.0, 0.0, 0.0],
            [1 - s1, h1, q00 + q01, 0.0],
            [h2, 1 - s2, 0.0, q00 + q10],
            [(1 - s1) * h2, h1 * (1 - s2), h2 * q00 + (1 - s2) * q01, h1 * q00 + (1 - s1) * q10],
        ])

    sol = _solve_from_identity(fun, jac, [p10, p01, g1, g2], float(shrink))
    if not sol.converged:
        raise SolverError(f"Newton iteration stopped at residual {sol.residual:.3e} after {sol.iterations} steps")
    q10, q01, h1, h2 = sol.x
    g_alt = params.g.copy()
    g_alt[a], g_alt[b] = h1, h2
    p_alt = np.array([shrink * p00, q10, q01, p11])
    if np.any(p_alt < 0) or np.any(g_alt < 0) or np.any(g_alt > 1):
        raise InfeasiblePerturbationError("solution has negative proportions or guessing outside [0, 1]; choose a shrink factor closer to 1")
    alt = ModelParams(params.s, g_alt, p_alt / p_alt.sum())
    _check_alternate(Q, alt)
    return WitnessPair(
        original=params,
        alternate=alt,
        rho_bar=float(shrink),
        residual=sol.residual,
        distribution_gap=distribution_distance(Q, params, alt),
        attributes=pattern.pair,
        method="two_attribute",
        solver_iterations=sol.iterations,
    )


def _family_ratios(params: ModelParams, k: int, kp: int, rtol: float = 1e-9):
    i00, i01, i10, i11 = _pair_profile_indices(params.K, k, kp)
    p = params.p
    u = p[i01] / p[i00]
    v = p[i10] / p[i00]
    if not (np.allclose(u, u[0], rtol=rtol, atol=0) and np.allclose(v, v[0], rtol=rtol, atol=0)):
        raise NotInFamilyError(
            "parameters are outside the constant-ratio family: p(0,1,a)/p(0,0,a) and "
            "p(1,0,a)/p(0,0,a) must not depend on the other attributes a "
            "(see project_to_family)"
        )
    return float(u[0]), float(v[0]), (i00, i01, i10, i11)


def project_to_family(Q, params: ModelParams, pair: tuple[int, int] | None = None) -> ModelParams:
    """Nearest-in-spirit member of the constant-ratio family.

    Keeps every ``p(0,0,a)`` and ``p(1,1,a)``, replaces ``p(0,1,a)`` and
    ``p(1,0,a)`` by ``u * p(0,0,a)`` and ``v * p(0,0,a)`` with ``u``, ``v``
    the pooled ratios, and renormalizes. ``pair`` defaults to the duplicated
    pair found in ``Q``.
    """
    Q = _as_qmatrix(Q)
    if pair is None:
        pair = _require_duplicate(Q).pair
    k, kp = pair[0] - 1, pair[1] - 1
    i00, i01, i10, i11 = _pair_profile_indices(params.K, k, kp)
    p = params.p.copy()
    u = p[i01].sum() / p[i00].sum()
    v = p[i10].sum() / p[i00].sum()
    p[i01] = u * p[i00]
    p[i10] = v * p[i00]
    return ModelParams(params.s, params.g, p / p.sum())


def solve_general_witness(Q, params: ModelParams, rho_bar: float = DEFAULT_PERTURBATION) -> WitnessPair:
    """Witness for any ``K`` within the constant-ratio family.

    With ``(k, k')`` the duplicated pair, every ``p(0,0,a)`` is scaled by
    ``rho_bar``, ``p(1,1,a)`` is kept, and the new ratios ``(u', v')``
    together with the guessing parameters of the identity items of ``k`` and
    ``k'`` are solved from four equations.

    Raises
    ------
    NotInFamilyError
        If the proportions are not in the constant-ratio family.
    """
    Q = _as_qmatrix(Q)
    if not rho_bar > 0:
        raise ValueError("rho_bar must be positive")
    params.validate(Q)
    pattern = _require_duplicate(Q)
    k, kp = pattern.pair[0] - 1, pattern.pair[1] - 1
    a, b = pattern.identity_rows[k] - 1, pattern.identity_rows[kp] - 1
    u, v, (i00, i01, i10, i11) = _family_ratios(params, k, kp)

    s1, s2 = params.s[a], params.s[b]
    g1, g2 = params.g[a], params.g[b]
    rho = float(rho_bar)
    target = np.array([
        1 + u + v,
        g1 * (1 + u) + (1 - s1) * v,
        g2 * (1 + v) + (1 - s2) * u,
        g1 * g2 + g1 * (1 - s2) * u + (1 - s1) * g2 * v,
    ])

    def fun(x, rho):
        ub, vb, h1, h2 = x
        return rho * np.array([
            1 + ub + vb,
            h1 * (1 + ub) + (1 - s1) * vb,
            h2 * (1 + vb) + (1 - s2) * ub,
            h1 * h2 + h1 * (1 - s2) * ub + (1 - s1) * h2 * vb,
        ]) - target

    def jac(x, rho):
        ub, vb, h1, h2 = x
        return rho * np.array([
            [1.0, 1.0, 0.0, 0.0],
            [h1, 1 - s1, 1 + ub, 0.0],
            [1 - s2, h2, 0.0, 1 + vb],
            [h1 * (1 - s2), (1 - s1) * h2, h2 + (1 - s2) * ub, h1 + (1 - s1) * vb],
        ])

    sol = _solve_from_identity(fun, jac, [u, v, g1, g2], rho)
    if not sol.converged:
        raise SolverError(f"Newton iteration stopped at residual {sol.residual:.3e} after {sol.iterations} steps")
    ub, vb, h1, h2 = sol.x
    if ub <= 0 or vb <= 0 or not (0 <= h1 <= 1 and 0 <= h2 <= 1):
        raise InfeasiblePerturbationError("solution leaves the parameter space; choose rho_bar closer to 1")

    p = params.p
    p_alt = p.copy()
    p_alt[i00] = rho * p[i00]
    p_alt[i01] = ub * p_alt[i00]
    p_alt[i10] = vb * p_alt[i00]
    p_alt[i11] = p[i11]
    g_alt = params.g.copy()
    g_alt[a], g_alt[b] = h1, h2
    alt = ModelParams(params.s, g_alt, p_alt / p_alt.sum())
    _check_alternate(Q, alt)
    return WitnessPair(
        original=params,
        alternate=alt,
        rho_bar=rho,
        residual=sol.residual,
        distribution_gap=distribution_distance(Q, params, alt),
        attributes=pattern.pair,
        method="ratio_family",
        solver_iterations=sol.iterations,
    )


def certify_nonidentifiable(
    Q, params: ModelParams, perturbation: float = DEFAULT_PERTURBATION, max_retries: int = 12
) -> WitnessPair:
    """Build and verify a witness pair for a non-identifiable Q-matrix.

    Uses :func:`solve_k2_witness` for two attributes and
    :func:`solve_general_witness` otherwise. If the requested perturbation
    pushes the alternate out of the parameter space, the distance to 1 is
    halved up to ``max_retries`` times.

    Raises
    ------
    IdentifiableQMatrixError
        ``Q`` is identifiable, so no witness exists.
    UnsupportedPatternError
        Completeness or the three-item requirement fails, or (``K > 2``) the
        parameters are outside the constant-ratio family.
    """
    Q = _as_qmatrix(Q)
    report = identifiability_verdict(Q)
    if report.identifiable:
        raise IdentifiableQMatrixError("Q is identifiable; no two parameter sets share a response distribution")
    if not report.condition1_holds:
        raise UnsupportedPatternError(
            "the Q-matrix fails completeness or the three-items-per-attribute requirement; "
            "witnesses are only constructed for duplicated lower-block columns"
        )
    solver = solve_k2_witness if Q.K == 2 else solve_general_witness
    c = float(perturbation)
    notes = []
    for attempt in range(max_retries + 1):
        try:
            pair = solver(Q, params, c)
            break
        except InfeasiblePerturbationError as exc:
            if attempt == max_retries or isinstance(exc, WrongSideError):
                raise
            c = 1.0 - (1.0 - c) / 2
            notes.append(f"perturbation moved to {c!r} to stay inside the parameter space")
    pair.notes.extend(notes)
    if not pair.is_distinct:
        raise WitnessError("alternate parameters coincide with the original; use a larger perturbation")
    if pair.residual > 1e-10 or pair.distribution_gap > 1e-9:
        raise WitnessError(
            f"verification failed: residual {pair.residual:.3e}, distribution gap {pair.distribution_gap:.3e}"
        )
    return pair
