"""Acceptance suite: one pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python tests/test_acceptance.py``.
The Monte Carlo criterion takes a few minutes on one core; set
``DINAID_WORKERS`` to spread replications over more processes.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import (  # noqa: E402
    DUPLICATE_COLUMN_DESIGNS,
    FOUR_ATTRIBUTE_DESIGN,
    IDENTIFIABLE_DESIGNS,
    SIX_ITEM_DESIGN,
    all_matrices,
    brute_force_identifiable,
    random_complete_q,
    uniform_params,
)
from dinaid.catalog import six_item_truth, two_attribute_design, two_attribute_truth  # noqa: E402
from dinaid.em import EMConfig, em_step, fit  # noqa: E402
from dinaid.experiment import ExperimentSpec, run_experiment  # noqa: E402
from dinaid.model import log_likelihood, pattern_probabilities, random_params, simulate  # noqa: E402
from dinaid.qmatrix import QMatrix, identifiability_verdict  # noqa: E402
from dinaid.tmoments import (  # noqa: E402
    canonical_order,
    distribution_distance,
    empirical_gamma,
    generalized_transform,
    moment_vector,
    t_matrix,
)
from dinaid.witness import certify_nonidentifiable  # noqa: E402

RESULTS: dict[str, tuple[bool, str]] = {}

REFERENCE_MSE = {
    "p": [0.0272, 0.0137, 0.0087, 0.0065, 0.0051],
    "s": [0.0613, 0.0335, 0.0221, 0.0174, 0.0131],
    "g": [0.0411, 0.0224, 0.0149, 0.0109, 0.0082],
}
SAMPLE_SIZES = [400, 800, 1200, 1600, 2000]
REPLICATIONS = 300
RELATIVE_TOLERANCE = 0.30


def record(key: str, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {key} {title}: {detail}"
    RESULTS[key] = (ok, line)
    print(line)
    assert ok, line


# ---------------------------------------------------------------- 1


def test_criterion_1_verdict_fidelity():
    cases = [("four_attribute", FOUR_ATTRIBUTE_DESIGN, "identifiable")]
    cases += [(n, q, "identifiable") for n, q in sorted(IDENTIFIABLE_DESIGNS.items())]
    cases += [(n, q, "not_identifiable") for n, q in sorted(DUPLICATE_COLUMN_DESIGNS.items())]
    cases += [("two_attribute", two_attribute_design(), "not_identifiable")]
    wrong = [n for n, q, want in cases if identifiability_verdict(q).verdict != want]
    hits = len(cases) - len(wrong)
    record("1", "verdict fidelity", not wrong and len(cases) == 10, f"{hits}/{len(cases)} verdicts match" + (f", wrong: {wrong}" if wrong else ""))


# ---------------------------------------------------------------- 2


def test_criterion_2_witness_soundness():
    Q, truth = two_attribute_design(), two_attribute_truth()
    pair = certify_nonidentifiable(Q, truth)
    gap = distribution_distance(Q, pair.original, pair.alternate)
    rel = {}
    for N in (200, 100_000):
        data = simulate(Q, truth, N, 2024 + N)
        a = log_likelihood(Q, pair.original, data)
        b = log_likelihood(Q, pair.alternate, data)
        rel[N] = abs(a - b) / abs(a)
    ok = gap <= 1e-9 and pair.is_distinct and all(v <= 1e-8 for v in rel.values())
    detail = (
        f"gap {gap:.2e} (<= 1e-9), max parameter change {pair.max_difference:.4f}, "
        f"relative LL difference {rel[200]:.1e} at N=200 and {rel[100_000]:.1e} at N=1e5 (<= 1e-8)"
    )
    record("2", "witness soundness", ok, detail)


# ---------------------------------------------------------------- 3


def test_criterion_3_table_reproduction():
    spec = ExperimentSpec(
        qmatrix=SIX_ITEM_DESIGN,
        truth=six_item_truth(),
        sample_sizes=SAMPLE_SIZES,
        replications=REPLICATIONS,
        em=EMConfig(starts=8),
        seed=20240601,
    )
    report = run_experiment(spec)
    table = report.table()
    off = []
    for block, ref in REFERENCE_MSE.items():
        for n, got, want in zip(SAMPLE_SIZES, table[block], ref):
            if not abs(got - want) <= RELATIVE_TOLERANCE * want:
                off.append(f"{block}@{n}: {got:.4f} vs {want:.4f}")
    decreasing = all(all(b < a for a, b in zip(row, row[1:])) for row in table.values())
    worst = max(abs(g - w) / w for b in REFERENCE_MSE for g, w in zip(table[b], REFERENCE_MSE[b]))
    cells = " | ".join(f"{b}: " + " ".join(f"{v:.4f}" for v in table[b]) for b in ("p", "s", "g"))
    detail = (
        f"{REPLICATIONS} reps, worst relative deviation {worst:.1%} (<= 30%), "
        f"strictly decreasing: {decreasing}, failed reps: {sum(report.n_failed.values())}; {cells}"
    )
    if off:
        detail += "; outside tolerance: " + ", ".join(off)
    record("3", "recovery table reproduction", not off and decreasing, detail)


# ---------------------------------------------------------------- 4


def test_criterion_4_oracle_equivalences():
    rng = np.random.default_rng(4)
    # (a) moment vector against explicit upper-set sums of pattern probabilities
    worst_a = 0.0
    for J, K in [(3, 1), (5, 2), (7, 3), (10, 3), (10, 4)]:
        Q = random_complete_q(rng, J, K)
        params = random_params(Q, rng)
        R = canonical_order(J).vectors
        probs = pattern_probabilities(Q, params)
        mv = moment_vector(Q, params)
        for i in range(len(R)):
            worst_a = max(worst_a, abs(mv[i] - probs[np.all(R >= R[i], axis=1)].sum()))
    ok_a = worst_a <= 1e-12

    # (b) exhaustive brute-force verdicts
    mismatches, total = 0, 0
    for J in range(1, 7):
        for K in range(1, 4):
            batch = all_matrices(J, K)
            batch = batch[batch.any(axis=(1, 2))]
            expected = brute_force_identifiable(batch)
            got = np.array([identifiability_verdict(q).identifiable for q in batch])
            mismatches += int(np.sum(got != expected))
            total += len(batch)
    ok_b = mismatches == 0

    # (c) EM fixed point against a 0.01 grid on J = 3, K = 1
    from test_em import _grid_mle, _symmetric_data

    Q = QMatrix(np.ones((3, 1), dtype=np.uint8))
    data = _symmetric_data()
    gs, gg, gp = _grid_mle(data)
    est = fit(Q, data, EMConfig(starts=8, seed=3, tolerance=1e-12, max_iterations=20000)).params
    dev_c = max(np.max(np.abs(est.s - gs)), np.max(np.abs(est.g - gg)), abs(est.p[1] - gp))
    ok_c = dev_c <= 0.02

    detail = (
        f"(a) max |moment - upper sum| {worst_a:.1e} (<= 1e-12); "
        f"(b) {total - mismatches}/{total} matrices agree with brute force; "
        f"(c) EM vs grid max deviation {dev_c:.4f} (<= 0.02)"
    )
    record("4", "oracle equivalences", ok_a and ok_b and ok_c, detail)


# ---------------------------------------------------------------- 5


def test_criterion_5_property_suites():
    rng = np.random.default_rng(5)
    checks = {}

    # EM ascent and simplex preservation
    worst_drop, worst_simplex = 0.0, 0.0
    for trial in range(6):
        J, K = int(rng.integers(4, 9)), int(rng.integers(1, 4))
        Q = random_complete_q(rng, J, K)
        truth = random_params(Q, rng)
        data = simulate(Q, truth, 500, trial)
        params = random_params(Q, rng)
        prev = log_likelihood(Q, params, data)
        for _ in range(50):
            params = em_step(Q, params, data)
            ll = log_likelihood(Q, params, data)
            worst_drop = max(worst_drop, prev - ll)
            worst_simplex = max(worst_simplex, abs(params.p.sum() - 1.0), float(-min(params.p.min(), 0.0)))
            prev = ll
    checks["EM ascent"] = (worst_drop <= 1e-10, f"largest drop {max(worst_drop, 0):.1e}")
    checks["simplex"] = (worst_simplex <= 1e-12, f"max deviation {worst_simplex:.1e}")

    # transform invariance on witness pairs
    worst_t = 0.0
    designs = [(two_attribute_design(), two_attribute_truth())]
    designs += [(q, uniform_params(q.J, q.K)) for q in DUPLICATE_COLUMN_DESIGNS.values()]
    for Q, params in designs:
        pair = certify_nonidentifiable(Q, params)
        for _ in range(5):
            theta = rng.uniform(-1, 1, Q.J)
            diff = generalized_transform(Q, pair.original, theta) - generalized_transform(Q, pair.alternate, theta)
            worst_t = max(worst_t, float(np.max(np.abs(diff))))
    checks["transform invariance"] = (worst_t <= 1e-9, f"max gap {worst_t:.1e}")

    # empirical gamma convergence
    data = simulate(SIX_ITEM_DESIGN, six_item_truth(), 100_000, 55)
    gamma_gap = float(np.max(np.abs(empirical_gamma(data) - moment_vector(SIX_ITEM_DESIGN, six_item_truth()))))
    checks["gamma convergence"] = (gamma_gap < 0.01, f"max gap {gamma_gap:.4f}")

    # full column rank
    rank_ok, rank_cases = 0, 0
    for J, K in [(3, 2), (4, 3), (6, 3), (8, 4), (10, 4), (10, 3)]:
        for _ in range(3):
            Q = random_complete_q(rng, J, K)
            params = random_params(Q, rng)
            rank_cases += 1
            rank_ok += int(np.linalg.matrix_rank(t_matrix(Q, params.s, params.g)) == 1 << K)
    checks["full column rank"] = (rank_ok == rank_cases, f"{rank_ok}/{rank_cases}")

    # verdict invariance under row permutation and zero-row padding
    inv_bad, inv_total = 0, 0
    for _ in range(400):
        J, K = int(rng.integers(2, 8)), int(rng.integers(1, 4))
        Q = rng.integers(0, 2, (J, K)).astype(np.uint8)
        if not Q.any():
            continue
        base = identifiability_verdict(Q).verdict
        padded = np.vstack([Q, np.zeros((int(rng.integers(1, 4)), K), np.uint8)])
        inv_total += 1
        inv_bad += int(identifiability_verdict(Q[rng.permutation(J)]).verdict != base)
        inv_bad += int(identifiability_verdict(padded[rng.permutation(len(padded))]).verdict != base)
    checks["verdict invariance"] = (inv_bad == 0, f"{inv_total} matrices, {inv_bad} changes")

    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"{k} {'ok' if v[0] else 'FAILED'} ({v[1]})" for k, v in checks.items())
    record("5", "property suites", ok, detail)


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((n, f) for n, f in globals().items() if n.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
