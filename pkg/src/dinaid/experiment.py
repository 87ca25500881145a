"""Monte Carlo parameter-recovery study.

For every sample size ``N`` the study simulates ``replications`` datasets
from a known truth, refits them with multi-start EM and reports block mean
squared errors for ``p``, ``s`` and ``g``. Each replication derives its own
seeds from ``(master seed, N, replication index)``, so any subset of the
study can be rerun in isolation and the outputs do not depend on how work
is scheduled across processes.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from dinaid.em import EMConfig, block_mse, fit
from dinaid.model import ModelParams, simulate
from dinaid.qmatrix import QMatrix, read_qmatrix

__all__ = [
    "ExperimentSpec",
    "ExperimentReport",
    "replication_seeds",
    "run_replication",
    "run_experiment",
    "write_outputs",
    "WORKERS_ENV",
]

WORKERS_ENV = "DINAID_WORKERS"


@dataclass
class ExperimentSpec:
    qmatrix: QMatrix
    truth: ModelParams
    sample_sizes: list[int]
    replications: int
    em: EMConfig = field(default_factory=EMConfig)
    output_dir: str | None = None
    seed: int = 0

    def __post_init__(self):
        sizes = [int(n) for n in self.sample_sizes]
        if not sizes or any(n < 1 for n in sizes):
            raise ValueError("sample sizes must be positive")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("sample sizes must be strictly ascending")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        self.sample_sizes = sizes
        self.truth.validate(self.qmatrix)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | os.PathLike = ".") -> "ExperimentSpec":
        """Build a spec from parsed JSON.

        ``qmatrix`` is a CSV path or a nested list; ``truth`` is a JSON path
        or an inline parameter mapping. Relative paths are resolved against
        ``base_dir``.
        """
        base = Path(base_dir)
        q = d["qmatrix"]
        Q = read_qmatrix(base / q) if isinstance(q, str) else QMatrix(np.array(q))
        t = d["truth"]
        if isinstance(t, str):
            truth = ModelParams.from_json((base / t).read_text(encoding="utf-8"))
        else:
            truth = ModelParams.from_dict(t)
        out = d.get("output_dir")
        if out is not None and not os.path.isabs(out):
            out = str(base / out)
        return cls(
            qmatrix=Q,
            truth=truth,
            sample_sizes=list(d["sample_sizes"]),
            replications=int(d["replications"]),
            em=EMConfig(**d.get("em", {})),
            output_dir=out,
            seed=int(d.get("seed", 0)),
        )

    @classmethod
    def read(cls, path) -> "ExperimentSpec":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)

    def to_dict(self) -> dict:
        """Self-contained echo of the spec (matrix and truth inlined)."""
        return {
            "qmatrix": self.qmatrix.entries.tolist(),
            "truth": self.truth.to_dict(),
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "em": asdict(self.em),
            "seed": self.seed,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def replication_seeds(master: int, N: int, rep: int) -> tuple[int, int]:
    """Independent (simulation, EM) seeds for one replication."""
    state = np.random.SeedSequence([master, N, rep]).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def run_replication(Q: QMatrix, truth: ModelParams, N: int, rep: int, master: int, em: EMConfig) -> dict:
    """Simulate and refit one dataset; never raises."""
    sim_seed, em_seed = replication_seeds(master, N, rep)
    record = {"N": N, "replication": rep, "sim_seed": sim_seed, "em_seed": em_seed}
    try:
        data = simulate(Q, truth, N, sim_seed)
        result = fit(Q, data, EMConfig(em.max_iterations, em.tolerance, em.starts, em_seed, em.clip))
    except Exception as exc:  # recorded, the study carries on
        record.update(converged=False, error=f"{type(exc).__name__}: {exc}")
        return record
    record.update(
        converged=result.converged,
        iterations=result.iterations,
        log_likelihood=result.log_likelihood,
        estimate=result.params.to_dict(),
        error=None,
    )
    return record


def _run_task(args):
    return run_replication(*args)


@dataclass
class ExperimentReport:
    spec: dict
    spec_hash: str
    seed: int
    sample_sizes: list[int]
    mse: dict[int, dict[str, float]]
    n_used: dict[int, int]
    n_failed: dict[int, int]
    converged: dict[int, list[bool]]
    replications: list[dict]
    wall_clock_seconds: float = 0.0
    workers: int = 1

    def table(self) -> dict[str, list[float]]:
        """MSEs laid out with parameter blocks as rows, ``N`` as columns."""
        return {b: [self.mse[n][b] for n in self.sample_sizes] for b in ("p", "s", "g")}

    def to_dict(self) -> dict:
        """Deterministic content only; timing lives in :attr:`wall_clock_seconds`."""
        return {
            "spec": self.spec,
            "spec_hash": self.spec_hash,
            "seed": self.seed,
            "sample_sizes": self.sample_sizes,
            "mse": {str(n): self.mse[n] for n in self.sample_sizes},
            "n_used": {str(n): self.n_used[n] for n in self.sample_sizes},
            "n_failed": {str(n): self.n_failed[n] for n in self.sample_sizes},
            "converged": {str(n): self.converged[n] for n in self.sample_sizes},
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def table_csv(self) -> str:
        lines = ["block," + ",".join(str(n) for n in self.sample_sizes)]
        for block, row in self.table().items():
            lines.append(block + "," + ",".join(f"{v:.6g}" for v in row))
        return "\n".join(lines) + "\n"

    def replications_csv(self) -> str:
        """One line per replication with its estimates, for external analysis."""
        J = len(self.spec["truth"]["s"])
        pkeys = list(self.spec["truth"]["p"])
        head = ["N", "replication", "converged", "iterations", "log_likelihood"]
        head += [f"s{j + 1}" for j in range(J)] + [f"g{j + 1}" for j in range(J)] + [f"p{k}" for k in pkeys]
        lines = [",".join(head)]
        for r in self.replications:
            est = r.get("estimate")
            vals = [str(r["N"]), str(r["replication"]), str(int(bool(r["converged"])))]
            if est is None:
                vals += ["", ""] + [""] * (2 * J + len(pkeys))
            else:
                vals += [str(r["iterations"]), repr(r["log_likelihood"])]
                vals += [repr(v) for v in est["s"]] + [repr(v) for v in est["g"]]
                vals += [repr(est["p"][k]) for k in pkeys]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


def _default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_experiment(spec: ExperimentSpec, workers: int | None = None, progress=None) -> ExperimentReport:
    """Run every (N, replication) cycle and aggregate block MSEs.

    Replications that fail or whose EM run did not converge are excluded
    from the MSEs and counted in ``n_failed``.
    """
    workers = _default_workers() if workers is None else max(1, int(workers))
    tasks = [
        (spec.qmatrix, spec.truth, N, rep, spec.seed, spec.em)
        for N in spec.sample_sizes
        for rep in range(spec.replications)
    ]
    start = time.perf_counter()
    if workers == 1:
        records = []
        for t in tasks:
            records.append(run_replication(*t))
            if progress is not None:
                progress(len(records), len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    elapsed = time.perf_counter() - start
    records.sort(key=lambda r: (r["N"], r["replication"]))

    mse, used, failed, conv = {}, {}, {}, {}
    for N in spec.sample_sizes:
        rows = [r for r in records if r["N"] == N]
        good = [ModelParams.from_dict(r["estimate"]) for r in rows if r["converged"] and r.get("estimate")]
        conv[N] = [bool(r["converged"]) for r in rows]
        used[N] = len(good)
        failed[N] = len(rows) - len(good)
        if good:
            mp, ms, mg = block_mse(good, spec.truth)
            mse[N] = {"p": mp, "s": ms, "g": mg}
        else:
            mse[N] = {"p": float("nan"), "s": float("nan"), "g": float("nan")}

    return ExperimentReport(
        spec=spec.to_dict(),
        spec_hash=spec.digest(),
        seed=spec.seed,
        sample_sizes=list(spec.sample_sizes),
        mse=mse,
        n_used=used,
        n_failed=failed,
        converged=conv,
        replications=records,
        wall_clock_seconds=elapsed,
        workers=workers,
    )


def write_outputs(report: ExperimentReport, out_dir) -> dict[str, Path]:
    """Write ``table.csv``, ``report.json``, ``replications.csv`` and
    ``timing.json``. All but the last are byte-identical across reruns."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "table": out / "table.csv",
        "report": out / "report.json",
        "replications": out / "replications.csv",
        "timing": out / "timing.json",
    }
    paths["table"].write_text(report.table_csv(), encoding="utf-8")
    paths["report"].write_text(report.to_json(indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths["replications"].write_text(report.replications_csv(), encoding="utf-8")
    paths["timing"].write_text(
        json.dumps({"wall_clock_seconds": report.wall_clock_seconds, "workers": report.workers}, indent=2) + "\n",
        encoding="utf-8",
    )
    return paths
