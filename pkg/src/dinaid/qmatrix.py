"""Q-matrix parsing, validation and the DINA identifiability check.

A Q-matrix is a J x K binary design matrix: ``Q[j, k] == 1`` when item
``j`` requires attribute ``k``. The DINA model attached to ``Q`` is
identifiable exactly when

1. ``Q`` is complete (every unit vector ``e_k`` appears as a row) and every
   attribute is required by at least three items, and
2. after removing one identity row per attribute, the remaining
   sub-matrix ``Q*`` has pairwise distinct columns.

All-zero rows are dropped before either condition is evaluated; they do not
affect identifiability.

Row and column indices reported by the public functions in this module are
1-based, matching the usual notation for items and attributes.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from typing import Iterable, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "QMatrix",
    "IdentifiabilityReport",
    "QMatrixParseError",
    "DegenerateQMatrixError",
    "parse_qmatrix",
    "read_qmatrix",
    "format_qmatrix",
    "strip_zero_rows",
    "find_identity_rows",
    "check_condition1",
    "check_condition2",
    "identifiability_verdict",
    "lexicographic_column_order",
    "q_star",
]


class QMatrixParseError(ValueError):
    """Raised when CSV text cannot be read as a binary matrix."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateQMatrixError(ValueError):
    """Raised when every row of a Q-matrix is zero."""


@dataclass(frozen=True, eq=False)
class QMatrix:
    """Binary item-by-attribute design matrix.

    Parameters
    ----------
    entries : array_like
        J x K array of 0/1 values. Stored as a read-only ``uint8`` array.
    """

    entries: NDArray[np.uint8]

    def __post_init__(self):
        arr = np.array(self.entries)
        if arr.ndim != 2:
            raise ValueError(f"Q-matrix must be 2-dimensional, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"Q-matrix needs J >= 1 and K >= 1, got shape {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("Q-matrix entries must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def J(self) -> int:
        return self.entries.shape[0]

    @property
    def K(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def zero_rows(self) -> NDArray[np.bool_]:
        """Boolean mask of items whose q-vector is all zero."""
        return ~self.entries.any(axis=1)

    def __eq__(self, other):
        if not isinstance(other, QMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.entries, other.entries))

    def __hash__(self):
        return hash((self.shape, self.entries.tobytes()))

    def __repr__(self):
        rows = ";".join("".join(map(str, r)) for r in self.entries)
        return f"QMatrix({self.J}x{self.K}: {rows})"


def _as_qmatrix(Q: QMatrix | ArrayLike) -> QMatrix:
    return Q if isinstance(Q, QMatrix) else QMatrix(np.asarray(Q))


def parse_binary_csv(text: str, what: str = "matrix") -> NDArray[np.uint8]:
    """Parse comma-separated 0/1 lines into a 2-d ``uint8`` array.

    Blank lines (including a trailing newline) are skipped; whitespace around
    tokens is ignored.
    """
    rows: list[list[int]] = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = [t.strip() for t in line.split(",")]
        row = []
        for tok in tokens:
            if tok not in ("0", "1"):
                raise QMatrixParseError(f"malformed token {tok!r} in {what}", lineno)
            row.append(int(tok))
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise QMatrixParseError(
                f"ragged row: expected {width} entries, found {len(row)}", lineno
            )
        rows.append(row)
    if not rows:
        raise QMatrixParseError(f"empty {what}")
    return np.array(rows, dtype=np.uint8)


def parse_qmatrix(text: str) -> QMatrix:
    """Parse a Q-matrix from CSV text (one item per line)."""
    return QMatrix(parse_binary_csv(text, "Q-matrix"))


def read_qmatrix(path) -> QMatrix:
    with open(path, encoding="utf-8") as fh:
        return parse_qmatrix(fh.read())


def format_qmatrix(Q: QMatrix) -> str:
    return "".join(",".join(str(int(v)) for v in row) + "\n" for row in Q.entries)


def strip_zero_rows(Q: QMatrix | ArrayLike) -> tuple[QMatrix, list[int]]:
    """Drop all-zero q-vectors.

    Returns
    -------
    Q_prime : QMatrix
        The nonzero rows of ``Q`` in their original order.
    removed : list of int
        1-based indices of the rows that were removed.

    Raises
    ------
    DegenerateQMatrixError
        If no row of ``Q`` requires any attribute.
    """
    Q = _as_qmatrix(Q)
    zero = Q.zero_rows()
    if zero.all():
        raise DegenerateQMatrixError("all rows of the Q-matrix are zero; no item measures anything")
    removed = [int(j) + 1 for j in np.flatnonzero(zero)]
    if not removed:
        return Q, []
    return QMatrix(Q.entries[~zero]), removed


def _identity_rows0(entries: NDArray) -> list[int] | None:
    J, K = entries.shape
    unit = (entries.sum(axis=1) == 1)
    found: list[int] = []
    for k in range(K):
        hits = np.flatnonzero(unit & (entries[:, k] == 1))
        if hits.size == 0:
            return None
        found.append(int(hits[0]))
    return found


def find_identity_rows(Q: QMatrix | ArrayLike) -> list[int] | None:
    """Locate one row equal to ``e_k`` for every attribute ``k``.

    Returns the smallest 1-based row index for each attribute, ordered by
    attribute, or ``None`` when some ``e_k`` is missing (``Q`` incomplete).
    """
    Q = _as_qmatrix(Q)
    rows = _identity_rows0(Q.entries)
    return None if rows is None else [j + 1 for j in rows]


def check_condition1(Q: QMatrix | ArrayLike) -> tuple[bool, list[int], bool]:
    """Completeness and the three-items-per-attribute requirement.

    Returns ``(complete, attribute_counts, holds)``.
    """
    Q = _as_qmatrix(Q)
    counts = [int(c) for c in Q.entries.sum(axis=0)]
    complete = _identity_rows0(Q.entries) is not None
    return complete, counts, complete and all(c >= 3 for c in counts)


def q_star(Q: QMatrix | ArrayLike, identity_rows: Iterable[int]) -> NDArray[np.uint8]:
    """Rows of ``Q`` left after removing the given (1-based) identity rows."""
    Q = _as_qmatrix(Q)
    drop = np.zeros(Q.J, dtype=bool)
    drop[[j - 1 for j in identity_rows]] = True
    return Q.entries[~drop]


def _duplicate_pairs(qstar: NDArray) -> list[tuple[int, int]]:
    K = qstar.shape[1]
    return [
        (a + 1, b + 1)
        for a, b in itertools.combinations(range(K), 2)
        if np.array_equal(qstar[:, a], qstar[:, b])
    ]


def check_condition2(
    Q: QMatrix | ArrayLike, identity_rows: Iterable[int]
) -> tuple[bool, list[tuple[int, int]]]:
    """Distinct columns of ``Q*``.

    Returns ``(holds, duplicate_column_pairs)`` with 1-based pairs ``(k, k')``,
    ``k < k'``, in lexicographic order. An empty ``Q*`` (``J == K``) fails:
    zero-length columns cannot be told apart.
    """
    qs = q_star(Q, identity_rows)
    pairs = _duplicate_pairs(qs)
    if qs.shape[0] == 0:
        return False, pairs
    return (not pairs), pairs


@dataclass
class IdentifiabilityReport:
    """Outcome of :func:`identifiability_verdict`, with the evidence used.

    Row indices refer to the matrix as given (zero rows included); attribute
    indices are 1-based.
    """

    complete: bool
    identity_rows: list[int] | None
    attribute_counts: list[int]
    condition1_holds: bool
    condition2_holds: bool
    duplicate_column_pairs: list[tuple[int, int]]
    zero_rows: list[int]
    verdict: Literal["identifiable", "not_identifiable"]

    @property
    def identifiable(self) -> bool:
        return self.verdict == "identifiable"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["duplicate_column_pairs"] = [list(p) for p in self.duplicate_column_pairs]
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "IdentifiabilityReport":
        d = dict(d)
        d["duplicate_column_pairs"] = [tuple(p) for p in d["duplicate_column_pairs"]]
        return cls(**d)

    def summary(self) -> str:
        if self.identifiable:
            return "identifiable"
        reasons = []
        if not self.complete:
            reasons.append("Condition 1 fails, Q-matrix is not complete")
        elif not self.condition1_holds:
            low = [k + 1 for k, c in enumerate(self.attribute_counts) if c < 3]
            reasons.append(
                "Condition 1 fails, attributes required by fewer than 3 items: "
                + ",".join(map(str, low))
            )
        if self.complete and not self.condition2_holds:
            if self.duplicate_column_pairs:
                pairs = ",".join(f"({a},{b})" for a, b in self.duplicate_column_pairs)
                reasons.append(f"Condition 2 fails, duplicate columns {pairs}")
            else:
                reasons.append("Condition 2 fails, no items beyond the identity block")
        return "not identifiable: " + "; ".join(reasons)


def identifiability_verdict(Q: QMatrix | ArrayLike) -> IdentifiabilityReport:
    """Decide identifiability of the DINA model for ``Q``.

    Zero rows are stripped first; Conditions 1 and 2 are then evaluated on the
    reduced matrix. Identity row indices in the report are mapped back to the
    original row numbering.

    Raises
    ------
    DegenerateQMatrixError
        If every row of ``Q`` is zero.
    """
    Q = _as_qmatrix(Q)
    Qp, removed = strip_zero_rows(Q)
    kept = np.flatnonzero(~Q.zero_rows())  # 0-based original index of each Q' row

    complete, counts, cond1 = check_condition1(Qp)
    ident = find_identity_rows(Qp)
    if ident is None:
        cond2, pairs = False, []
        ident_orig = None
    else:
        cond2, pairs = check_condition2(Qp, ident)
        ident_orig = [int(kept[j - 1]) + 1 for j in ident]

    return IdentifiabilityReport(
        complete=complete,
        identity_rows=ident_orig,
        attribute_counts=counts,
        condition1_holds=cond1,
        condition2_holds=cond2,
        duplicate_column_pairs=pairs,
        zero_rows=removed,
        verdict="identifiable" if (cond1 and cond2) else "not_identifiable",
    )


def lexicographic_column_order(qstar: ArrayLike) -> tuple[int, ...] | None:
    """Sort the columns of ``Q*`` increasingly in lexicographic order.

    Column ``a`` precedes ``b`` when, at the first row where they differ,
    ``a`` has 0 and ``b`` has 1. Returns the 1-based permutation
    ``(k_1, ..., k_K)`` with ``k_1`` the smallest column, or ``None`` if two
    columns are equal.
    """
    qs = np.asarray(qstar, dtype=np.uint8)
    if qs.ndim != 2:
        raise ValueError("Q* must be 2-dimensional")
    cols = [tuple(int(v) for v in qs[:, k]) for k in range(qs.shape[1])]
    if len(set(cols)) != len(cols):
        return None
    order = sorted(range(len(cols)), key=lambda k: cols[k])
    return tuple(k + 1 for k in order)
