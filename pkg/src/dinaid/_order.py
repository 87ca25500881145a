from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

MAX_ORDER_DIM = 25


@dataclass(frozen=True, eq=False)
class CanonicalOrder:
    """All binary vectors of length ``n`` in canonical order.

    Vectors are sorted by Hamming weight; within a weight class the support
    sets are in lexicographic order, so for ``n = 3`` the order is
    ``000, 100, 010, 001, 110, 101, 011, 111``.

    Attributes
    ----------
    n : int
    vectors : ndarray of uint8, shape (2**n, n)
        ``vectors[i]`` is the i-th vector.
    masks : ndarray of int64, shape (2**n,)
        Integer encoding of each vector, element ``j`` stored in bit ``j``.
    position : ndarray of int64, shape (2**n,)
        Inverse of ``masks``: ``position[masks[i]] == i``.
    """

    n: int
    vectors: NDArray[np.uint8]
    masks: NDArray[np.int64]
    position: NDArray[np.int64]

    def __len__(self):
        return self.masks.size

    def index_of(self, bits) -> int:
        bits = np.asarray(bits, dtype=np.int64).ravel()
        if bits.size != self.n:
            raise ValueError(f"expected {self.n} bits, got {bits.size}")
        return int(self.position[int((bits << np.arange(self.n)).sum())])

    def bitstrings(self) -> list[str]:
        return ["".join(map(str, v)) for v in self.vectors]


def mask_bits(masks: NDArray, n: int) -> NDArray[np.uint8]:
    return ((masks[:, None] >> np.arange(n)) & 1).astype(np.uint8)


@lru_cache(maxsize=32)
def canonical_order(n: int) -> CanonicalOrder:
    """Canonical ordering of ``{0,1}^n``; cached, arrays are read-only."""
    if n < 0:
        raise ValueError("dimension must be non-negative")
    if n > MAX_ORDER_DIM:
        raise ValueError(f"dimension {n} too large for exhaustive enumeration (max {MAX_ORDER_DIM})")
    masks = np.arange(1 << n, dtype=np.int64)
    bits = mask_bits(masks, n)
    weight = bits.sum(axis=1)
    # Within a weight class, lexicographically smaller support <=> larger
    # value of the bit string read with element 1 as the most significant bit.
    msb_first = (bits.astype(np.int64) << np.arange(n - 1, -1, -1)).sum(axis=1) if n else masks
    order = np.lexsort((-msb_first, weight))
    masks = masks[order]
    position = np.empty_like(masks)
    position[masks] = np.arange(masks.size)
    vectors = bits[order]
    for a in (masks, position, vectors):
        a.setflags(write=False)
    return CanonicalOrder(n=n, vectors=vectors, masks=masks, position=position)
