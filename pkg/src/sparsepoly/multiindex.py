"""Multi-index combinatorics: lower sets, hyperbolic crosses, intrinsic weights.

A multi-index is a plain ``tuple`` of ``d`` nonnegative ints.  Index sets keep
their members in graded-lexicographic order (sort key ``(prod(i_j + 1), i)``),
which makes every downstream matrix and CSV reproducible.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

MultiIndex = tuple[int, ...]

#: Default cap on the memory-guard predictor for materialized index sets.
DEFAULT_MAX_CELLS = 10_000_000

CHEBYSHEV = "chebyshev"
LEGENDRE = "legendre"


class GuardExceeded(RuntimeError):
    """An enumeration or materialization guard was hit."""


def family_name(basis) -> str:
    """Normalize a basis argument (string, enum, or BasisSpec) to a family name."""
    fam = getattr(basis, "family", basis)
    fam = str(getattr(fam, "value", fam)).lower()
    if fam not in (CHEBYSHEV, LEGENDRE):
        raise ValueError(f"unknown basis family: {basis!r}")
    return fam


def degree_product(index: MultiIndex) -> int:
    """The hyperbolic-cross weight prod_j (i_j + 1) of a multi-index."""
    p = 1
    for i in index:
        p *= i + 1
    return p


def glex_key(index: MultiIndex) -> tuple[int, MultiIndex]:
    return degree_product(index), index


def _check_index(index: Sequence[int], d: int | None = None) -> MultiIndex:
    tup = tuple(int(i) for i in index)
    if d is not None and len(tup) != d:
        raise ValueError(f"index {tup} has dimension {len(tup)}, expected {d}")
    if not tup or any(i < 0 for i in tup):
        raise ValueError(f"invalid multi-index {tup}: need d >= 1 nonnegative entries")
    return tup


@dataclass(frozen=True)
class IndexSet:
    """An ordered, duplicate-free collection of multi-indices of dimension d."""

    dim: int
    indices: tuple[MultiIndex, ...]

    @classmethod
    def build(cls, indices: Iterable[Sequence[int]], dim: int | None = None) -> "IndexSet":
        """Validate, deduplicate and canonically order ``indices``."""
        items = [tuple(int(i) for i in idx) for idx in indices]
        if not items:
            raise ValueError("index set must be nonempty")
        d = dim if dim is not None else len(items[0])
        items = [_check_index(idx, d) for idx in items]
        uniq = sorted(set(items), key=glex_key)
        if len(uniq) != len(items):
            raise ValueError("duplicate multi-indices in index set")
        return cls(d, tuple(uniq))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.indices)

    def __contains__(self, index) -> bool:
        return tuple(index) in set(self.indices)

    def position(self) -> dict[MultiIndex, int]:
        """Map each index to its column position."""
        return {idx: j for j, idx in enumerate(self.indices)}

    def as_array(self) -> np.ndarray:
        """(n, d) int array in canonical order."""
        return np.asarray(self.indices, dtype=np.int64).reshape(len(self), self.dim)

    def to_json(self) -> str:
        return json.dumps({"d": self.dim, "indices": [list(i) for i in self.indices]})

    @classmethod
    def from_json(cls, text: str) -> "IndexSet":
        doc = json.loads(text)
        return cls.build(doc["indices"], dim=doc["d"])


def is_lower(indices: Iterable[Sequence[int]]) -> bool:
    """True iff the set contains every coordinatewise-dominated index.

    It suffices to check the immediate predecessors ``i - e_j``: domination is
    the transitive closure of single-coordinate decrements.
    """
    items = [tuple(int(v) for v in idx) for idx in indices]
    if isinstance(indices, IndexSet):
        d = indices.dim
    else:
        if not items:
            raise ValueError("empty index set")
        d = len(items[0])
    if any(len(i) != d for i in items):
        raise ValueError("dimension mismatch among multi-indices")
    members = set(items)
    for idx in members:
        for j in range(d):
            if idx[j] > 0:
                pred = idx[:j] + (idx[j] - 1,) + idx[j + 1 :]
                if pred not in members:
                    return False
    return True


def hc_cardinality(d: int, k: int) -> int:
    """Exact cardinality of the order-k hyperbolic cross, without materializing it."""
    if d < 1 or k < 1:
        raise ValueError("need d >= 1 and k >= 1")
    cache: dict[tuple[int, int], int] = {}

    def count(dd: int, budget: int) -> int:
        if dd == 0:
            return 1
        key = (dd, budget)
        hit = cache.get(key)
        if hit is not None:
            return hit
        total, t = 0, 1
        while t <= budget:
            total += count(dd - 1, budget // t)
            t += 1
        cache[key] = total
        return total

    return count(d, k)


def hc_cardinality_bound(d: int, k: int) -> int:
    """Closed-form upper bound min(2 k^3 4^d, e^2 k^(2 + log2 d)), rounded up.

    Used as the memory-guard predictor; saturates instead of overflowing.
    """
    if d < 1 or k < 1:
        raise ValueError("need d >= 1 and k >= 1")
    try:
        a = 2.0 * k**3 * 4.0**d
        b = math.e**2 * float(k) ** (2.0 + math.log2(d))
        bound = min(a, b)
    except OverflowError:
        return sys.maxsize
    if not math.isfinite(bound) or bound >= sys.maxsize:
        return sys.maxsize
    return max(1, math.ceil(bound))


def hyperbolic_cross(d: int, k: int, *, max_cells: int | None = DEFAULT_MAX_CELLS) -> IndexSet:
    """The index set { i : prod_j (i_j + 1) <= k }, canonically ordered.

    ``max_cells`` caps the memory-guard predictor ``hc_cardinality_bound``;
    pass ``None`` to override the guard for large but legitimate sets.
    """
    if d < 1 or k < 1:
        raise ValueError("need d >= 1 and k >= 1")
    if max_cells is not None:
        bound = hc_cardinality_bound(d, k)
        if bound > max_cells:
            raise GuardExceeded(
                f"predicted cardinality bound {bound} for (d={d}, k={k}) exceeds "
                f"cap {max_cells}; pass max_cells=None to override"
            )
    out: list[MultiIndex] = []
    idx = [0] * d

    def extend(j: int, prod: int) -> None:
        if j == d:
            out.append(tuple(idx))
            return
        t = 0
        while prod * (t + 1) <= k:
            idx[j] = t
            extend(j + 1, prod * (t + 1))
            t += 1
        idx[j] = 0

    extend(0, 1)
    out.sort(key=glex_key)
    return IndexSet(d, tuple(out))


def intrinsic_weight(index: Sequence[int], basis) -> float:
    """Sup norm of the orthonormal tensor basis function with this index.

    Chebyshev: 2^(||i||_0 / 2); Legendre: prod_j sqrt(2 i_j + 1).
    """
    idx = _check_index(index)
    fam = family_name(basis)
    if fam == CHEBYSHEV:
        nnz = sum(1 for i in idx if i != 0)
        return float(2.0 ** (nnz / 2.0))
    return float(np.sqrt(np.prod([2.0 * i + 1.0 for i in idx])))


def intrinsic_weights(index_set: IndexSet, basis) -> np.ndarray:
    """Vector of intrinsic weights aligned with the canonical order of the set."""
    arr = index_set.as_array()
    fam = family_name(basis)
    if fam == CHEBYSHEV:
        return np.sqrt(2.0) ** (arr != 0).sum(axis=1)
    return np.sqrt(np.prod(2.0 * arr + 1.0, axis=1))


def weighted_cardinality(index_set: IndexSet, weights: np.ndarray) -> float:
    """Sum of squared weights over the set; weights must align with the set."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] != len(index_set):
        raise ValueError(
            f"weight vector of length {w.shape} does not align with index set of size {len(index_set)}"
        )
    return float(np.sum(w * w))


def lower_frontier(members: set[MultiIndex], d: int) -> set[MultiIndex]:
    """Indices outside the set whose addition keeps the set lower."""
    out: set[MultiIndex] = set()
    for idx in members:
        for j in range(d):
            cand = idx[:j] + (idx[j] + 1,) + idx[j + 1 :]
            if cand in members or cand in out:
                continue
            admissible = True
            for l in range(d):
                if cand[l] > 0:
                    pred = cand[:l] + (cand[l] - 1,) + cand[l + 1 :]
                    if pred not in members:
                        admissible = False
                        break
            if admissible:
                out.add(cand)
    return out


def enumerate_lower_sets(
    d: int, max_cardinality: int, *, max_sets: int = 1_000_000
) -> Iterator[IndexSet]:
    """Yield every lower set of cardinality <= max_cardinality exactly once.

    Sets grow by appending frontier indices in increasing graded-lex order, so
    each lower set is produced from its unique glex-sorted prefix chain and no
    deduplication pass is needed.
    """
    if d < 1 or max_cardinality < 1:
        raise ValueError("need d >= 1 and max_cardinality >= 1")
    zero = (0,) * d
    count = 0

    def grow(chain: list[MultiIndex], members: set[MultiIndex]) -> Iterator[IndexSet]:
        nonlocal count
        count += 1
        if count > max_sets:
            raise GuardExceeded(
                f"lower-set enumeration exceeded {max_sets} sets for (d={d}, k={max_cardinality})"
            )
        yield IndexSet(d, tuple(chain))
        if len(chain) == max_cardinality:
            return
        last = glex_key(chain[-1])
        for cand in sorted(lower_frontier(members, d), key=glex_key):
            if glex_key(cand) > last:
                members.add(cand)
                chain.append(cand)
                yield from grow(chain, members)
                chain.pop()
                members.remove(cand)

    yield from grow([zero], {zero})


def max_lower_weighted_cardinality(
    d: int, k: int, basis, mode: str = "brute_force", *, max_sets: int = 1_000_000
) -> float:
    """Largest weighted cardinality over lower sets of cardinality <= k.

    ``brute_force`` enumerates every lower set; ``upper_bound`` returns the
    closed form k^gamma with gamma = log3/log2 (Chebyshev) or 2 (Legendre).
    """
    fam = family_name(basis)
    if mode == "upper_bound":
        gamma = math.log(3.0) / math.log(2.0) if fam == CHEBYSHEV else 2.0
        return float(k) ** gamma
    if mode != "brute_force":
        raise ValueError(f"unknown mode {mode!r}")
    best = 0.0
    for s in enumerate_lower_sets(d, k, max_sets=max_sets):
        w = intrinsic_weights(s, fam)
        best = max(best, float(np.sum(w * w)))
    return best
