"""Shared test utilities: planted instances, brute-force oracles."""

from __future__ import annotations

from itertools import combinations, product

import numpy as np

from sparsepoly import IndexSet, assemble, hyperbolic_cross, polynomial_target
from sparsepoly.multiindex import glex_key, lower_frontier
from sparsepoly.polybasis import BasisSpec, Family, sample_measure


def random_lower_set(d: int, size: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Grow a random lower set of exactly ``size`` indices from the origin."""
    members = {(0,) * d}
    while len(members) < size:
        frontier = sorted(lower_frontier(members, d), key=glex_key)
        members.add(frontier[rng.integers(len(frontier))])
    return sorted(members, key=glex_key)


def planted_system(
    d: int,
    k: int,
    m: int,
    family: str,
    support_size: int,
    seed: int,
    coeff: str = "signs",
):
    """Measurement system for a sparse polynomial supported on a random lower set.

    Returns (system, true_coefficients, support_indices).
    """
    rng = np.random.default_rng(seed)
    basis = BasisSpec(Family(family), d)
    index_set = hyperbolic_cross(d, k, max_cells=None)
    support = random_lower_set(d, support_size, rng)
    pos = index_set.position()
    c = np.zeros(len(index_set))
    for idx in support:
        val = rng.choice([-1.0, 1.0]) if coeff == "signs" else rng.standard_normal()
        c[pos[idx]] = val
    f = polynomial_target(c, index_set, basis)
    points = sample_measure(basis, m, rng)
    system = assemble(f, index_set, basis, points)
    return system, c, support


def brute_force_lower_sets(d: int, max_card: int):
    """All lower subsets of the bounding box (cardinality <= max_card), by filtering.

    Exponential in the box size; only usable for tiny (d, max_card).  Serves as
    the independent oracle for the incremental enumerator.
    """
    from sparsepoly import is_lower

    box = [idx for idx in product(range(max_card), repeat=d)]
    zero = (0,) * d
    found = set()
    for size in range(1, max_card + 1):
        for combo in combinations(box, size):
            if zero in combo and is_lower(IndexSet.build(combo)):
                found.add(tuple(sorted(combo, key=glex_key)))
    return found
