"""
Lexicographic ranking of k-combinations.

``unrank_combination(r, n, k)`` returns the r-th strictly increasing k-tuple
over ``{0, …, n-1}`` in lexicographic order; ``rank_combination`` inverts
it. Both walk the tuple position by position, skipping whole blocks of
combinations counted with ``math.comb``, so they work for any Python int.
"""

from __future__ import annotations

import math
from typing import Sequence

from metakit.core.errors import BoundsError, ContractError


def count_combinations(pool_size: int, n_way: int) -> int:
    """C(pool_size, n_way)."""
    return math.comb(pool_size, n_way)


def unrank_combination(index: int, pool_size: int, n_way: int) -> tuple[int, ...]:
    """
    Map ``index`` in ``[0, C(pool_size, n_way))`` to its combination.

    Raises:
        BoundsError: index outside the valid range.
    """
    if n_way < 0 or pool_size < 0:
        raise ContractError(f"negative pool or way count: ({pool_size}, {n_way})")
    total = math.comb(pool_size, n_way)
    if not 0 <= index < total:
        raise BoundsError(f"combination index {index} outside [0, {total})")
    combination: list[int] = []
    candidate = 0
    for position in range(n_way):
        remaining = n_way - position - 1
        while True:
            # combinations that start with `candidate` at this position
            block = math.comb(pool_size - candidate - 1, remaining)
            if index < block:
                break
            index -= block
            candidate += 1
        combination.append(candidate)
        candidate += 1
    return tuple(combination)


def rank_combination(combination: Sequence[int], pool_size: int) -> int:
    """Inverse of ``unrank_combination``."""
    n_way = len(combination)
    previous = -1
    rank = 0
    for position, value in enumerate(combination):
        if not previous < value < pool_size:
            raise ContractError(
                f"{tuple(combination)} is not strictly increasing within [0, {pool_size})"
            )
        remaining = n_way - position - 1
        for skipped in range(previous + 1, value):
            rank += math.comb(pool_size - skipped - 1, remaining)
        previous = value
    return rank
