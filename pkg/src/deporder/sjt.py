"""Steinhaus-Johnson-Trotter enumeration of permutations.

Consecutive permutations differ by a single swap of adjacent positions,
which lets callers maintain derived quantities incrementally.
"""

from __future__ import annotations

from typing import Iterator

# Largest supported element count: 7! = 5040 permutations.  Callers must
# filter away anything bigger before enumerating.
MAX_N = 7


def sjt_enumerate(n: int) -> Iterator[tuple[tuple[int, ...], int | None]]:
    """Yield all n! permutations of 1..n, starting from the identity.

    Each item is (permutation, swapped) where swapped is the 0-based left
    index of the adjacent pair exchanged to reach this permutation, or None
    for the initial identity.
    """
    if not 1 <= n <= MAX_N:
        raise ValueError(f"element count must be in 1..{MAX_N}, got {n}")
    perm = list(range(1, n + 1))
    direction = [-1] * n
    yield tuple(perm), None
    while True:
        mobile = -1
        for i in range(n):
            j = i + direction[i]
            if 0 <= j < n and perm[j] < perm[i]:
                if mobile < 0 or perm[i] > perm[mobile]:
                    mobile = i
        if mobile < 0:
            return
        i = mobile
        j = i + direction[i]
        perm[i], perm[j] = perm[j], perm[i]
        direction[i], direction[j] = direction[j], direction[i]
        moved = perm[j]
        for k in range(n):
            if perm[k] > moved:
                direction[k] = -direction[k]
        yield tuple(perm), min(i, j)
