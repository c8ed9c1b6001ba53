"""Ordered rating state sets, numeric labels and pairwise coarsening."""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Literal

import numpy as np

from .ingest import RatingHistory, Segment

Leftover = Literal["top", "bottom"]


@dataclass(frozen=True)
class StateSpace:
    """``n`` ordered states labelled ``(2k - 1) / (2n)`` for ``k = 1..n``."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"a state space needs n >= 2, got {self.n}")

    @property
    def labels(self) -> np.ndarray:
        k = np.arange(1, self.n + 1)
        return (2 * k - 1) / (2 * self.n)

    def label(self, state: int) -> float:
        return (2 * state - 1) / (2 * self.n)


def make_state_space(n: int) -> StateSpace:
    return StateSpace(n)


@dataclass(frozen=True)
class CoarseningMap:
    """Monotone surjection ``{1..source_n} -> {1..target_n}``.

    ``assignment[i - 1]`` is the target state of source state ``i``.
    """

    source_n: int
    target_n: int
    assignment: tuple[int, ...]

    def __post_init__(self):
        a = self.assignment
        if len(a) != self.source_n:
            raise ValueError("assignment length must equal source_n")
        if any(y < x for x, y in zip(a, a[1:])):
            raise ValueError("assignment must be monotone non-decreasing")
        if set(a) != set(range(1, self.target_n + 1)):
            raise ValueError("assignment must be onto 1..target_n")

    def __call__(self, state: int) -> int:
        if not 1 <= state <= self.source_n:
            raise ValueError(f"state {state} outside 1..{self.source_n}")
        return self.assignment[state - 1]

    def then(self, other: "CoarseningMap") -> "CoarseningMap":
        """Apply ``self`` first, then ``other``."""
        if other.source_n != self.target_n:
            raise ValueError("maps do not chain")
        return CoarseningMap(self.source_n, other.target_n, tuple(other(x) for x in self.assignment))

    def as_array(self) -> np.ndarray:
        """Lookup table indexed by source state (index 0 maps to 0)."""
        return np.array((0,) + self.assignment, dtype=np.int64)


def identity_map(n: int) -> CoarseningMap:
    return CoarseningMap(n, n, tuple(range(1, n + 1)))


def pairwise_coarsen(n: int, leftover: Leftover = "top") -> CoarseningMap:
    """Merge adjacent states pairwise starting from the low (default) end.

    For odd ``n`` the unpaired state is the highest one (``leftover="top"``)
    or the lowest one (``leftover="bottom"``).
    """
    if n < 3:
        raise ValueError(f"pairwise coarsening needs n >= 3, got {n}")
    if leftover == "top" or n % 2 == 0:
        assignment = tuple(i // 2 + 1 for i in range(n))
    elif leftover == "bottom":
        assignment = (1,) + tuple((i + 1) // 2 + 1 for i in range(1, n))
    else:
        raise ValueError(f"leftover must be 'top' or 'bottom', got {leftover!r}")
    return CoarseningMap(n, (n + 1) // 2, assignment)


def coarsening_chain(source_n: int, target_n: int, leftover: Leftover = "top") -> CoarseningMap:
    """Compose pairwise merges from ``source_n`` down to ``target_n`` (e.g. 15 -> 8 -> 4 -> 2)."""
    maps = []
    n = source_n
    while n > target_n:
        m = pairwise_coarsen(n, leftover)
        maps.append(m)
        n = m.target_n
    if n != target_n:
        raise ValueError(f"{target_n} states are not reachable from {source_n} by pairwise merging")
    return reduce(CoarseningMap.then, maps, identity_map(source_n))


def coarsen_history(h: RatingHistory, m: CoarseningMap) -> RatingHistory:
    if h.n_states != m.source_n:
        raise ValueError(f"{h.entity_id}: history has {h.n_states} states, map expects {m.source_n}")
    segs: list[Segment] = []
    for s in h.segments:
        state = m(s.state)
        if segs and segs[-1].state == state:
            segs[-1] = Segment(segs[-1].start, s.end, state)
        else:
            segs.append(Segment(s.start, s.end, state))
    return RatingHistory(h.entity_id, tuple(segs), m.target_n)


def coarsen_histories(histories, target_n: int, leftover: Leftover = "top") -> list[RatingHistory]:
    histories = list(histories)
    if not histories:
        return []
    source_n = histories[0].n_states
    if target_n == source_n:
        return histories
    m = coarsening_chain(source_n, target_n, leftover)
    return [coarsen_history(h, m) for h in histories]
