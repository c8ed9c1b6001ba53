"""Transition-matrix estimators over a window ``[t - tau, t]``.

* cohort: row-normalised endpoint migration counts
* generator: jump counts over occupancy time, then ``exp(Q * tau)``
* Chapman-Kolmogorov: ordered product of cohort matrices on ``k`` sub-windows

Matrices are plain ``numpy`` arrays; :func:`check_stochastic` and
:func:`check_generator` enforce their invariants.  Time inside a window is
measured in days, intensities in events per year of ``year_days`` days.
"""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Union

import numpy as np

from .expm import expm_pade13
from .ingest import RatingHistory

log = logging.getLogger(__name__)

YEAR_DAYS = 365
ROW_TOL = 1e-12


class EmptyWindowError(ValueError):
    """No entity is rated at the start of the window."""


class NumericalError(ArithmeticError):
    pass


def as_days(tau) -> int:
    if isinstance(tau, dt.timedelta):
        if tau.seconds or tau.microseconds:
            raise ValueError("window length must be a whole number of days")
        return tau.days
    if int(tau) != tau:
        raise ValueError("window length must be a whole number of days")
    return int(tau)


@dataclass(frozen=True, eq=False)
class SegmentTable:
    """Columnar view of a sample of histories (day ordinals, half-open).

    ``prev_state`` is 0 on an entity's first segment, so ``prev_state > 0``
    marks a genuine state change at ``start``.
    """

    n: int
    n_entities: int
    entity: np.ndarray
    start: np.ndarray
    end: np.ndarray
    state: np.ndarray
    prev_state: np.ndarray

    @classmethod
    def from_histories(cls, histories: Sequence[RatingHistory], n: int | None = None) -> "SegmentTable":
        histories = list(histories)
        if n is None:
            if not histories:
                raise ValueError("cannot infer the state count of an empty sample")
            n = histories[0].n_states
        if any(h.n_states != n for h in histories):
            raise ValueError("histories disagree on the number of states")
        rows = [
            (e, s.start.toordinal(), s.end.toordinal(), s.state, h.segments[i - 1].state if i else 0)
            for e, h in enumerate(histories)
            for i, s in enumerate(h.segments)
        ]
        cols = np.array(rows, dtype=np.int64).reshape(-1, 5).T
        return cls(n, len(histories), *cols)

    def states_at(self, day: int) -> np.ndarray:
        """State of every entity on ``day`` (0 where unrated)."""
        out = np.zeros(self.n_entities, dtype=np.int64)
        live = (self.start <= day) & (day < self.end)
        out[self.entity[live]] = self.state[live]
        return out


Sample = Union[SegmentTable, Sequence[RatingHistory]]


def _table(sample: Sample) -> SegmentTable:
    return sample if isinstance(sample, SegmentTable) else SegmentTable.from_histories(sample)


@dataclass(frozen=True, eq=False)
class TransitionCounts:
    n: int
    cohort_pairs: np.ndarray  # (n, n) int, rated at both endpoints
    jump_events: np.ndarray  # (n, n) int, zero diagonal
    occupancy: np.ndarray  # (n,) entity-years
    t: dt.date
    tau_days: int
    year_days: int = YEAR_DAYS

    @property
    def tau_years(self) -> float:
        return self.tau_days / self.year_days


def _pair_counts(frm: np.ndarray, to: np.ndarray, n: int) -> np.ndarray:
    return np.bincount((frm - 1) * n + (to - 1), minlength=n * n).reshape(n, n)


def count_window(sample: Sample, t: dt.date, tau, year_days: int = YEAR_DAYS) -> TransitionCounts:
    """Endpoint pairs, jump events and occupancy over ``[t - tau, t]``.

    Jumps dated ``t - tau < s <= t`` are counted; occupancy integrates rated
    time over ``[t - tau, t)``.
    """
    tau_days = as_days(tau)
    if tau_days <= 0:
        raise ValueError("window length must be positive")
    tab = _table(sample)
    n = tab.n
    b = t.toordinal()
    a = b - tau_days

    at_a = tab.states_at(a)
    if not at_a.any():
        raise EmptyWindowError(f"no rated entity on {dt.date.fromordinal(a)}")
    at_b = tab.states_at(b)
    both = (at_a > 0) & (at_b > 0)
    pairs = _pair_counts(at_a[both], at_b[both], n)

    jumped = (tab.prev_state > 0) & (tab.start > a) & (tab.start <= b)
    jumps = _pair_counts(tab.prev_state[jumped], tab.state[jumped], n)

    overlap = np.clip(np.minimum(tab.end, b) - np.maximum(tab.start, a), 0, None)
    occ_days = np.bincount(tab.state - 1, weights=overlap, minlength=n)[:n]
    return TransitionCounts(n, pairs, jumps, occ_days / year_days, t, tau_days, year_days)


def check_stochastic(m: np.ndarray, tol: float = ROW_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("transition matrix must be square")
    if (m < 0).any() or np.abs(m.sum(axis=1) - 1).max(initial=0) > tol:
        raise ValueError("not a row-stochastic matrix")
    return m


def check_generator(q: np.ndarray, tol: float = ROW_TOL) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("generator must be square")
    off = q - np.diag(np.diag(q))
    scale = max(1.0, np.abs(q).max(initial=0))
    if (off < 0).any() or np.abs(q.sum(axis=1)).max(initial=0) > tol * scale:
        raise ValueError("not a generator matrix (negative rate or nonzero row sum)")
    return q


def cohort_estimate(c: TransitionCounts) -> np.ndarray:
    """Row-normalised endpoint counts; unobserved states get an identity row."""
    pairs = c.cohort_pairs.astype(float)
    rows = pairs.sum(axis=1)
    empty = rows == 0
    if empty.any():
        log.warning("cohort: no entities in states %s at %s - tau; identity rows used",
                    (np.flatnonzero(empty) + 1).tolist(), c.t)
    out = np.eye(c.n)
    out[~empty] = pairs[~empty] / rows[~empty, None]
    return out


def generator_estimate(c: TransitionCounts) -> np.ndarray:
    """Jump counts over occupancy (per year); zero rows where occupancy is 0."""
    q = np.zeros((c.n, c.n))
    seen = c.occupancy > 0
    if not seen.all():
        log.warning("generator: zero occupancy in states %s at %s; zero rows used",
                    (np.flatnonzero(~seen) + 1).tolist(), c.t)
    q[seen] = c.jump_events[seen] / c.occupancy[seen, None]
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def matrix_exponential(q: np.ndarray, s: float = 1.0) -> np.ndarray:
    """``exp(s * q)`` for a generator ``q``, renormalised to exact unit row sums."""
    q = check_generator(q)
    if s < 0:
        raise ValueError("scale must be nonnegative")
    # states with no flow in or out keep exact identity rows; the rest are
    # exponentiated as one block, so unused states never perturb the result
    active = np.flatnonzero(q.any(axis=0) | q.any(axis=1))
    p = np.eye(len(q))
    if active.size:
        p[np.ix_(active, active)] = expm_pade13(s * q[np.ix_(active, active)])
    if np.abs(p.sum(axis=1) - 1).max(initial=0) > 1e-10 or p.min(initial=0) < -1e-10:
        raise NumericalError("matrix exponential lost stochasticity")
    p = np.clip(p, 0.0, None)
    return p / p.sum(axis=1, keepdims=True)


def subwindow_ends(t: dt.date, tau, k: int) -> list[dt.date]:
    """End dates of the ``k`` equal sub-windows of ``[t - tau, t]``, earliest first."""
    tau_days = as_days(tau)
    if k < 1:
        raise ValueError("k must be >= 1")
    if tau_days % k:
        raise ValueError(f"window of {tau_days} days is not divisible into {k} sub-windows")
    step = tau_days // k
    return [t - dt.timedelta(days=(k - i) * step) for i in range(1, k + 1)]


def chapman_kolmogorov_estimate(sample: Sample, t: dt.date, tau, k: int, year_days: int = YEAR_DAYS) -> np.ndarray:
    """Ordered product of cohort matrices over ``k`` non-overlapping sub-windows."""
    ends = subwindow_ends(t, tau, k)
    step = as_days(tau) // k
    tab = _table(sample)
    factors = [cohort_estimate(count_window(tab, e, step, year_days)) for e in ends]
    return reduce(np.matmul, factors)


@dataclass(frozen=True, eq=False)
class WindowEstimates:
    counts: TransitionCounts
    cohort: np.ndarray
    generator: np.ndarray
    generator_transition: np.ndarray
    chapman_kolmogorov: np.ndarray | None


def estimate_window(sample: Sample, t: dt.date, tau, k: int | None, year_days: int = YEAR_DAYS) -> WindowEstimates:
    """All three estimates for one window; ``k=None`` skips the product estimate."""
    tab = _table(sample)
    c = count_window(tab, t, tau, year_days)
    q = generator_estimate(c)
    ck = chapman_kolmogorov_estimate(tab, t, tau, k, year_days) if k else None
    return WindowEstimates(c, cohort_estimate(c), q, matrix_exponential(q, c.tau_years), ck)
