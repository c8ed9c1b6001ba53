"""Likelihood-loss distance, normalised delta across state counts, rating
increments, histograms and the rolling driver that assembles time series."""
from __future__ import annotations

import datetime as dt
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .estimators import (
    YEAR_DAYS,
    EmptyWindowError,
    NumericalError,
    SegmentTable,
    TransitionCounts,
    as_days,
    chapman_kolmogorov_estimate,
    cohort_estimate,
    count_window,
    generator_estimate,
    matrix_exponential,
    subwindow_ends,
)
from .ingest import RatingHistory
from .statespace import Leftover, StateSpace, coarsen_histories

GAP = float("nan")

# gap reason codes
EMPTY_SAMPLE = "empty_sample"
NO_ADMISSIBLE = "no_admissible_cells"
NUMERICAL = "numerical_failure"
BASELINE_GAP = "baseline_gap"
UNDEFINED = "undefined"


class NoAdmissibleCellsError(ValueError):
    """Every weighted cell has a log of 0 or 1 in one of the matrices."""


@dataclass(frozen=True)
class DistanceReport:
    value: float
    used_weight: float
    excluded_weight: float


def distance_report(counts, t: np.ndarray, t_other: np.ndarray) -> DistanceReport:
    """Count-weighted mean of ``log T_ij / log T_other_ij``.

    Only cells with positive weight and both probabilities strictly inside
    (0, 1) enter; the weight of the remaining cells is reported as excluded.
    ``counts`` is a :class:`TransitionCounts` (its cohort pairs are used) or a
    plain weight matrix.
    """
    w = np.asarray(counts.cohort_pairs if isinstance(counts, TransitionCounts) else counts, dtype=float)
    t = np.asarray(t, dtype=float)
    t_other = np.asarray(t_other, dtype=float)
    if not w.shape == t.shape == t_other.shape:
        raise ValueError("weights and matrices must share one shape")
    ok = (w > 0) & (t > 0) & (t < 1) & (t_other > 0) & (t_other < 1)
    used = w[ok].sum()
    excluded = w[~ok].sum()
    if not ok.any():
        raise NoAdmissibleCellsError("no admissible cells")
    ratio = np.log(t[ok]) / np.log(t_other[ok])
    return DistanceReport(float((w[ok] * ratio).sum() / used), float(used), float(excluded))


def likelihood_distance(counts, t: np.ndarray, t_other: np.ndarray) -> float:
    return distance_report(counts, t, t_other).value


def delta_across_states(d_15: float, d_n: float) -> float:
    """Relative drop ``(d_15 - d_n) / d_15``; NaN when undefined."""
    if d_15 == 0 or math.isnan(d_15) or math.isnan(d_n):
        return GAP
    return (d_15 - d_n) / d_15


def rating_increments(sample, space: StateSpace, t: dt.date, tau) -> np.ndarray:
    """Label differences ``R(t) - R(t - tau)`` for entities rated at both dates."""
    tab = sample if isinstance(sample, SegmentTable) else SegmentTable.from_histories(sample, space.n)
    if tab.n != space.n:
        raise ValueError("sample and state space disagree on n")
    b = t.toordinal()
    a = b - as_days(tau)
    sa, sb = tab.states_at(a), tab.states_at(b)
    both = (sa > 0) & (sb > 0)
    labels = np.concatenate(([np.nan], space.labels))
    return labels[sb[both]] - labels[sa[both]]


@dataclass(frozen=True)
class IncrementStats:
    t: dt.date | None
    tau_days: int | None
    mean: float
    std: float
    count: int

    @property
    def is_gap(self) -> bool:
        return self.count == 0


def increment_moments(increments: Iterable[float], t: dt.date | None = None, tau=None) -> IncrementStats:
    """Sample mean and population standard deviation; empty input is a gap."""
    x = np.asarray(list(increments), dtype=float)
    tau_days = as_days(tau) if tau is not None else None
    if x.size == 0:
        return IncrementStats(t, tau_days, GAP, GAP, 0)
    return IncrementStats(t, tau_days, float(x.mean()), float(x.std()), int(x.size))


def rating_histogram(sample, space: StateSpace, t: dt.date) -> np.ndarray:
    tab = sample if isinstance(sample, SegmentTable) else SegmentTable.from_histories(sample, space.n)
    s = tab.states_at(t.toordinal())
    return np.bincount(s[s > 0] - 1, minlength=space.n)[: space.n]


@dataclass
class DiagnosticSeries:
    """Values of one metric at one state count on an ordered date grid.

    Gaps carry ``NaN`` and a reason code in ``gaps``; valid points have
    ``None`` there.
    """

    metric: str
    n_states: int
    times: list[dt.date]
    values: list[float]
    gaps: list[str | None]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not len(self.times) == len(self.values) == len(self.gaps):
            raise ValueError("times, values and gaps must align")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")

    def valid(self) -> np.ndarray:
        return np.array([v for v, g in zip(self.values, self.gaps) if g is None], dtype=float)


# metric names
D_GENERATOR = "d_generator"  # d(T, T')
D_CK = "d_ck"  # d(T, T-bar)
EXCLUDED_GENERATOR = "excluded_weight_generator"
EXCLUDED_CK = "excluded_weight_ck"
DELTA_GENERATOR = "delta_generator"  # Delta'
DELTA_CK = "delta_ck"  # Delta-bar
INCREMENT_MEAN = "increment_mean"
INCREMENT_STD = "increment_std"


def _point(report_fn):
    try:
        r = report_fn()
    except EmptyWindowError:
        return (GAP, EMPTY_SAMPLE), (GAP, EMPTY_SAMPLE)
    except NoAdmissibleCellsError:
        return (GAP, NO_ADMISSIBLE), (GAP, NO_ADMISSIBLE)
    except (NumericalError, np.linalg.LinAlgError):
        return (GAP, NUMERICAL), (GAP, NUMERICAL)
    return (r.value, None), (r.excluded_weight, None)


def evaluate_window(tab: SegmentTable, t: dt.date, tau_days: int, k: int, year_days: int = YEAR_DAYS) -> dict:
    """All per-window metrics at one state count; gaps as ``(nan, reason)``."""
    try:
        c = count_window(tab, t, tau_days, year_days)
    except EmptyWindowError:
        gap = (GAP, EMPTY_SAMPLE)
        return {m: gap for m in (D_GENERATOR, D_CK, EXCLUDED_GENERATOR, EXCLUDED_CK, INCREMENT_MEAN, INCREMENT_STD)}
    cohort = cohort_estimate(c)

    def generator():
        return distance_report(c, cohort, matrix_exponential(generator_estimate(c), c.tau_years))

    def ck():
        return distance_report(c, cohort, chapman_kolmogorov_estimate(tab, t, tau_days, k, year_days))

    out = {}
    out[D_GENERATOR], out[EXCLUDED_GENERATOR] = _point(generator)
    out[D_CK], out[EXCLUDED_CK] = _point(ck)
    stats = increment_moments(rating_increments(tab, StateSpace(tab.n), t, tau_days))
    gap = None if not stats.is_gap else EMPTY_SAMPLE
    out[INCREMENT_MEAN] = (stats.mean, gap)
    out[INCREMENT_STD] = (stats.std, gap)
    return out


def _evaluate_grid(args):
    tab, grid, tau_days, k, year_days = args
    return [evaluate_window(tab, t, tau_days, k, year_days) for t in grid]


def rolling_diagnostics(
    histories: Sequence[RatingHistory],
    t_grid: Sequence[dt.date],
    tau,
    k: int,
    state_counts: Sequence[int],
    leftover: Leftover = "top",
    year_days: int = YEAR_DAYS,
    baseline_n: int | None = None,
    workers: int = 1,
) -> list[DiagnosticSeries]:
    """Rolling d(T, T'), d(T, T-bar), increments and Delta for each state count.

    ``baseline_n`` (default: the state count of ``histories``) is the scale
    Delta is measured against; Delta series are emitted only when it is in
    ``state_counts``.  With ``workers > 1`` grid dates are evaluated in
    separate processes (grid split round-robin); results do not depend on
    the worker count.
    """
    histories = list(histories)
    tau_days = as_days(tau)
    subwindow_ends(dt.date(2000, 1, 1), tau_days, k)  # fail fast on indivisible windows
    grid = list(t_grid)
    source_n = histories[0].n_states if histories else max(state_counts)
    baseline_n = source_n if baseline_n is None else baseline_n
    counts = sorted(set(state_counts), reverse=True)
    tables = {
        n: SegmentTable.from_histories(coarsen_histories(histories, n, leftover), n) for n in counts
    }
    chunks = [grid[i::workers] for i in range(workers)] if workers > 1 else [grid]
    jobs = [(tables[n], chunk, tau_days, k, year_days) for n in counts for chunk in chunks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_evaluate_grid, jobs))
    else:
        flat = [_evaluate_grid(j) for j in jobs]
    results = []
    for i in range(len(counts)):
        per_chunk = flat[i * len(chunks):(i + 1) * len(chunks)]
        # undo the round-robin split
        points = [None] * len(grid)
        for c, pts in enumerate(per_chunk):
            points[c::len(chunks)] = pts
        results.append(points)

    meta = {"tau_days": tau_days, "k": k, "year_days": year_days, "leftover": leftover}
    series: list[DiagnosticSeries] = []
    by_key = {}
    for n, points in zip(counts, results):
        for metric in (D_GENERATOR, D_CK, EXCLUDED_GENERATOR, EXCLUDED_CK, INCREMENT_MEAN, INCREMENT_STD):
            s = DiagnosticSeries(
                metric, n, grid,
                [p[metric][0] for p in points],
                [p[metric][1] for p in points],
                dict(meta),
            )
            series.append(s)
            by_key[metric, n] = s

    if baseline_n in tables:
        for d_metric, delta_metric in ((D_GENERATOR, DELTA_GENERATOR), (D_CK, DELTA_CK)):
            base = by_key[d_metric, baseline_n]
            for n in counts:
                if n == baseline_n:
                    continue
                other = by_key[d_metric, n]
                values, gaps = [], []
                for v15, g15, vn, gn in zip(base.values, base.gaps, other.values, other.gaps):
                    value = GAP if g15 or gn else delta_across_states(v15, vn)
                    values.append(value)
                    gaps.append((BASELINE_GAP if g15 else gn) if (g15 or gn) else (UNDEFINED if math.isnan(value) else None))
                series.append(DiagnosticSeries(delta_metric, n, grid, values, gaps, {**meta, "baseline_n": baseline_n}))
    return series


def series_lookup(series: Iterable[DiagnosticSeries]) -> dict[tuple[str, int], DiagnosticSeries]:
    return {(s.metric, s.n_states): s for s in series}


def date_grid(first: dt.date, last: dt.date, step_days: int) -> list[dt.date]:
    if step_days <= 0:
        raise ValueError("grid step must be positive")
    out = []
    d = first
    while d <= last:
        out.append(d)
        d += dt.timedelta(days=step_days)
    return out
