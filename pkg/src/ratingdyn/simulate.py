"""Synthetic rating histories with known dynamics.

Modes
-----
homogeneous
    Continuous-time chain with one generator (rates per year).
regime_switching
    Generator ``generators[r]`` applies from ``switch_days[r - 1]`` onward.
second_order
    Holding times from ``generator``; at a jump, with probability ``p_mem``
    the target continues the direction of the previous jump by one notch
    (falls back to the generator's jump distribution at the scale edges or
    before any jump has happened).
discrete_exact
    Every ``step_days`` each entity moves according to the row of ``matrix``.

Randomness: entity ``i`` draws from PCG64 seeded by
``SeedSequence(seed, spawn_key=(i,))``, so each entity's path depends only on
``(seed, i)`` and generation order is irrelevant.  Continuous jump times (in
days from ``start``) are quantised to ``ceil(x)``; several jumps on one day
collapse to the last one.  Days ``0..horizon_days`` are observed.
"""
from __future__ import annotations

import datetime as dt
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .estimators import YEAR_DAYS, check_generator, check_stochastic
from .ingest import IngestConfig, RatingHistory, history_from_changes

MODES = ("homogeneous", "regime_switching", "second_order", "discrete_exact")


@dataclass(frozen=True)
class SimulationConfig:
    mode: str
    n: int
    entities: int
    horizon_days: int
    seed: int = 0
    start: dt.date = dt.date(2007, 1, 1)
    generator: tuple | None = None
    generators: tuple | None = None
    switch_days: tuple = ()
    p_mem: float = 0.5
    matrix: tuple | None = None
    step_days: int | None = None
    initial: tuple | None = None
    year_days: int = YEAR_DAYS

    def __post_init__(self):
        # freeze nested lists so configs stay hashable and immutable
        for name in ("generator", "generators", "matrix", "initial", "switch_days"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _freeze(v))
        if isinstance(self.start, str):
            object.__setattr__(self, "start", dt.date.fromisoformat(self.start))
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.n < 2 or self.entities < 0 or self.horizon_days < 0:
            raise ValueError("need n >= 2, entities >= 0, horizon_days >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.initial is not None:
            p = np.asarray(self.initial, dtype=float)
            if p.shape != (self.n,) or (p < 0).any() or p.sum() <= 0:
                raise ValueError("initial must be n nonnegative weights")
        if self.mode in ("homogeneous", "second_order"):
            self._check_q(self.generator)
            if not 0 <= self.p_mem <= 1:
                raise ValueError("p_mem must lie in [0, 1]")
        elif self.mode == "regime_switching":
            if not self.generators:
                raise ValueError("regime_switching needs generators")
            for q in self.generators:
                self._check_q(q)
            sw = list(self.switch_days)
            if len(sw) != len(self.generators) - 1:
                raise ValueError("need one switch day per generator after the first")
            if sw != sorted(sw) or any(not 0 < d < self.horizon_days for d in sw):
                raise ValueError("switch days must be increasing and inside the horizon")
        else:
            if self.matrix is None or self.step_days is None or self.step_days <= 0:
                raise ValueError("discrete_exact needs matrix and a positive step_days")
            m = np.asarray(self.matrix, dtype=float)
            if m.shape != (self.n, self.n):
                raise ValueError("matrix must be n x n")
            check_stochastic(m, tol=1e-9)

    def _check_q(self, q):
        if q is None:
            raise ValueError(f"mode {self.mode} needs a generator")
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n, self.n):
            raise ValueError("generator must be n x n")
        check_generator(q, tol=1e-9)

    @property
    def end(self) -> dt.date:
        return self.start + dt.timedelta(days=self.horizon_days)

    def ingest_config(self) -> IngestConfig:
        return IngestConfig(self.start, self.end, self.n)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"] = self.start.isoformat()
        return {k: _thaw(v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown simulation keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "SimulationConfig":
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                return cls.from_dict(tomllib.load(fh))
        return cls.from_dict(json.loads(path.read_text()))


def _freeze(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return tuple(_freeze(x) for x in v)
    return v


def _thaw(v):
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


def entity_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _initial_state(rng: np.random.Generator, n: int, initial) -> int:
    p = np.full(n, 1.0 / n) if initial is None else np.asarray(initial, dtype=float) / sum(initial)
    return int(rng.choice(n, p=p)) + 1


def _regimes(config: SimulationConfig) -> list[tuple[float, float, np.ndarray]]:
    if config.mode == "regime_switching":
        qs = [np.asarray(q, dtype=float) for q in config.generators]
        bounds = [0, *config.switch_days, config.horizon_days]
    else:
        qs = [np.asarray(config.generator, dtype=float)]
        bounds = [0, config.horizon_days]
    return [(float(bounds[i]), float(bounds[i + 1]), qs[i]) for i in range(len(qs))]


def _jump_target(rng, q_row: np.ndarray, state: int) -> int:
    w = q_row.copy()
    w[state - 1] = 0.0
    return int(rng.choice(len(w), p=w / w.sum())) + 1


def _continuous_path(config: SimulationConfig, rng: np.random.Generator) -> list[tuple[int, int]]:
    """``(day, state)`` changes, starting with ``(0, initial)``."""
    n = config.n
    state = _initial_state(rng, n, config.initial)
    changes = {0: state}
    prev_dir = 0
    x = 0.0
    horizon = config.horizon_days
    momentum = config.mode == "second_order"
    for lo, hi, q in _regimes(config):
        x = max(x, lo)
        while x < hi:
            rate = -q[state - 1, state - 1] / config.year_days  # per day
            if rate <= 0:
                break
            x += rng.exponential(1.0 / rate)
            if x >= hi:
                # memoryless: restart the clock under the next regime
                x = hi
                break
            target = None
            if momentum and prev_dir and rng.random() < config.p_mem:
                if 1 <= state + prev_dir <= n:
                    target = state + prev_dir
            if target is None:
                target = _jump_target(rng, q[state - 1], state)
            prev_dir = 1 if target > state else -1
            state = target
            day = math.ceil(x)
            if day <= horizon:
                changes[day] = state
    return sorted(changes.items())


def discrete_states(config: SimulationConfig, indices=None) -> np.ndarray:
    """State of every entity at steps ``0, 1, ...`` for ``discrete_exact`` mode.

    Shape ``(len(indices), steps + 1)`` with ``indices`` defaulting to all
    entities; step ``s`` sits on day ``s * step_days``.
    """
    if config.mode != "discrete_exact":
        raise ValueError("discrete_states needs mode='discrete_exact'")
    m = np.asarray(config.matrix, dtype=float)
    m = m / m.sum(axis=1, keepdims=True)
    steps = config.horizon_days // config.step_days
    indices = range(config.entities) if indices is None else indices
    out = np.zeros((len(indices), steps + 1), dtype=np.int64)
    for row, i in enumerate(indices):
        rng = entity_rng(config.seed, i)
        s = _initial_state(rng, config.n, config.initial)
        out[row, 0] = s
        for j in range(1, steps + 1):
            s = int(rng.choice(config.n, p=m[s - 1])) + 1
            out[row, j] = s
    return out


def entity_id(i: int) -> str:
    return f"E{i:06d}"


def _simulate_range(config: SimulationConfig, lo: int, hi: int) -> list[RatingHistory]:
    end = config.end + dt.timedelta(days=1)
    day = dt.timedelta(days=1)
    if config.mode == "discrete_exact":
        states = discrete_states(config, range(lo, hi))
        return [
            history_from_changes(
                entity_id(i),
                ((config.start + j * config.step_days * day, int(s)) for j, s in enumerate(row)),
                end,
                config.n,
            )
            for i, row in zip(range(lo, hi), states)
        ]
    out = []
    for i in range(lo, hi):
        path = _continuous_path(config, entity_rng(config.seed, i))
        out.append(history_from_changes(entity_id(i), ((config.start + d * day, s) for d, s in path), end, config.n))
    return out


def simulate(config: SimulationConfig, workers: int = 1) -> list[RatingHistory]:
    """Histories for entities ``0..entities-1``; ``workers > 1`` splits them
    into contiguous blocks run in separate processes (same output)."""
    if workers <= 1 or config.entities < 2:
        return _simulate_range(config, 0, config.entities)
    bounds = np.linspace(0, config.entities, min(workers, config.entities) + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_simulate_range, [config] * (len(bounds) - 1), bounds[:-1].tolist(), bounds[1:].tolist())
        return [h for part in parts for h in part]


def birth_death_generator(n: int, up: float, down: float) -> np.ndarray:
    """Tridiagonal generator with one-notch upgrade/downgrade rates (per year)."""
    q = np.zeros((n, n))
    for i in range(n):
        if i + 1 < n:
            q[i, i + 1] = up
        if i > 0:
            q[i, i - 1] = down
        q[i, i] = -q[i].sum()
    return q


def uniform_jump_generator(n: int, rate: float) -> np.ndarray:
    """Leave every state at ``rate`` per year, landing on any other state alike.

    Lumpable under every monotone merge, so coarsening alone adds no
    Markov violation.
    """
    q = np.full((n, n), rate / (n - 1))
    np.fill_diagonal(q, -rate)
    return q


def pairflip_generator(n: int, rate: float, down: bool) -> np.ndarray:
    """Moves inside each bottom-up pair ``(2m - 1, 2m)`` at ``rate`` per year.

    ``down`` sends ``2m -> 2m - 1``, otherwise ``2m - 1 -> 2m``.  These moves
    vanish under pairwise coarsening.
    """
    q = np.zeros((n, n))
    for i in range(1, n + 1):
        if down and i % 2 == 0:
            q[i - 1, i - 2] = rate
        elif not down and i % 2 == 1 and i < n:
            q[i - 1, i] = rate
    np.fill_diagonal(q, -q.sum(axis=1))
    return q
