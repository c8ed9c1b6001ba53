"""Rating-history ingestion.

Histories are stored as half-open day segments ``[start, end)``.  An entity
that is still rated when the study closes gets ``end = study_end + 1 day`` so
that the closing date itself is observed; a withdrawal on day ``w`` gives
``end = w``.
"""
from __future__ import annotations

import bisect
import csv
import datetime as dt
import gzip
import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

GRADES: tuple[str, ...] = tuple(
    f"{letter}{suffix}" for letter in "EDCBA" for suffix in ("-", "", "+")
)
"""The 15 grade symbols ordered from worst (``E-``) to best (``A+``)."""

WITHDRAWN = "WR"
HEADER = ("entity_id", "date", "grade")

DEFAULT_START = dt.date(2007, 1, 1)
DEFAULT_END = dt.date(2013, 1, 1)

# accept the unicode minus some extracts use
_ALIASES = {g.replace("-", "−"): g for g in GRADES if g.endswith("-")}


class IngestError(ValueError):
    """Raised for malformed or inconsistent rating files."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def grade_to_index(grade: str) -> int:
    """Map a grade symbol to its state index, ``E-`` -> 1 ... ``A+`` -> 15."""
    symbol = _ALIASES.get(grade.strip(), grade.strip())
    try:
        return GRADES.index(symbol) + 1
    except ValueError:
        raise IngestError(f"unknown grade symbol {grade!r}") from None


def index_to_grade(index: int) -> str:
    if not 1 <= index <= len(GRADES):
        raise IngestError(f"state index {index} outside 1..{len(GRADES)}")
    return GRADES[index - 1]


@dataclass(frozen=True)
class RatingEvent:
    entity_id: str
    date: dt.date
    grade: str


@dataclass(frozen=True)
class Segment:
    start: dt.date
    end: dt.date  # exclusive
    state: int


@dataclass(frozen=True)
class RatingHistory:
    """Piecewise-constant rating path of one entity.

    Segments are contiguous, chronologically ordered and consecutive
    segments never share a state.
    """

    entity_id: str
    segments: tuple[Segment, ...]
    n_states: int = 15

    def __post_init__(self):
        segs = self.segments
        for s in segs:
            if not s.start < s.end:
                raise ValueError(f"{self.entity_id}: empty segment {s}")
            if not 1 <= s.state <= self.n_states:
                raise ValueError(f"{self.entity_id}: state {s.state} outside 1..{self.n_states}")
        for a, b in zip(segs, segs[1:]):
            if a.end != b.start:
                raise ValueError(f"{self.entity_id}: segments not contiguous at {a.end}")
            if a.state == b.state:
                raise ValueError(f"{self.entity_id}: repeated state {a.state} at {b.start}")

    @property
    def first_date(self) -> dt.date | None:
        return self.segments[0].start if self.segments else None

    @property
    def end_date(self) -> dt.date | None:
        """First day on which the entity is no longer rated."""
        return self.segments[-1].end if self.segments else None

    @property
    def n_transitions(self) -> int:
        return max(len(self.segments) - 1, 0)

    def state_at(self, date: dt.date) -> int | None:
        """Rating state on ``date``, or ``None`` when the entity is unrated."""
        if not self.segments or not self.segments[0].start <= date < self.segments[-1].end:
            return None
        i = bisect.bisect_right([s.start for s in self.segments], date) - 1
        return self.segments[i].state


def history_from_changes(
    entity_id: str,
    changes: Iterable[tuple[dt.date, int]],
    end: dt.date,
    n_states: int = 15,
) -> RatingHistory:
    """Build a history from ``(date, state)`` changes ending (exclusive) at ``end``.

    Repeated states are folded into the running segment.
    """
    segs: list[Segment] = []
    cur_start = cur_state = None
    for date, state in changes:
        if date >= end:
            break
        if cur_state is None:
            cur_start, cur_state = date, state
        elif state != cur_state:
            segs.append(Segment(cur_start, date, cur_state))
            cur_start, cur_state = date, state
    if cur_state is not None:
        segs.append(Segment(cur_start, end, cur_state))
    return RatingHistory(entity_id, tuple(segs), n_states)


@dataclass(frozen=True)
class IngestConfig:
    """Study interval (both ends observed) and rating scale.

    With ``n_states == 15`` the grade column holds the letter symbols;
    integer state indices ``1..n_states`` are accepted for any scale.
    ``clip_to_interval`` folds events dated before the study start into the
    opening state and drops events after the end, instead of rejecting them.
    """

    start: dt.date = DEFAULT_START
    end: dt.date = DEFAULT_END
    n_states: int = 15
    clip_to_interval: bool = False

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("study end precedes study start")
        if self.n_states < 2:
            raise ValueError("need at least two states")

    @property
    def horizon_end(self) -> dt.date:
        """Exclusive end of the observed period."""
        return self.end + dt.timedelta(days=1)


def _parse_grade(token: str, config: IngestConfig, line: int) -> int | None:
    token = token.strip()
    if token == WITHDRAWN:
        return None
    if token.isdigit():
        k = int(token)
        if 1 <= k <= config.n_states:
            return k
        raise IngestError(f"state index {k} outside 1..{config.n_states}", line)
    if config.n_states != len(GRADES):
        raise IngestError(f"grade symbol {token!r} requires the 15-grade scale", line)
    try:
        return grade_to_index(token)
    except IngestError as exc:
        raise IngestError(str(exc), line) from None


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def parse_history_file(path: str | os.PathLike, config: IngestConfig = IngestConfig()) -> list[RatingHistory]:
    """Read a ``entity_id,date,grade`` CSV file (optionally gzipped).

    Returns one history per entity, ordered by entity id.
    """
    with _open_text(Path(path)) as fh:
        return parse_history_rows(csv.reader(fh), config)


def parse_history_rows(rows: Iterable[Sequence[str]], config: IngestConfig = IngestConfig()) -> list[RatingHistory]:
    rows = iter(rows)
    header = next(rows, None)
    if header is None or tuple(h.strip() for h in header) != HEADER:
        raise IngestError(f"expected header {','.join(HEADER)}", 1)

    events: dict[str, dict[dt.date, int | None]] = {}
    for line, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise IngestError(f"expected 3 fields, got {len(row)}", line)
        entity, date_s, grade = (c.strip() for c in row)
        if not entity:
            raise IngestError("empty entity_id", line)
        try:
            date = dt.date.fromisoformat(date_s)
        except ValueError:
            raise IngestError(f"bad ISO date {date_s!r}", line) from None
        state = _parse_grade(grade, config, line)
        if not config.start <= date <= config.end and not config.clip_to_interval:
            raise IngestError(f"date {date} outside study interval {config.start}..{config.end}", line)
        per_entity = events.setdefault(entity, {})
        if date in per_entity:
            raise IngestError(f"duplicate event for {entity} on {date}", line)
        per_entity[date] = state

    return [_build_history(eid, events[eid], config) for eid in sorted(events)]


def _build_history(entity_id: str, dated: dict[dt.date, int | None], config: IngestConfig) -> RatingHistory:
    ordered = sorted(dated.items())
    if config.clip_to_interval:
        before = [e for e in ordered if e[0] < config.start]
        ordered = [e for e in ordered if config.start <= e[0] <= config.end]
        if before and (not ordered or ordered[0][0] > config.start):
            ordered.insert(0, (config.start, before[-1][1]))
    end = config.horizon_end
    changes: list[tuple[dt.date, int]] = []
    for i, (date, state) in enumerate(ordered):
        if state is None:
            if i + 1 < len(ordered):
                raise IngestError(f"{entity_id}: events after withdrawal on {date}")
            end = date
            break
        changes.append((date, state))
    return history_from_changes(entity_id, changes, end, config.n_states)


def history_rows(histories: Iterable[RatingHistory], config: IngestConfig = IngestConfig()) -> list[tuple[str, str, str]]:
    """Event rows that :func:`parse_history_rows` maps back to ``histories``."""
    symbolic = config.n_states == len(GRADES)
    out = []
    for h in sorted(histories, key=lambda h: h.entity_id):
        for s in h.segments:
            out.append((h.entity_id, s.start.isoformat(), index_to_grade(s.state) if symbolic else str(s.state)))
        if h.segments and h.end_date < config.horizon_end:
            out.append((h.entity_id, h.end_date.isoformat(), WITHDRAWN))
    return out


def write_history_file(
    histories: Iterable[RatingHistory],
    path: str | os.PathLike,
    config: IngestConfig = IngestConfig(),
) -> None:
    """Serialize histories to the CSV dialect read by :func:`parse_history_file`."""
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    w.writerows(history_rows(histories, config))
    data = buf.getvalue().encode("utf-8")
    path = Path(path)
    if path.suffix == ".gz":
        data = gzip.compress(data, mtime=0)
    atomic_write_bytes(path, data)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
