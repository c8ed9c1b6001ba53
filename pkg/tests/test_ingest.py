import datetime as dt
import gzip

import pytest
from hypothesis import given, settings, strategies as st

from ratingdyn.ingest import (
    GRADES,
    IngestConfig,
    IngestError,
    RatingHistory,
    Segment,
    grade_to_index,
    history_from_changes,
    parse_history_file,
    write_history_file,
)
from ratingdyn.simulate import SimulationConfig, birth_death_generator, simulate

D = dt.date


def write(tmp_path, text, name="r.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("grade, index", [("A+", 15), ("E-", 1), ("C", 8), ("B-", 10), ("D+", 6)])
def test_grade_to_index(grade, index):
    assert grade_to_index(grade) == index


def test_grade_alphabet_is_monotone_bijection():
    assert len(GRADES) == 15
    assert [grade_to_index(g) for g in GRADES] == list(range(1, 16))
    assert GRADES[0] == "E-" and GRADES[-1] == "A+"


def test_unknown_grade():
    with pytest.raises(IngestError):
        grade_to_index("AAA")


def test_two_rows_make_one_transition(tmp_path):
    p = write(tmp_path, "entity_id,date,grade\nE1,2007-01-01,B+\nE1,2008-06-01,B\n")
    (h,) = parse_history_file(p)
    assert [s.state for s in h.segments] == [grade_to_index("B+"), grade_to_index("B")]
    assert h.segments[1].start == D(2008, 6, 1)
    assert h.n_transitions == 1
    # rated through the study end, inclusive
    assert h.end_date == D(2013, 1, 2)


def test_duplicate_date_rejected_with_line(tmp_path):
    p = write(tmp_path, "entity_id,date,grade\nE1,2007-01-01,B+\nE1,2007-01-01,B\n")
    with pytest.raises(IngestError, match="line 3.*duplicate"):
        parse_history_file(p)


@pytest.mark.parametrize("row, pattern", [
    ("E1,2007-01-01", "line 2: expected 3 fields"),
    ("E1,2007-13-01,B", "line 2: bad ISO date"),
    ("E1,2007-01-01,Z", "line 2: unknown grade"),
    ("E1,2006-01-01,B", "line 2: date .* outside"),
])
def test_malformed_rows(tmp_path, row, pattern):
    p = write(tmp_path, f"entity_id,date,grade\n{row}\n")
    with pytest.raises(IngestError, match=pattern):
        parse_history_file(p)


def test_bad_header(tmp_path):
    with pytest.raises(IngestError, match="header"):
        parse_history_file(write(tmp_path, "id,when,what\n"))


def test_out_of_order_rows_sorted(tmp_path):
    p = write(tmp_path, "entity_id,date,grade\nE1,2009-01-01,C\nE2,2008-01-01,A\nE1,2007-01-01,B\n")
    e1, e2 = parse_history_file(p)
    assert e1.entity_id == "E1" and [s.state for s in e1.segments] == [11, 8]
    assert e2.first_date == D(2008, 1, 1)


def test_reaffirmation_folds_into_segment(tmp_path):
    p = write(tmp_path, "entity_id,date,grade\nE1,2007-01-01,B\nE1,2008-01-01,B\nE1,2009-01-01,C\n")
    (h,) = parse_history_file(p)
    assert len(h.segments) == 2 and h.segments[0].end == D(2009, 1, 1)


def test_withdrawal_censors(tmp_path):
    p = write(tmp_path, "entity_id,date,grade\nE1,2007-01-01,B\nE1,2009-03-01,WR\n")
    (h,) = parse_history_file(p)
    assert h.end_date == D(2009, 3, 1)
    assert h.state_at(D(2009, 2, 28)) == grade_to_index("B")
    assert h.state_at(D(2009, 3, 1)) is None


def test_events_after_withdrawal_rejected(tmp_path):
    p = write(tmp_path, "entity_id,date,grade\nE1,2007-01-01,B\nE1,2008-01-01,WR\nE1,2009-01-01,C\n")
    with pytest.raises(IngestError, match="after withdrawal"):
        parse_history_file(p)


def test_clip_folds_early_events(tmp_path):
    p = write(tmp_path, "entity_id,date,grade\nE1,2001-01-01,A\nE1,2005-01-01,B\nE1,2008-01-01,C\nE1,2014-01-01,D\n")
    (h,) = parse_history_file(p, IngestConfig(clip_to_interval=True))
    assert [(s.start, s.state) for s in h.segments] == [(D(2007, 1, 1), 11), (D(2008, 1, 1), 8)]


def test_numeric_states_for_other_scales(tmp_path):
    p = write(tmp_path, "entity_id,date,grade\nE1,2007-01-01,3\nE1,2008-01-01,4\n")
    (h,) = parse_history_file(p, IngestConfig(n_states=4))
    assert h.n_states == 4 and [s.state for s in h.segments] == [3, 4]
    with pytest.raises(IngestError, match="outside 1..4"):
        parse_history_file(write(tmp_path, "entity_id,date,grade\nE1,2007-01-01,5\n"), IngestConfig(n_states=4))


def test_gzip_input(tmp_path):
    p = tmp_path / "r.csv.gz"
    p.write_bytes(gzip.compress(b"entity_id,date,grade\nE1,2007-01-01,A-\n"))
    (h,) = parse_history_file(p)
    assert h.segments[0].state == 13


def test_history_invariants_enforced():
    with pytest.raises(ValueError, match="repeated state"):
        RatingHistory("x", (Segment(D(2007, 1, 1), D(2008, 1, 1), 2), Segment(D(2008, 1, 1), D(2009, 1, 1), 2)))
    with pytest.raises(ValueError, match="contiguous"):
        RatingHistory("x", (Segment(D(2007, 1, 1), D(2008, 1, 1), 2), Segment(D(2008, 2, 1), D(2009, 1, 1), 3)))


def test_round_trip_simulated_sample(tmp_path):
    cfg = SimulationConfig("homogeneous", 15, 50, 6 * 365, seed=11, generator=birth_death_generator(15, 0.4, 0.5))
    hs = simulate(cfg)
    p = tmp_path / "sim.csv"
    write_history_file(hs, p, cfg.ingest_config())
    back = parse_history_file(p, cfg.ingest_config())
    assert [h.segments for h in back] == [h.segments for h in hs]


def test_round_trip_gzip_with_withdrawals(tmp_path):
    end = IngestConfig().horizon_end
    hs = [
        history_from_changes("a", [(D(2007, 1, 1), 3), (D(2010, 5, 5), 1)], D(2011, 1, 1)),
        history_from_changes("b", [(D(2008, 2, 2), 15)], end),
    ]
    p = tmp_path / "h.csv.gz"
    write_history_file(hs, p)
    assert parse_history_file(p) == hs


changes = st.lists(
    st.tuples(st.integers(0, 6 * 365), st.integers(1, 15)), min_size=1, max_size=12, unique_by=lambda x: x[0]
)


@settings(max_examples=60, deadline=None)
@given(changes, st.booleans())
def test_parse_serialize_identity(tmp_path_factory, raw, withdrawn):
    start = D(2007, 1, 1)
    raw = sorted(raw)
    cfg = IngestConfig()
    end = min(start + dt.timedelta(days=raw[-1][0] + 30), cfg.end) if withdrawn else cfg.horizon_end
    h = history_from_changes("E", [(start + dt.timedelta(days=d), s) for d, s in raw], end)
    p = tmp_path_factory.mktemp("rt") / "h.csv"
    write_history_file([h], p, cfg)
    (back,) = parse_history_file(p, cfg)
    assert back == h
    # piecewise-constant semantics and transition count
    assert back.n_transitions == len(back.segments) - 1
    for s in back.segments:
        assert back.state_at(s.start) == s.state
        assert back.state_at(s.end - dt.timedelta(days=1)) == s.state
