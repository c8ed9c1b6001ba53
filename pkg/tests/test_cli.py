import datetime as dt
import json
import logging
import subprocess
import sys

import numpy as np
import pytest

from ratingdyn.cli import CliError, main, parse_duration, parse_states
from ratingdyn.diagnostics import delta_across_states, likelihood_distance
from ratingdyn.estimators import (
    chapman_kolmogorov_estimate,
    cohort_estimate,
    count_window,
    generator_estimate,
    matrix_exponential,
)
from ratingdyn.formats import read_matrix, read_series_csv
from ratingdyn.ingest import IngestConfig, history_from_changes, parse_history_file, write_history_file
from ratingdyn.statespace import coarsen_histories

D = dt.date


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--out", out, "--n", 15, "--entities", 400, "--seed", 3,
               "--up-rate", 0.6, "--down-rate", 0.8) == 0
    return out


@pytest.fixture(scope="module")
def histories_csv(sim_dir):
    return sim_dir / "histories.csv"


def read_all(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_parse_helpers():
    assert parse_duration("1y") == 365 and parse_duration("365d") == 365 and parse_duration("2y", 360) == 720
    assert parse_duration(91) == 91
    assert parse_states("2,4,8,15") == [2, 4, 8, 15]
    with pytest.raises(CliError):
        parse_duration("a year")


def test_estimate_cohort_matches_library(tmp_path, histories_csv):
    assert run("estimate", "--input", histories_csv, "--out", tmp_path, "--method", "cohort",
               "--at", "2010-01-01", "--tau", "1y") == 0
    m, doc = read_matrix(tmp_path / "T_cohort.json")
    expected = cohort_estimate(count_window(parse_history_file(histories_csv), D(2010, 1, 1), 365))
    assert np.array_equal(m, expected)
    assert np.array_equal(read_matrix(tmp_path / "T_cohort.csv")[0], expected)
    assert doc["window"] == {"t": "2010-01-01", "tau_days": 365, "year_days": 365, "k": None}
    assert sorted(p.name for p in tmp_path.iterdir()) == ["T_cohort.csv", "T_cohort.json", "manifest.json"]


def test_estimate_all_emits_four_matrices(tmp_path, histories_csv):
    assert run("estimate", "--input", histories_csv, "--out", tmp_path, "--at", "2010-01-01", "--states", 8) == 0
    stems = ["Q_generator", "T_ck", "T_cohort", "T_generator"]
    assert sorted(p.stem for p in tmp_path.glob("*.json") if p.stem != "manifest") == stems
    docs = {s: read_matrix(tmp_path / f"{s}.json")[1] for s in stems}
    assert {d["n"] for d in docs.values()} == {8}
    assert {d["window"]["t"] for d in docs.values()} == {"2010-01-01"}
    assert docs["T_ck"]["window"]["k"] == 5
    hs = coarsen_histories(parse_history_file(histories_csv), 8)
    c = count_window(hs, D(2010, 1, 1), 365)
    q = generator_estimate(c)
    assert np.array_equal(read_matrix(tmp_path / "Q_generator.json")[0], q)
    assert np.array_equal(read_matrix(tmp_path / "T_generator.json")[0], matrix_exponential(q, 1.0))
    assert np.array_equal(read_matrix(tmp_path / "T_ck.json")[0], chapman_kolmogorov_estimate(hs, D(2010, 1, 1), 365, 5))
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["states"] == 8 and len(man["input_sha256"]) == 64


def test_estimate_rerun_and_manifest_replay_are_byte_identical(tmp_path, histories_csv):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    args = ["estimate", "--input", histories_csv, "--at", "2011-03-05", "--tau", "365d", "--k", 5]
    assert run(*args, "--out", a) == 0
    assert run(*args, "--out", b) == 0
    assert run("estimate", "--config", a / "manifest.json", "--out", c) == 0
    assert read_all(a) == read_all(b) == read_all(c)


def test_compare_single_date_matches_estimate(tmp_path, histories_csv):
    est, cmp_ = tmp_path / "est", tmp_path / "cmp"
    assert run("estimate", "--input", histories_csv, "--out", est, "--at", "2010-01-01", "--states", 4) == 0
    assert run("compare", "--input", histories_csv, "--out", cmp_, "--states", "4,15",
               "--from", "2010-01-01", "--to", "2010-01-01") == 0
    rows = {(r["metric"], r["n_states"]): r for r in read_series_csv(cmp_ / "series.csv")}
    c = count_window(coarsen_histories(parse_history_file(histories_csv), 4), D(2010, 1, 1), 365)
    t = read_matrix(est / "T_cohort.json")[0]
    assert rows["d_generator", 4]["value"] == likelihood_distance(c, t, read_matrix(est / "T_generator.json")[0])
    assert rows["d_ck", 4]["value"] == likelihood_distance(c, t, read_matrix(est / "T_ck.json")[0])


def test_compare_gaps_before_data_start(tmp_path, histories_csv):
    assert run("compare", "--input", histories_csv, "--out", tmp_path, "--states", "2,15",
               "--from", "2007-06-01", "--to", "2008-06-01", "--grid", "91d") == 0
    rows = read_series_csv(tmp_path / "series.csv")
    early = [r for r in rows if r["date"] < D(2008, 1, 1)]
    late = [r for r in rows if r["date"] >= D(2008, 1, 1) and r["metric"].startswith("d_")]
    assert early and all(np.isnan(r["value"]) and r["gap_reason"] for r in early)
    assert late and all(r["gap_reason"] is None for r in late)
    doc = json.loads((tmp_path / "series.json").read_text())
    assert doc["series"][0]["values"][0] is None


def test_compare_all_gaps_is_numerical_failure(tmp_path, histories_csv, capsys):
    code = run("compare", "--input", histories_csv, "--out", tmp_path, "--states", "15",
               "--from", "2007-03-01", "--to", "2007-09-01")
    assert code == 3
    assert json.loads(capsys.readouterr().err)["error"] == "numerical_failure"


def test_compare_serial_equals_parallel(tmp_path, histories_csv):
    args = ["compare", "--input", histories_csv, "--states", "2,8,15", "--grid", "30d"]
    assert run(*args, "--out", tmp_path / "s") == 0
    assert run(*args, "--out", tmp_path / "p", "--workers", 2) == 0
    assert read_all(tmp_path / "s") == read_all(tmp_path / "p")


def test_simulate_zero_entities_header_only(tmp_path):
    assert run("simulate", "--out", tmp_path, "--entities", 0) == 0
    assert (tmp_path / "histories.csv").read_text() == "entity_id,date,grade\n"


def test_simulate_seed_repetition_and_replay(tmp_path, sim_dir):
    assert run("simulate", "--out", tmp_path / "a", "--n", 15, "--entities", 400, "--seed", 3,
               "--up-rate", 0.6, "--down-rate", 0.8, "--workers", 2) == 0
    assert read_all(tmp_path / "a") == read_all(sim_dir)
    assert run("simulate", "--config", sim_dir / "manifest.json", "--out", tmp_path / "b") == 0
    assert read_all(tmp_path / "b") == read_all(sim_dir)
    assert run("simulate", "--config", sim_dir / "manifest.json", "--seed", 4, "--out", tmp_path / "c") == 0
    assert read_all(tmp_path / "c") != read_all(sim_dir)


@pytest.mark.parametrize("mode", ["homogeneous", "second_order", "discrete_exact"])
def test_simulated_file_round_trips_through_estimate(tmp_path, mode, caplog, capsys):
    sim, est = tmp_path / "sim", tmp_path / "est"
    assert run("simulate", "--out", sim, "--mode", mode, "--n", 4, "--entities", 500, "--seed", 1) == 0
    with caplog.at_level(logging.WARNING, logger="ratingdyn"):
        assert run("estimate", "--config", sim / "manifest.json", "--input", sim / "histories.csv",
                   "--input-states", 4, "--states", 4, "--at", "2012-01-01", "--out", est) == 0
    assert not [r for r in caplog.records if r.levelno >= logging.WARNING]
    assert capsys.readouterr().err == ""
    assert len(list(est.glob("*.json"))) == 5


def test_simulate_regime_switching_needs_config(tmp_path, capsys):
    assert run("simulate", "--out", tmp_path, "--mode", "regime_switching") == 2
    assert "generators" in json.loads(capsys.readouterr().err)["message"]


def test_simulate_regime_switching_from_toml(tmp_path):
    cfg = tmp_path / "sim.toml"
    calm = "[[-0.2, 0.2], [0.2, -0.2]]"
    storm = "[[-2.0, 2.0], [0.1, -0.1]]"
    cfg.write_text(f'mode = "regime_switching"\nn = 2\nentities = 20\nhorizon_days = 730\n'
                   f'generators = [{calm}, {storm}]\nswitch_days = [365]\n')
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o") == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["config"]["switch_days"] == [365]


def test_sweep_states_baseline_only_gives_empty_delta(tmp_path, histories_csv):
    assert run("sweep-states", "--input", histories_csv, "--out", tmp_path, "--states", "15", "--grid", "91d") == 0
    assert (tmp_path / "delta.csv").read_text() == "date,metric,n_states,value,gap_reason\n"
    doc = json.loads((tmp_path / "delta.json").read_text())
    assert "no delta" in doc["note"]


def test_sweep_states_delta_recomputes_from_distances(tmp_path, histories_csv):
    assert run("sweep-states", "--input", histories_csv, "--out", tmp_path, "--grid", "30d") == 0
    dist = {(r["date"], r["metric"], r["n_states"]): r["value"] for r in read_series_csv(tmp_path / "distance.csv")}
    deltas = read_series_csv(tmp_path / "delta.csv")
    assert {r["n_states"] for r in deltas} == {2, 4, 8}
    for r in deltas:
        d_metric = "d_" + r["metric"].split("_", 1)[1]
        expected = delta_across_states(dist[r["date"], d_metric, 15], dist[r["date"], d_metric, r["n_states"]])
        assert r["value"] == expected or (np.isnan(r["value"]) and np.isnan(expected))


def test_sweep_states_identical_distances_give_zero_delta(tmp_path):
    # only the extreme grades are used, so every coarsening is a relabelling
    rng = np.random.default_rng(0)
    end = IngestConfig().horizon_end
    hs = []
    for i in range(300):
        days = np.sort(rng.choice(6 * 365, size=rng.integers(1, 6), replace=False))
        state = 1 if i % 2 else 15
        changes = [(D(2007, 1, 1), state)]
        for d in days[days > 0]:
            state = 16 - state
            changes.append((D(2007, 1, 1) + dt.timedelta(days=int(d)), state))
        hs.append(history_from_changes(f"e{i}", changes, end))
    p = tmp_path / "extreme.csv"
    write_history_file(hs, p)
    assert run("sweep-states", "--input", p, "--out", tmp_path / "o", "--grid", "61d") == 0
    values = [r["value"] for r in read_series_csv(tmp_path / "o" / "delta.csv")]
    assert values and all(v == 0.0 for v in values)


def test_sweep_states_missing_baseline(tmp_path, histories_csv, capsys):
    assert run("sweep-states", "--input", histories_csv, "--out", tmp_path, "--states", "2,4") == 2
    assert "baseline" in json.loads(capsys.readouterr().err)["message"]


@pytest.mark.parametrize("extra, message", [
    (["--at", "2010-01-01", "--tau", "forever"], "duration"),
    (["--at", "2010-02-30"], "ISO date"),
    (["--at", "2010-01-01", "--k", 12], "not divisible"),
    (["--at", "2007-06-01"], ""),
])
def test_estimate_input_errors_exit_2(tmp_path, histories_csv, capsys, extra, message):
    assert run("estimate", "--input", histories_csv, "--out", tmp_path, *extra) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "input_error" and message in err["message"]


def test_malformed_file_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("entity_id,date,grade\nE1,2007-01-01,Q\n")
    assert run("estimate", "--input", p, "--out", tmp_path / "o", "--at", "2010-01-01") == 2
    assert "line 2" in json.loads(capsys.readouterr().err)["message"]
    assert run("estimate", "--input", tmp_path / "missing.csv", "--out", tmp_path / "o", "--at", "2010-01-01") == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ratingdyn", "--version"], capture_output=True, text=True, check=True)
    assert r.stdout.strip() == "0.1.0"
