"""Command-line interface: ``ratingdyn {estimate,compare,sweep-states,simulate}``.

Option precedence: explicit flags, then ``--config`` (JSON/TOML, or a
``manifest.json`` from an earlier run), then built-in defaults.
Exit codes: 0 success, 2 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .diagnostics import (
    D_CK,
    D_GENERATOR,
    DELTA_CK,
    DELTA_GENERATOR,
    date_grid,
    rolling_diagnostics,
)
from .estimators import (
    EmptyWindowError,
    NumericalError,
    SegmentTable,
    chapman_kolmogorov_estimate,
    cohort_estimate,
    count_window,
    generator_estimate,
    matrix_exponential,
    subwindow_ends,
)
from .formats import (
    file_digest,
    matrix_document,
    series_document,
    write_json,
    write_matrix,
    write_series_csv,
)
from .ingest import IngestConfig, IngestError, parse_history_file, write_history_file
from .simulate import SimulationConfig, birth_death_generator, simulate
from .statespace import coarsen_histories

EXIT_INPUT = 2
EXIT_NUMERICAL = 3

COMMON = {
    "start": "2007-01-01",
    "end": "2013-01-01",
    "input_states": 15,
    "clip": False,
    "tau": "1y",
    "k": 5,
    "year_days": 365,
    "leftover": "top",
}
DEFAULTS = {
    "estimate": {**COMMON, "method": "all", "states": 15},
    "compare": {**COMMON, "states": "2,4,8,15", "grid": "weekly", "grid_from": None, "grid_to": None, "workers": 1},
    "simulate": {
        "mode": "homogeneous", "n": 15, "entities": 1000, "horizon": "6y", "seed": 0,
        "start": "2007-01-01", "p_mem": 0.5, "step_days": 73, "up_rate": 0.2, "down_rate": 0.2,
        "year_days": 365, "workers": 1,
    },
}
DEFAULTS["sweep-states"] = DEFAULTS["compare"]


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT, kind: str = "input_error"):
        super().__init__(message)
        self.code = code
        self.kind = kind


def parse_duration(text, year_days: int = 365) -> int:
    """``'365d'``, ``'1y'`` or a bare day count -> days."""
    s = str(text).strip().lower()
    try:
        if s.endswith("y"):
            return int(round(float(s[:-1]) * year_days))
        if s.endswith("d"):
            return int(s[:-1])
        return int(s)
    except ValueError:
        raise CliError(f"bad duration {text!r}; use e.g. 365d or 1y") from None


def parse_states(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise CliError(f"bad state list {text!r}") from None


def _date(text) -> dt.date:
    try:
        return text if isinstance(text, dt.date) else dt.date.fromisoformat(str(text))
    except ValueError:
        raise CliError(f"bad ISO date {text!r}") from None


def load_config(path) -> dict:
    path = Path(path)
    try:
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        else:
            doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    if "config" in doc and "command" in doc:  # a run manifest
        doc = dict(doc["config"])
    return {k.replace("-", "_"): v for k, v in doc.items()}


def resolve(command: str, args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS[command])
    if args.config:
        opts.update(load_config(args.config))
    opts.update({k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "out", "verbose", "func")})
    return opts


# execution settings that never change outputs stay out of manifests
EXECUTION_ONLY = ("workers",)


def manifest(command: str, opts: dict) -> dict:
    config = {k: v for k, v in opts.items() if k not in EXECUTION_ONLY}
    doc = {"tool": "ratingdyn", "version": __version__, "command": command, "config": config}
    if opts.get("input"):
        doc["input_sha256"] = file_digest(opts["input"])
    return doc


def _load(opts: dict):
    if not opts.get("input"):
        raise CliError("--input is required")
    cfg = IngestConfig(_date(opts["start"]), _date(opts["end"]), int(opts["input_states"]), bool(opts["clip"]))
    try:
        return parse_history_file(opts["input"], cfg), cfg
    except FileNotFoundError:
        raise CliError(f"no such file: {opts['input']}") from None


def _out_dir(args) -> Path:
    if not args.out:
        raise CliError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_estimate(args) -> int:
    opts = resolve("estimate", args)
    histories, _ = _load(opts)
    year_days = int(opts["year_days"])
    tau = parse_duration(opts["tau"], year_days)
    k = int(opts["k"])
    n = int(opts["states"])
    if not opts.get("at"):
        raise CliError("--at is required")
    t = _date(opts["at"])
    method = opts["method"]
    if method not in ("cohort", "generator", "ck", "all"):
        raise CliError(f"unknown method {method!r}")
    out = _out_dir(args)
    tab = SegmentTable.from_histories(coarsen_histories(histories, n, opts["leftover"]), n)
    try:
        c = count_window(tab, t, tau, year_days)
        docs = {}
        if method in ("cohort", "all"):
            docs["T_cohort"] = matrix_document(cohort_estimate(c), "stochastic", "cohort", t, tau, year_days)
        if method in ("generator", "all"):
            q = generator_estimate(c)
            docs["Q_generator"] = matrix_document(q, "generator", "generator", t, tau, year_days)
            docs["T_generator"] = matrix_document(
                matrix_exponential(q, c.tau_years), "stochastic", "generator_exp", t, tau, year_days)
        if method in ("ck", "all"):
            subwindow_ends(t, tau, k)
            docs["T_ck"] = matrix_document(
                chapman_kolmogorov_estimate(tab, t, tau, k, year_days), "stochastic", "chapman_kolmogorov",
                t, tau, year_days, k)
    except EmptyWindowError as exc:
        raise CliError(str(exc)) from None
    except NumericalError as exc:
        raise CliError(str(exc), EXIT_NUMERICAL, "numerical_failure") from None
    for stem, doc in docs.items():
        write_matrix(out / stem, doc)
    write_json(out / "manifest.json", manifest("estimate", opts))
    return 0


def _rolling(command: str, args):
    opts = resolve(command, args)
    histories, cfg = _load(opts)
    year_days = int(opts["year_days"])
    tau = parse_duration(opts["tau"], year_days)
    k = int(opts["k"])
    states = parse_states(opts["states"])
    step = {"weekly": 7, "daily": 1}.get(str(opts["grid"])) or parse_duration(opts["grid"], year_days)
    first = _date(opts["grid_from"]) if opts.get("grid_from") else cfg.start + dt.timedelta(days=tau)
    last = _date(opts["grid_to"]) if opts.get("grid_to") else cfg.end
    grid = date_grid(first, last, step)
    if not grid:
        raise CliError("empty date grid")
    try:
        series = rolling_diagnostics(
            histories, grid, tau, k, states, opts["leftover"], year_days,
            baseline_n=int(opts["input_states"]), workers=int(opts["workers"]),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return opts, series


def _all_gaps(series, metrics) -> bool:
    relevant = [s for s in series if s.metric in metrics]
    return bool(relevant) and all(g is not None for s in relevant for g in s.gaps)


def cmd_compare(args) -> int:
    opts, series = _rolling("compare", args)
    out = _out_dir(args)
    man = manifest("compare", opts)
    write_series_csv(out / "series.csv", series)
    write_json(out / "series.json", series_document(series, man))
    write_json(out / "manifest.json", man)
    if _all_gaps(series, (D_GENERATOR, D_CK)):
        raise CliError("no window produced a distance", EXIT_NUMERICAL, "numerical_failure")
    return 0


def cmd_sweep_states(args) -> int:
    opts, series = _rolling("sweep-states", args)
    baseline = int(opts["input_states"])
    if baseline not in parse_states(opts["states"]):
        raise CliError(f"state list must include the baseline scale {baseline}")
    out = _out_dir(args)
    man = manifest("sweep-states", opts)
    keep = [s for s in series if s.metric in (D_GENERATOR, D_CK, DELTA_GENERATOR, DELTA_CK)]
    deltas = [s for s in keep if s.metric in (DELTA_GENERATOR, DELTA_CK)]
    note = None if deltas else f"only the baseline scale {baseline} was requested; no delta series"
    write_series_csv(out / "delta.csv", deltas)
    write_series_csv(out / "distance.csv", [s for s in keep if s not in deltas])
    write_json(out / "delta.json", series_document(keep, man, note))
    write_json(out / "manifest.json", man)
    return 0


def simulation_config(opts: dict) -> SimulationConfig:
    year_days = int(opts.get("year_days", 365))
    n = int(opts["n"])
    mode = opts["mode"]
    horizon = int(opts["horizon_days"]) if "horizon_days" in opts else parse_duration(opts["horizon"], year_days)
    kw = dict(
        mode=mode, n=n, entities=int(opts["entities"]), horizon_days=horizon, seed=int(opts["seed"]),
        start=_date(opts["start"]), p_mem=float(opts["p_mem"]), year_days=year_days,
        initial=opts.get("initial"),
    )
    default_q = birth_death_generator(n, float(opts["up_rate"]), float(opts["down_rate"]))
    if mode in ("homogeneous", "second_order"):
        kw["generator"] = opts.get("generator") or default_q.tolist()
    elif mode == "regime_switching":
        if not opts.get("generators"):
            raise CliError("regime_switching needs 'generators' and 'switch_days' in --config")
        kw["generators"] = opts["generators"]
        kw["switch_days"] = opts.get("switch_days", ())
    elif mode == "discrete_exact":
        step = int(opts["step_days"])
        kw["step_days"] = step
        kw["matrix"] = opts.get("matrix") or matrix_exponential(default_q, step / year_days).tolist()
    try:
        return SimulationConfig(**kw)
    except ValueError as exc:
        raise CliError(f"invalid simulation config: {exc}") from None


def cmd_simulate(args) -> int:
    opts = resolve("simulate", args)
    if args.horizon is not None:
        opts.pop("horizon_days", None)
    cfg = simulation_config(opts)
    out = _out_dir(args)
    write_history_file(simulate(cfg, int(opts["workers"])), out / "histories.csv", cfg.ingest_config())
    write_json(out / "manifest.json", {
        "tool": "ratingdyn", "version": __version__, "command": "simulate", "config": cfg.to_dict(),
        "study": {"start": cfg.start.isoformat(), "end": cfg.end.isoformat(), "input_states": cfg.n},
    })
    return 0


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON/TOML options file or a previous manifest.json")
    p.add_argument("--out", help="output directory")
    p.add_argument("--input", help="rating-event CSV (entity_id,date,grade), optionally .gz")
    p.add_argument("--input-states", type=int, help="scale of the input file (default 15)")
    p.add_argument("--start", help="study start, ISO date")
    p.add_argument("--end", help="study end (observed), ISO date")
    p.add_argument("--clip", action="store_const", const=True, help="fold out-of-interval events instead of failing")
    p.add_argument("--tau", help="window length, e.g. 1y or 365d")
    p.add_argument("--k", type=int, help="Chapman-Kolmogorov sub-windows (must divide tau in days)")
    p.add_argument("--year-days", type=int, help="days per year (default 365)")
    p.add_argument("--leftover", choices=("top", "bottom"), help="unmerged state for odd n")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratingdyn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="transition matrices for one window")
    _common(p)
    p.add_argument("--at", help="window end date t")
    p.add_argument("--method", choices=("cohort", "generator", "ck", "all"))
    p.add_argument("--states", type=int, help="coarsen to this many states first")
    p.set_defaults(func=cmd_estimate)

    for name, func, help_ in (
        ("compare", cmd_compare, "rolling likelihood distances and deltas"),
        ("sweep-states", cmd_sweep_states, "delta series against the baseline scale"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--states", help="comma-separated state counts, e.g. 2,4,8,15")
        p.add_argument("--grid", help="weekly, daily or a step like 14d")
        p.add_argument("--from", dest="grid_from", help="first grid date")
        p.add_argument("--to", dest="grid_to", help="last grid date")
        p.add_argument("--workers", type=int, help="processes for the rolling grid")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="synthetic rating histories")
    p.add_argument("--config", help="simulation config (JSON/TOML) or a previous manifest.json")
    p.add_argument("--out", help="output directory")
    p.add_argument("--mode", choices=("homogeneous", "regime_switching", "second_order", "discrete_exact"))
    p.add_argument("--n", type=int)
    p.add_argument("--entities", type=int)
    p.add_argument("--horizon", help="simulated span, e.g. 6y")
    p.add_argument("--seed", type=int)
    p.add_argument("--start")
    p.add_argument("--p-mem", type=float)
    p.add_argument("--step-days", type=int)
    p.add_argument("--up-rate", type=float, help="default generator upgrade rate per year")
    p.add_argument("--down-rate", type=float, help="default generator downgrade rate per year")
    p.add_argument("--workers", type=int, help="processes for entity generation (output unchanged)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc)}), file=sys.stderr)
        return exc.code
    except (IngestError, ValueError) as exc:
        print(json.dumps({"error": "input_error", "message": str(exc)}), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
