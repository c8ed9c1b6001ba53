"""Time-averaged likelihood distances on a homogeneous Markov chain.

Both distances should fluctuate around 1 with no structure; the printed
numbers are the reference level for the violation experiments.

    python scripts/homogeneous_null.py --n 8 --entities 2000 --seeds 0 1 2
"""
import argparse
import datetime as dt
import logging

import numpy as np

from ratingdyn.diagnostics import D_CK, D_GENERATOR, date_grid, rolling_diagnostics, series_lookup
from ratingdyn.formats import write_series_csv
from ratingdyn.simulate import SimulationConfig, birth_death_generator, simulate


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--entities", type=int, default=2000)
    p.add_argument("--years", type=int, default=6)
    p.add_argument("--up", type=float, default=0.25)
    p.add_argument("--down", type=float, default=0.25)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--step", type=int, default=7, help="grid step in days")
    p.add_argument("--out", help="write the series of the first seed to this CSV")
    args = p.parse_args()
    logging.disable(logging.WARNING)

    q = birth_death_generator(args.n, args.up, args.down)
    print("seed  mean d(T,T')  mean|d(T,T')-1|  mean d(T,Tbar)  mean|d(T,Tbar)-1|")
    for i, seed in enumerate(args.seeds):
        cfg = SimulationConfig("homogeneous", args.n, args.entities, args.years * 365, seed=seed, generator=q)
        grid = date_grid(cfg.start + dt.timedelta(days=365), cfg.end, args.step)
        series = rolling_diagnostics(simulate(cfg), grid, 365, 5, [args.n])
        L = series_lookup(series)
        g, c = L[D_GENERATOR, args.n].valid(), L[D_CK, args.n].valid()
        print(f"{seed:4d}  {g.mean():12.4f}  {np.abs(g - 1).mean():15.4f}  {c.mean():14.4f}  {np.abs(c - 1).mean():17.4f}")
        if args.out and i == 0:
            write_series_csv(args.out, series)


if __name__ == "__main__":
    main()
