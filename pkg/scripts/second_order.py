"""Markov-violation signal of a momentum (second-order) chain versus p_mem.

At each jump, with probability p_mem the chain continues one notch in the
direction of its previous jump.  p_mem = 0 is an ordinary Markov chain.

    python scripts/second_order.py --p-mem 0 0.25 0.5 0.75
"""
import argparse
import datetime as dt
import logging

import numpy as np

from ratingdyn.diagnostics import D_CK, D_GENERATOR, date_grid, rolling_diagnostics, series_lookup
from ratingdyn.simulate import SimulationConfig, birth_death_generator, simulate

STATES = [15, 8, 4, 2]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--p-mem", type=float, nargs="+", default=[0.0, 0.25, 0.5, 0.75])
    p.add_argument("--entities", type=int, default=3000)
    p.add_argument("--rate", type=float, default=0.5, help="one-notch up and down rate per year")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    logging.disable(logging.WARNING)

    q = birth_death_generator(15, args.rate, args.rate)
    print("p_mem  metric       " + "  ".join(f"n={n:<5d}" for n in STATES))
    for p_mem in args.p_mem:
        cfg = SimulationConfig("second_order", 15, args.entities, 6 * 365, seed=args.seed, generator=q, p_mem=p_mem)
        grid = date_grid(cfg.start + dt.timedelta(days=365), cfg.end, 7)
        L = series_lookup(rolling_diagnostics(simulate(cfg), grid, 365, 5, STATES))
        for metric in (D_GENERATOR, D_CK):
            devs = [np.abs(L[metric, n].valid() - 1).mean() for n in STATES]
            print(f"{p_mem:5.2f}  {metric:11s}  " + "  ".join(f"{d:.4f} " for d in devs))


if __name__ == "__main__":
    main()
