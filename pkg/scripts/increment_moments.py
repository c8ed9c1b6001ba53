"""Rating-increment mean and spread across scales under downgrade drift.

Everyone starts in fine state 9, just above the two-state boundary, and
drifts down.  Coarse labels are further apart, so while the population
straddles the boundary the coarse increments are larger in magnitude.

    python scripts/increment_moments.py --entities 1000
"""
import argparse
import datetime as dt
import logging

from ratingdyn.diagnostics import INCREMENT_MEAN, INCREMENT_STD, date_grid, rolling_diagnostics, series_lookup
from ratingdyn.simulate import SimulationConfig, birth_death_generator, simulate

STATES = [15, 8, 4, 2]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--entities", type=int, default=1000)
    p.add_argument("--up", type=float, default=0.1)
    p.add_argument("--down", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=int, default=91, help="grid step in days")
    args = p.parse_args()
    logging.disable(logging.WARNING)

    initial = [0] * 15
    initial[8] = 1
    cfg = SimulationConfig("homogeneous", 15, args.entities, 6 * 365, seed=args.seed,
                           generator=birth_death_generator(15, args.up, args.down), initial=initial)
    grid = date_grid(cfg.start + dt.timedelta(days=365), cfg.end, args.step)
    L = series_lookup(rolling_diagnostics(simulate(cfg), grid, 365, 5, STATES))
    print("date        " + "  ".join(f"mean n={n:<3d} std n={n:<3d}" for n in STATES))
    for i, t in enumerate(grid):
        cells = [f"{L[INCREMENT_MEAN, n].values[i]:+10.4f} {L[INCREMENT_STD, n].values[i]:9.4f}" for n in STATES]
        print(f"{t.isoformat()}  " + "  ".join(cells))


if __name__ == "__main__":
    main()
