"""Annealed A* quality as a function of the heat constant.

For each payoff and each multiple of the pilot heat d = 4 Var[f], anneal
from -Id for 10^4 steps and price statically with the result, using the same
stream layout as the table reproductions. Prints one CSV row per
(payoff, heat multiple, seed).

    python3 scripts/heat_sweep.py [--seeds 1 2 3] [--scales 1 0.1 0.01 0.001]
"""

import argparse
import csv
import sys

import numpy as np

from antimc import anneal, cli, estimate, lie
from antimc.sampling import GaussianStream


def sweep(payoff_name, scale, seed, iters):
    which = 1 if payoff_name == "asian" else 2
    rows = cli.TABLES[which][1]
    n_star = cli.inferred_n(rows[2][1], rows[2][2])
    pm = cli.RunConfig(payoff=payoff_name).validate().build_payoff()
    _, _, s_pilot, s_anneal, s_star = GaussianStream(seed).split(5)
    heat = scale * anneal.heat_from_pilot(pm, 20_000, s_pilot)
    res = anneal.run(pm, anneal.AnnealSchedule(heat=heat), -np.eye(pm.dim), iters, s_anneal)
    rep = estimate.static_antithetic(pm, res.A_star, n_star, s_star)
    return heat, res, rep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--scales", type=float, nargs="+", default=[1.0, 0.1, 0.01, 0.001])
    ap.add_argument("--iters", type=int, default=10_000)
    args = ap.parse_args(argv)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("payoff", "heat_scale", "seed", "heat", "penalty_hits", "final_norm_Y", "astar_variance"))
    for payoff_name in ("asian", "covswap"):
        for scale in args.scales:
            for seed in args.seeds:
                heat, res, rep = sweep(payoff_name, scale, seed, args.iters)
                w.writerow((payoff_name, scale, seed, f"{heat:.4g}", res.penalty_hits,
                            f"{lie.norm(res.state.Y):.4f}", f"{rep.variance:.5g}"))
                sys.stdout.flush()


if __name__ == "__main__":
    main()
