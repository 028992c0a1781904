"""Print the Itano table: both projection columns, jump-ensemble mean and master-equation value."""
import argparse
import math
import sys
import warnings

from qzeno.config import build_config
from qzeno.experiments import itano_table
from qzeno.model import RegimeViolation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trajectories", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=1990)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--omega3", type=float, default=50.0)
    ap.add_argument("--a3", type=float, default=20.0)
    ap.add_argument("--tau-p", type=float, default=2.4)
    ap.add_argument("--t-pi", type=float, default=256.0)
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    args = ap.parse_args()

    cfg = build_config({
        "params": {"omega2": math.pi / args.t_pi, "omega3": args.omega3, "a3": args.a3},
        "schedule": {"tau_p": args.tau_p, "pi_pulse_total": args.t_pi},
        "run": {"experiment": "itano_table", "trajectories": args.trajectories,
                "master_seed": args.seed, "output_format": args.format},
    })
    with warnings.catch_warnings():
        warnings.simplefilter("always", RegimeViolation)
        table = itano_table(cfg, args.threads)
    sys.stdout.write(table.render(args.format))


if __name__ == "__main__":
    main()
