"""Simulated light/dark period means against the first-order and shelving-limit predictions, over a gap scan."""
import argparse
import math
import warnings

import numpy as np

from qzeno.acceptance import admissible_dt_min
from qzeno.ideal import run_lengths
from qzeno.jump import period_statistics, simulate_ensemble
from qzeno.model import AtomParams, PulseSchedule, RegimeViolation
from qzeno.qcore import ket


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--omega2", type=float, default=1.0)
    ap.add_argument("--omega3", type=float, default=50.0)
    ap.add_argument("--a3", type=float, default=20.0)
    ap.add_argument("--tau-p", type=float, default=2.0)
    ap.add_argument("--gaps", type=float, nargs="*", default=None,
                    help="gap lengths (default: 6 values down to the smallest admissible gap)")
    ap.add_argument("--pulses", type=int, default=2000)
    ap.add_argument("--trajectories", type=int, default=8)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    p = AtomParams(args.omega2, args.omega3, args.a3)
    gaps = args.gaps or list(np.geomspace(1.5, admissible_dt_min(p) * (1 + 1e-9), 6))
    lim_l, lim_d = period_statistics(p, 1.0, args.tau_p, mode="limit")
    print(f"shelving limits: light {lim_l:.6g}  dark {lim_d:.6g}")
    print("dt,light_mc,light_se,light_analytic,dark_mc,dark_se,dark_analytic")
    for dt in gaps:
        s = PulseSchedule(tau_p=args.tau_p, dt=dt, n_pulses=args.pulses, tau_tr=min(p.default_tau_tr, dt))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeViolation)
            t_l, t_d = period_statistics(p, dt, args.tau_p)
        ens = simulate_ensemble(ket(1), p, s, args.trajectories, args.seed, args.threads)
        light, dark = [], []
        for flags in ens.pulse_flags:
            levels, lengths = run_lengths(flags.astype(np.int8))
            for lv, ln in zip(levels[1:-1], lengths[1:-1]):
                (light if lv else dark).append(ln * s.period)
        stats = []
        for x in (np.array(light), np.array(dark)):
            stats.append((x.mean(), x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else (math.nan, math.nan))
        (ml, sl), (md, sd) = stats
        print(f"{dt:.6g},{ml:.6g},{sl:.3g},{t_l:.6g},{md:.6g},{sd:.3g},{t_d:.6g}")


if __name__ == "__main__":
    main()
