"""Errors of the first-order eigenvalue, no-emission state and no-photon probability versus eps."""
import argparse
import warnings

import numpy as np

from qzeno.acceptance import loglog_slope, perturbative_errors
from qzeno.model import RegimeViolation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="*", default=[0.002, 0.005, 0.01, 0.02, 0.05])
    ap.add_argument("--tau-p", type=float, default=2.0)
    args = ap.parse_args()

    keys = ("lambda2_rel", "lambda2_abs", "vector", "rho0_p", "p0")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeViolation)
        rows = [perturbative_errors(e, args.tau_p) for e in args.eps]
    print("eps," + ",".join(keys))
    for e, r in zip(args.eps, rows):
        print(f"{e:g}," + ",".join(f"{r[k]:.4e}" for k in keys))
    print("slope," + ",".join(f"{loglog_slope(args.eps, [r[k] for r in rows]):.3f}" for k in keys))
    bound = np.array(args.eps) ** 2 * 10
    print("all <= 10 eps^2:", all(np.all(np.array([r[k] for r in rows]) <= bound) for k in ("lambda2_rel", "rho0_p", "p0")))


if __name__ == "__main__":
    main()
