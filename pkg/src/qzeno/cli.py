"""Command line entry point: ``qzeno {itano,periods,paths,eigen,bloch,selftest}``.

Exit status: 0 success, 1 invalid configuration or failed self-test, 2 internal
or I/O error. ``QZENO_THREADS`` and ``QZENO_OUT`` stand in for ``--threads``
and ``--out`` when those flags are absent.
"""
from __future__ import annotations

import argparse
import os
import sys
import traceback
import warnings

from .config import ParseError, load_config, parse_config
from .experiments import run_experiment
from .model import RegimeViolation, ValidationError

SUBCOMMANDS = {
    "itano": "itano_table",
    "periods": "single_atom_periods",
    "paths": "trajectory_paths",
    "eigen": "eigen_check",
    "bloch": "bloch_check",
}

# built-in documents used when --config is not given
PRESETS = {
    "itano_table": """
[params]
omega2 = pi/256
omega3 = 50
a3 = 20
[schedule]
tau_p = 2.4
pi_pulse_total = 256
n_pulses = 1
[run]
trajectories = 10000
master_seed = 1990
""",
    "single_atom_periods": """
[params]
omega2 = 1
omega3 = 50
a3 = 20
[schedule]
tau_p = 2
dt = 1
tau_tr = 1
n_pulses = 4000
[run]
trajectories = 24
master_seed = 7
""",
    "trajectory_paths": """
[params]
omega2 = 1
omega3 = 50
a3 = 20
[schedule]
tau_p = 2
dt = 1
tau_tr = 1
n_pulses = 60
[run]
trajectories = 4
master_seed = 11
""",
    "eigen_check": """
[params]
omega2 = 1
omega3 = 50
a3 = 20
[schedule]
tau_p = 2
dt = 1
""",
    "bloch_check": """
[params]
omega2 = pi/256
omega3 = 50
a3 = 20
[schedule]
tau_p = 2.4
pi_pulse_total = 256
n_pulses = 8
""",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qzeno", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in (*SUBCOMMANDS, "selftest"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI experiment file (built-in preset if omitted)")
        sp.add_argument("--seed", type=int, help="override master_seed")
        sp.add_argument("--out", help="output file (stdout if omitted)")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--threads", type=int)
        if name == "selftest":
            sp.add_argument("--quick", action="store_true", help="reduced sample sizes")
    return ap


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("QZENO_THREADS")
    return max(1, int(env)) if env else 1


def _out(args, cfg_path: str) -> str:
    return args.out or os.environ.get("QZENO_OUT") or cfg_path


def _write(text: str, path: str) -> None:
    if not path or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _selftest(args) -> int:
    from .acceptance import run_all

    results = run_all(threads=_threads(args), quick=args.quick, echo=print)
    return 0 if all(r.passed for r in results) else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return _selftest(args)
        experiment = SUBCOMMANDS[args.command]
        overrides = {"experiment": experiment, "master_seed": args.seed, "output_format": args.format}
        if args.config:
            cfg = load_config(args.config, overrides)
        else:
            cfg = parse_config(PRESETS[experiment], overrides)
        with warnings.catch_warnings():
            warnings.simplefilter("always", RegimeViolation)
            table = run_experiment(cfg, _threads(args))
        _write(table.render(cfg.output_format), _out(args, cfg.output_path))
        return 0
    except (ParseError, ValidationError, RegimeViolation) as exc:
        print(f"qzeno: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"qzeno: I/O error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
