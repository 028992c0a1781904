"""Experiment configuration: INI-style documents with typed, validated keys.

Grammar (see configs/README.md): ``[section]`` headers, ``key = value``
lines, ``#``/``;`` comments. Sections: ``params``, ``schedule``, ``run``.
Numeric values may be arithmetic over literals and ``pi`` (``pi/256``).
Duplicate keys and sections, unknown keys and unknown sections are errors.
"""
from __future__ import annotations

import ast
import configparser
import hashlib
import json
import math
import operator
import re
from dataclasses import asdict, dataclass, field

from .model import AtomParams, PulseSchedule, ValidationError

EXPERIMENTS = ("itano_table", "single_atom_periods", "trajectory_paths", "eigen_check", "bloch_check")
FORMATS = ("csv", "json")
DEFAULT_N_VALUES = (1, 2, 4, 8, 16, 32, 64)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval_number(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(f"not a number: {text!r}")

    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _int(text: str) -> int:
    value = _eval_number(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(_int(x) for x in text.split(",") if x.strip())


SCHEMA = {
    "params": {"omega2": _eval_number, "omega3": _eval_number, "a3": _eval_number},
    "schedule": {
        "tau_p": _eval_number, "dt": _eval_number, "n_pulses": _int, "tau_tr": _eval_number,
        "weak_on_during_pulse": _bool, "pi_pulse_total": _eval_number, "pulse_position": str.strip,
    },
    "run": {
        "experiment": str.strip, "trajectories": _int, "master_seed": _int,
        "output_path": str.strip, "output_format": str.strip, "margin": _eval_number,
        "step": _eval_number, "n_values": _int_list,
    },
}
REQUIRED = {"params": ("omega2", "omega3", "a3"), "schedule": ("tau_p",)}


@dataclass
class ExperimentConfig:
    params: AtomParams
    schedule: PulseSchedule
    experiment: str
    trajectories: int = 1000
    master_seed: int = 0
    output_path: str = ""
    output_format: str = "csv"
    margin: float = 10.0
    step: float = 0.0
    n_values: tuple[int, ...] = field(default=DEFAULT_N_VALUES)

    def __post_init__(self):
        if self.trajectories < 1:
            raise ValidationError("trajectories must be at least 1")
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.experiment!r}")
        if self.output_format not in FORMATS:
            raise ValidationError(f"output_format must be one of {FORMATS}")
        if self.margin <= 0:
            raise ValidationError("margin must be positive")
        if self.step <= 0:
            self.step = 0.02 / self.params.max_rate
        if not self.n_values or min(self.n_values) < 1:
            raise ValidationError("n_values must be positive integers")

    def config_hash(self) -> str:
        """Short digest of everything that determines the numbers (not where they go)."""
        payload = asdict(self)
        payload.pop("output_path")
        payload.pop("output_format")
        text = json.dumps(payload, sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _line_of(text: str, section: str, key: str | None = None) -> int:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
        elif current == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
            return no
    return 1


def _column(text: str, line: int) -> int:
    lines = text.splitlines()
    if 1 <= line <= len(lines):
        src = lines[line - 1]
        return len(src) - len(src.lstrip()) + 1
    return 1


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(strict=True, interpolation=None,
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(exc.message.split(": ", 1)[-1], exc.lineno, _column(text, exc.lineno)) from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside of any section", exc.lineno, 1) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else 1
        raise ParseError("malformed line", line, _column(text, line)) from exc

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ValidationError(f"unknown section [{section}] (line {_line_of(text, section)})")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ValidationError(f"unknown key {key!r} in [{section}] (line {_line_of(text, section, key)})")
            try:
                values[section][key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                line = _line_of(text, section, key)
                raise ParseError(str(exc), line, _column(text, line)) from exc
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in values.get(section, {}):
                raise ValidationError(f"missing required key {key!r} in [{section}]")
    for key, value in (overrides or {}).items():
        if value is not None:
            values.setdefault("run", {})[key] = value
    return build_config(values)


def build_config(values: dict[str, dict]) -> ExperimentConfig:
    params = AtomParams(**values["params"])
    sched = dict(values.get("schedule", {}))
    sched.setdefault("tau_tr", params.default_tau_tr)
    sched.setdefault("n_pulses", 1)
    if "pi_pulse_total" in sched:
        t_pi = sched["pi_pulse_total"]
        dt = t_pi / sched["n_pulses"] - sched["tau_p"]
        if "dt" in sched and abs(sched["dt"] - dt) > 1e-12 * max(1.0, t_pi):
            raise ValidationError("dt must equal pi_pulse_total/n_pulses - tau_p in Itano mode")
        sched["dt"] = dt
    elif "dt" not in sched:
        raise ValidationError("missing required key 'dt' in [schedule]")
    run = dict(values.get("run", {}))
    if "experiment" not in run:
        raise ValidationError("missing required key 'experiment' in [run]")
    return ExperimentConfig(params=params, schedule=PulseSchedule(**sched), **run)


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)
