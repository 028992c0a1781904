import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qzeno.config import ParseError, load_config, parse_config
from qzeno.model import ValidationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MINIMAL = """
[params]
omega2 = 1
omega3 = 50
a3 = 20
[schedule]
tau_p = 2
dt = 1
[run]
experiment = eigen_check
"""


def expected_errors():
    rows = []
    for line in (CONFIGS / "invalid" / "EXPECTED").read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            parts = line.split()
            rows.append((parts[0], parts[1], int(parts[2]) if len(parts) > 2 else None))
    return rows


def test_minimal_document_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.params.omega3 == 50
    assert cfg.schedule.tau_tr == pytest.approx(40 / 20)
    assert cfg.margin == 10
    assert cfg.step == pytest.approx(0.02 / 50)
    assert cfg.schedule.n_pulses == 1
    assert cfg.trajectories >= 1


def test_duplicate_key_is_parse_error():
    with pytest.raises(ParseError) as info:
        parse_config(MINIMAL.replace("a3 = 20", "a3 = 20\na3 = 21"))
    assert info.value.line == 6


def test_zero_pulses_is_validation_error():
    with pytest.raises(ValidationError, match="n_pulses"):
        parse_config(MINIMAL.replace("dt = 1", "dt = 1\nn_pulses = 0"))


def test_pi_expressions_and_itano_dt():
    cfg = parse_config(MINIMAL.replace("omega2 = 1", "omega2 = pi/256").replace(
        "dt = 1", "pi_pulse_total = 256\nn_pulses = 4"))
    assert cfg.params.omega2 == pytest.approx(math.pi / 256)
    assert cfg.schedule.dt == pytest.approx(64 - 2)
    assert cfg.schedule.itano_mode


def test_rejects_code_in_values():
    with pytest.raises(ParseError):
        parse_config(MINIMAL.replace("a3 = 20", "a3 = __import__('os')"))


def test_overrides_apply():
    cfg = parse_config(MINIMAL, {"master_seed": 9, "output_format": None})
    assert cfg.master_seed == 9
    assert cfg.output_format == "csv"


def test_hash_ignores_output_location():
    a = parse_config(MINIMAL)
    b = parse_config(MINIMAL, {"output_path": "x.json", "output_format": "json"})
    c = parse_config(MINIMAL, {"master_seed": 1})
    assert a.config_hash() == b.config_hash() != c.config_hash()


@given(st.integers(0, 2**31), st.integers(1, 10**6))
def test_hash_is_deterministic(seed, traj):
    over = {"master_seed": seed, "trajectories": traj}
    assert parse_config(MINIMAL, over).config_hash() == parse_config(MINIMAL, over).config_hash()


@pytest.mark.parametrize("path", sorted((CONFIGS / "valid").glob("*.ini")), ids=lambda p: p.name)
def test_valid_corpus(path):
    cfg = load_config(str(path))
    assert cfg.trajectories >= 1


@pytest.mark.parametrize("name,error,line", expected_errors())
def test_invalid_corpus(name, error, line):
    exc = {"ParseError": ParseError, "ValidationError": ValidationError}[error]
    with pytest.raises(exc) as info:
        load_config(str(CONFIGS / "invalid" / name))
    if line is not None:
        assert info.value.line == line
        assert info.value.column >= 1


def test_invalid_corpus_is_complete():
    listed = {row[0] for row in expected_errors()}
    assert listed == {p.name for p in (CONFIGS / "invalid").glob("*.ini")}
