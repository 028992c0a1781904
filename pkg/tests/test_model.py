import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qzeno.model import (
    AtomParams,
    PulseSchedule,
    RegimeViolation,
    ValidationError,
    build_h_cond,
    compute_epsilons,
    epsilons,
    free_propagator,
    hermitian_part,
    lindblad_generator,
)
from qzeno.qcore import ket, mat_exp, projector

PRESET = AtomParams(1.0, 50.0, 20.0)
rates = st.floats(0.01, 100)


def random_density(rng):
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def test_params_validation():
    with pytest.raises(ValidationError):
        AtomParams(-1.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        AtomParams(1.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        AtomParams(1.0, 1.0, 0.0)


def test_h_cond_examples():
    h = build_h_cond(AtomParams(0.0, 2.0, 1e-300), True, False)
    assert h[0, 2] == h[2, 0] == 1.0
    h = build_h_cond(AtomParams(1.0, 50.0, 20.0), False, True)
    np.testing.assert_allclose(h[:2, :2], [[0, 0.5], [0.5, 0]])
    assert h[2, 2] == -10j
    assert np.trace(build_h_cond(PRESET, True, True)) == -10j


@given(rates, rates, rates, st.booleans(), st.booleans())
def test_anti_hermitian_part_rank_one(w2, w3, a3, strong, weak):
    p = AtomParams(w2, w3, a3)
    h = build_h_cond(p, strong, weak)
    anti = h - hermitian_part(p, strong, weak)
    np.testing.assert_allclose(anti, -0.5j * a3 * projector(ket(3)), atol=1e-12)


def test_free_propagator():
    np.testing.assert_allclose(free_propagator(PRESET, 0.0), np.eye(3))
    np.testing.assert_allclose(free_propagator(PRESET, math.pi) @ ket(1), -1j * ket(2), atol=1e-15)
    rng = np.random.default_rng(1)
    for t in rng.uniform(0, 50, 100):
        u = free_propagator(PRESET, t)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(3), atol=1e-12)


@given(st.floats(0, 30))
def test_weak_block_matches_free_propagator(t):
    h = build_h_cond(PRESET, False, True)
    np.testing.assert_allclose(mat_exp(h[:2, :2], t), free_propagator(PRESET, t)[:2, :2], atol=1e-12)


def test_lindblad_examples():
    off = lindblad_generator(AtomParams(0.0, 50.0, 20.0), False, False)
    np.testing.assert_array_equal(off(projector(ket(2))), np.zeros((3, 3)))
    d = off(projector(ket(3)))
    assert d[2, 2] == pytest.approx(-20.0)
    assert d[0, 0] == pytest.approx(20.0)


def test_lindblad_trace_and_hermiticity():
    rng = np.random.default_rng(2)
    for strong, weak in ((True, True), (True, False), (False, True)):
        gen = lindblad_generator(PRESET, strong, weak)
        for _ in range(100):
            rho = random_density(rng)
            out = gen(rho)
            assert abs(np.trace(out)) <= 1e-14 * max(1.0, np.abs(out).max())
            np.testing.assert_allclose(out, out.conj().T, atol=1e-12)
            np.testing.assert_allclose(gen.matrix @ rho.reshape(9), out.reshape(9), atol=1e-12)


def test_epsilons_preset():
    e = epsilons(PRESET)
    assert (e.eps_a, e.eps_r, e.eps_p) == pytest.approx((0.05, 0.02, 0.008))
    assert e.eps_max == pytest.approx(0.05)
    assert e.eps_p * PRESET.omega3**2 == pytest.approx(PRESET.omega2 * PRESET.a3)


def test_regime_gates():
    s = PulseSchedule(tau_p=2.0, dt=1.0, n_pulses=10, tau_tr=1.0)
    _, report = compute_epsilons(PRESET, s)
    assert report.ok
    assert report.gate("pulse_length").value == pytest.approx(40.0)

    short = PulseSchedule(tau_p=2.0, dt=0.2, n_pulses=10, tau_tr=1.0)  # (0.2)^2 = 0.04 < 0.5
    with pytest.warns(RegimeViolation, match="gap_rabi"):
        _, report = compute_epsilons(PRESET, short)
    assert "gap_rabi" in report.violations
    assert report.gate("gap_rabi").threshold == pytest.approx(0.5)


def test_itano_layout_skips_gap_gates():
    s = PulseSchedule.itano(8, 256.0, 2.4, tau_tr=2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RegimeViolation)
        _, report = compute_epsilons(AtomParams(math.pi / 256, 50, 20), s)
    assert {g.name for g in report.gates} == {"pulse_length", "transient"}


def test_schedule_invariants():
    with pytest.raises(ValidationError):
        PulseSchedule(tau_p=1.0, dt=1.0, n_pulses=0, tau_tr=0.0)
    with pytest.raises(ValidationError):
        PulseSchedule(tau_p=1.0, dt=1.0, n_pulses=4, tau_tr=0.0, pi_pulse_total=9.0)
    with pytest.raises(ValidationError):
        PulseSchedule.itano(200, 256.0, 2.4)


@given(st.integers(1, 64), st.sampled_from(["end", "start"]))
def test_itano_segments_cover_t_pi(n, position):
    s = PulseSchedule.itano(n, 256.0, 2.4, tau_tr=2.0, pulse_position=position)
    segs = s.segments()
    assert sum(g.duration for g in segs) == pytest.approx(256.0, abs=1e-9)
    assert sum(g.strong_on for g in segs) == n
    assert all(g.weak_on for g in segs)
    if position == "end":
        assert segs[-1].strong_on
        np.testing.assert_allclose(s.pulse_starts() + 2.4, 256.0 / n * np.arange(1, n + 1))


def test_transient_windows_belong_to_previous_pulse():
    s = PulseSchedule(tau_p=2.0, dt=1.0, n_pulses=3, tau_tr=0.4)
    wins = [(g.strong_on, g.window, round(g.duration, 12)) for g in s.segments()]
    assert wins[:3] == [(True, 0, 2.0), (False, 0, 0.4), (False, -1, 0.6)]
