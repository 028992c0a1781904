import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qzeno.bloch import (
    PositivityLoss,
    StepTooLarge,
    default_step,
    integrate_master,
    itano_bloch_population,
    rk4_step_matrix,
)
from qzeno.model import AtomParams, PulseSchedule, RegimeViolation, lindblad_generator
from qzeno.qcore import check_density, ket, projector

PRESET = AtomParams(1.0, 50.0, 20.0)
ITANO = AtomParams(math.pi / 256, 50.0, 20.0)


def test_pure_decay():
    p = AtomParams(0.0, 1.0, 2.0)
    rho, _ = integrate_master(projector(ket(3)), p, PulseSchedule(tau_p=0.0, dt=1.0, n_pulses=1, tau_tr=0.0),
                              step=1e-3)
    assert rho[2, 2].real == pytest.approx(math.exp(-2), abs=1e-10)
    assert rho[0, 0].real == pytest.approx(1 - math.exp(-2), abs=1e-10)


def test_decay_rate_fit():
    p = AtomParams(0.0, 1.0, 2.0)
    _, trace = integrate_master(projector(ket(3)), p, PulseSchedule(0.0, 2.0, 1, 0.0), step=1e-3,
                                sample_every=0.1)
    slope = np.polyfit(trace.times, np.log(trace.populations[:, 2]), 1)[0]
    assert -slope == pytest.approx(2.0, abs=1e-6)


def test_weak_pi_pulse():
    p = AtomParams(1.0, 50.0, 20.0)
    s = PulseSchedule(tau_p=0.0, dt=math.pi, n_pulses=1, tau_tr=0.0)
    rho, _ = integrate_master(projector(ket(1)), p, s, step=1e-3)
    assert rho[1, 1].real == pytest.approx(1.0, abs=1e-8)


def test_step_precondition():
    s = PulseSchedule(tau_p=1.0, dt=1.0, n_pulses=1, tau_tr=0.0)
    with pytest.raises(StepTooLarge):
        integrate_master(projector(ket(1)), PRESET, s, step=0.01)
    assert default_step(PRESET) == pytest.approx(0.02 / 50)


def test_richardson_ratio():
    gen = lindblad_generator(PRESET, True, True).matrix
    rho0 = projector(ket(2)).reshape(9)

    def run(h):
        n = int(round(1.0 / h))
        return np.linalg.matrix_power(rk4_step_matrix(gen, 1.0 / n), n) @ rho0

    a, b, c = run(1e-3), run(5e-4), run(2.5e-4)
    ratio = np.max(np.abs(a - b)) / np.max(np.abs(b - c))
    assert ratio == pytest.approx(16, abs=4)


def test_step_matrix_matches_sequential_rk4():
    gen = lindblad_generator(PRESET, True, True)
    rho = projector((ket(1) + ket(2)) / math.sqrt(2))
    h = 1e-3
    y = rho.copy()
    for _ in range(5):
        k1 = gen(y)
        k2 = gen(y + 0.5 * h * k1)
        k3 = gen(y + 0.5 * h * k2)
        k4 = gen(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    via_matrix = np.linalg.matrix_power(rk4_step_matrix(gen.matrix, h), 5) @ rho.reshape(9)
    np.testing.assert_allclose(via_matrix.reshape(3, 3), y, atol=1e-14)


@given(st.integers(1, 64))
def test_itano_trace_and_hermiticity(n):
    s = PulseSchedule.itano(n, 256.0, 2.4, tau_tr=ITANO.default_tau_tr)
    with warnings.catch_warnings():
        warnings.simplefilter("error", PositivityLoss)
        rho, trace = integrate_master(projector(ket(1)), ITANO, s, sample_every=s.period)
    assert np.max(np.abs(trace.traces - 1)) <= 1e-10
    check_density(rho, tol=1e-10, psd_tol=1e-8)


def test_itano_rows():
    assert itano_bloch_population(1, ITANO, 256.0, 2.4) == pytest.approx(0.99978, abs=1e-3)
    with pytest.raises(ValueError):
        itano_bloch_population(200, ITANO, 256.0, 2.4)


def test_ineffective_pulses_give_full_transfer():
    # strong drive far too weak to measure anything: plain Rabi pi pulse
    p = AtomParams(math.pi / 256, 1e-9, 20.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeViolation)
        assert itano_bloch_population(8, p, 256.0, 2.4) == pytest.approx(1.0, abs=1e-8)


def test_segment_boundaries_hit_exactly():
    s = PulseSchedule(tau_p=0.37, dt=1.13, n_pulses=3, tau_tr=0.2)
    _, trace = integrate_master(projector(ket(1)), PRESET, s, sample_every=10.0)
    assert trace.times[-1] == pytest.approx(s.total_time, abs=1e-12)
