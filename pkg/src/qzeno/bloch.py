"""Fixed-step RK4 integration of the three-level master equation over pulse schedules."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import AtomParams, PulseSchedule, lindblad_generator
from .qcore import ket, projector

STEP_LIMIT = 0.1  # step * max rate must not exceed this
DEFAULT_STEP_FACTOR = 0.02
POSITIVITY_TOL = 1e-6


class StepTooLarge(ValueError):
    pass


class PositivityLoss(RuntimeWarning):
    pass


def default_step(p: AtomParams) -> float:
    return DEFAULT_STEP_FACTOR / p.max_rate


def rk4_step_matrix(gen: np.ndarray, h: float) -> np.ndarray:
    """One classic RK4 step of d(vec rho)/dt = gen @ vec rho, as a matrix.

    The four stages are applied to every basis vector at once, so the result
    is the linear map a single RK4 step performs.
    """
    y = np.eye(gen.shape[0], dtype=complex)
    k1 = gen @ y
    k2 = gen @ (y + 0.5 * h * k1)
    k3 = gen @ (y + 0.5 * h * k2)
    k4 = gen @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class BlochTrace:
    times: np.ndarray
    populations: np.ndarray  # (len(times), 3)
    traces: np.ndarray


def integrate_master(rho0, p: AtomParams, s: PulseSchedule, step: float | None = None,
                     sample_every: float | None = None) -> tuple[np.ndarray, BlochTrace | None]:
    """Integrate the master equation through the schedule.

    Every segment gets an integer number of equal steps no longer than
    ``step``, so segment boundaries are hit exactly. Runs of steps are applied
    as powers of the RK4 step matrix. With ``sample_every`` the state is
    recorded on (roughly) that grid, otherwise no trace is returned.
    """
    step = default_step(p) if step is None else step
    if step <= 0 or step * p.max_rate > STEP_LIMIT * (1 + 1e-12):
        raise StepTooLarge(f"step {step:g} exceeds {STEP_LIMIT}/max rate = {STEP_LIMIT / p.max_rate:g}")
    vec = np.asarray(rho0, dtype=complex).reshape(9).copy()
    gens = {}
    t = 0.0
    times, pops, traces = [0.0], [vec[[0, 4, 8]].real.copy()], [vec[[0, 4, 8]].sum().real]
    for seg in s.segments():
        key = (seg.strong_on, seg.weak_on)
        if key not in gens:
            gens[key] = lindblad_generator(p, *key).matrix
        n_steps = max(1, math.ceil(seg.duration / step - 1e-9))
        h = seg.duration / n_steps
        stepper = rk4_step_matrix(gens[key], h)
        if sample_every is None:
            vec = np.linalg.matrix_power(stepper, n_steps) @ vec
        else:
            chunk = max(1, int(round(sample_every / h)))
            block = np.linalg.matrix_power(stepper, chunk)
            done = 0
            while done < n_steps:
                k = min(chunk, n_steps - done)
                vec = (block if k == chunk else np.linalg.matrix_power(stepper, k)) @ vec
                done += k
                times.append(t + done * h)
                pops.append(vec[[0, 4, 8]].real.copy())
                traces.append(vec[[0, 4, 8]].sum().real)
        t += seg.duration
    rho = vec.reshape(3, 3)
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -POSITIVITY_TOL:
        warnings.warn("density matrix lost positivity", PositivityLoss, stacklevel=2)
    trace = None
    if sample_every is not None:
        trace = BlochTrace(np.array(times), np.array(pops), np.array(traces))
    return rho, trace


def itano_bloch_population(n: int, p: AtomParams, t_pi: float, tau_p: float,
                           step: float | None = None, pulse_position: str = "end") -> float:
    """Final rho_22 after the weak pi pulse interrupted by ``n`` strong pulses, from |1><1|."""
    if n * tau_p >= t_pi:
        raise ValueError("n * tau_p must be shorter than T_pi")
    s = PulseSchedule.itano(n, t_pi, tau_p, tau_tr=p.default_tau_tr, pulse_position=pulse_position)
    rho, _ = integrate_master(projector(ket(1)), p, s, step)
    return float(rho[1, 1].real)
