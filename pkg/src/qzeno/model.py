"""V-system parameters, pulse schedules and the three generators.

Basis order is (|1>, |2>, |3>); hbar = 1 and every rate is an angular
frequency in the caller's time unit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

DEFAULT_MARGIN = 10.0
TRANSIENT_FACTOR = 40.0  # default tau_tr = 40 / A3


class RegimeViolation(UserWarning):
    """A "much greater than" condition of the measurement regime does not hold."""


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class AtomParams:
    omega2: float  # weak 1-2 drive
    omega3: float  # strong 1-3 pulse drive
    a3: float  # Einstein coefficient of level 3

    def __post_init__(self):
        if not (self.omega2 >= 0 and self.omega3 > 0 and self.a3 > 0):
            raise ValidationError(
                f"need omega2 >= 0, omega3 > 0, a3 > 0; got {self.omega2}, {self.omega3}, {self.a3}"
            )

    @property
    def max_rate(self) -> float:
        return max(self.omega2, self.omega3, self.a3)

    @property
    def default_tau_tr(self) -> float:
        return TRANSIENT_FACTOR / self.a3


@dataclass(frozen=True)
class Epsilons:
    eps_a: float
    eps_r: float
    eps_p: float

    @property
    def eps_max(self) -> float:
        return max(self.eps_a, self.eps_r, self.eps_p)


def epsilons(p: AtomParams) -> Epsilons:
    return Epsilons(p.omega2 / p.a3, p.omega2 / p.omega3, p.omega2 * p.a3 / p.omega3**2)


class Segment(NamedTuple):
    duration: float
    strong_on: bool
    weak_on: bool
    window: int  # index of the pulse whose fluorescence window covers this segment, -1 if none


@dataclass(frozen=True)
class PulseSchedule:
    """Piecewise-constant drive schedule.

    Single-atom layout (``pi_pulse_total is None``): ``n_pulses`` repetitions
    of a strong pulse of length ``tau_p`` followed by a weak-only gap ``dt``.
    Itano layout: the weak drive runs for ``pi_pulse_total``; each of the
    ``n_pulses`` intervals of length ``pi_pulse_total / n_pulses`` holds a gap
    ``dt`` and a pulse, with the pulse flush at the interval end (or start,
    for ``pulse_position="start"``).

    A pulse's fluorescence window is the pulse plus up to ``tau_tr`` of the
    following weak-only time.
    """

    tau_p: float
    dt: float
    n_pulses: int
    tau_tr: float
    weak_on_during_pulse: bool = True
    pi_pulse_total: float | None = None
    pulse_position: str = "end"

    def __post_init__(self):
        if self.tau_p < 0 or self.dt < 0 or self.tau_tr < 0:
            raise ValidationError("tau_p, dt and tau_tr must be non-negative")
        if self.n_pulses < 1:
            raise ValidationError("n_pulses must be at least 1")
        if self.pulse_position not in ("end", "start"):
            raise ValidationError("pulse_position must be 'end' or 'start'")
        if self.pi_pulse_total is not None:
            total = self.n_pulses * (self.dt + self.tau_p)
            if abs(total - self.pi_pulse_total) > 1e-12 * max(1.0, self.pi_pulse_total):
                raise ValidationError(
                    f"n_pulses*(dt+tau_p) = {total!r} differs from pi_pulse_total = {self.pi_pulse_total!r}"
                )

    @classmethod
    def itano(cls, n: int, t_pi: float, tau_p: float, tau_tr: float = 0.0,
              pulse_position: str = "end") -> "PulseSchedule":
        if n < 1:
            raise ValidationError("n_pulses must be at least 1")
        dt = t_pi / n - tau_p
        if dt < 0:
            raise ValidationError(f"n*tau_p = {n * tau_p} exceeds T_pi = {t_pi}")
        return cls(tau_p=tau_p, dt=dt, n_pulses=n, tau_tr=tau_tr, weak_on_during_pulse=True,
                   pi_pulse_total=t_pi, pulse_position=pulse_position)

    @property
    def itano_mode(self) -> bool:
        return self.pi_pulse_total is not None

    @property
    def period(self) -> float:
        return self.tau_p + self.dt

    @property
    def total_time(self) -> float:
        return self.n_pulses * self.period

    def segments(self) -> list[Segment]:
        """Constant-drive segments in time order, gaps split at the transient boundary."""
        segs: list[Segment] = []
        pulse_first = not self.itano_mode or self.pulse_position == "start"
        for k in range(self.n_pulses):
            pulse = Segment(self.tau_p, True, self.weak_on_during_pulse, k)
            if pulse_first:
                segs.append(pulse)
                segs.extend(self._gap(k))
            else:
                segs.extend(self._gap(k - 1 if k > 0 else -1))
                segs.append(pulse)
        return [s for s in segs if s.duration > 0]

    def _gap(self, owner: int) -> list[Segment]:
        if owner < 0:
            return [Segment(self.dt, False, True, -1)]
        tr = min(self.tau_tr, self.dt)
        return [Segment(tr, False, True, owner), Segment(self.dt - tr, False, True, -1)]

    def pulse_starts(self) -> np.ndarray:
        offset = 0.0 if (not self.itano_mode or self.pulse_position == "start") else self.dt
        return offset + self.period * np.arange(self.n_pulses)


def build_h_cond(p: AtomParams, strong_on: bool, weak_on: bool) -> np.ndarray:
    """Non-Hermitian conditional Hamiltonian (hbar = 1)."""
    h = np.zeros((3, 3), dtype=complex)
    if weak_on:
        h[0, 1] = h[1, 0] = 0.5 * p.omega2
    if strong_on:
        h[0, 2] = h[2, 0] = 0.5 * p.omega3
    h[2, 2] = -0.5j * p.a3
    return h


def hermitian_part(p: AtomParams, strong_on: bool, weak_on: bool) -> np.ndarray:
    h = build_h_cond(p, strong_on, weak_on)
    h[2, 2] = 0.0
    return h


def free_propagator(p: AtomParams, t: float) -> np.ndarray:
    """Resonant two-level Rabi propagator on the 1-2 block, identity on |3>."""
    if t < 0:
        raise ValueError("t must be non-negative")
    c, s = math.cos(0.5 * p.omega2 * t), math.sin(0.5 * p.omega2 * t)
    return np.array([[c, -1j * s, 0], [-1j * s, c, 0], [0, 0, 1]], dtype=complex)


@dataclass(frozen=True)
class LindbladGenerator:
    """rho -> -i(H_cond rho - rho H_cond^dag) + A3 <3|rho|3> |1><1|."""

    h_cond: np.ndarray
    a3: float
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        eye = np.eye(3)
        h, hd = self.h_cond, self.h_cond.conj().T
        # row-major vec: vec(A X B) = kron(A, B^T) vec(X)
        sup = -1j * (np.kron(h, eye) - np.kron(eye, hd.T))
        reset = np.zeros((9, 9), dtype=complex)
        reset[0, 8] = self.a3
        object.__setattr__(self, "matrix", sup + reset)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        h = self.h_cond
        out = -1j * (h @ rho - rho @ h.conj().T)
        out[0, 0] += self.a3 * rho[2, 2]
        return out


def lindblad_generator(p: AtomParams, strong_on: bool, weak_on: bool) -> LindbladGenerator:
    return LindbladGenerator(build_h_cond(p, strong_on, weak_on), p.a3)


@dataclass(frozen=True)
class Gate:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.value >= self.threshold

    @property
    def margin_ratio(self) -> float:
        return self.value / self.threshold if self.threshold > 0 else math.inf


@dataclass(frozen=True)
class RegimeReport:
    gates: tuple[Gate, ...]

    @property
    def ok(self) -> bool:
        return all(g.passed for g in self.gates)

    @property
    def violations(self) -> list[str]:
        return [g.name for g in self.gates if not g.passed]

    def gate(self, name: str) -> Gate:
        return next(g for g in self.gates if g.name == name)


def compute_epsilons(p: AtomParams, s: PulseSchedule, margin: float = DEFAULT_MARGIN,
                     warn: bool = True) -> tuple[Epsilons, RegimeReport]:
    """Small parameters plus the pulse, transient and gap conditions.

    Gate values are dimensionless ratios compared against ``margin`` (the
    Rabi gate against ``margin * eps_max``). Gap gates apply only to the
    single-atom layout.
    """
    eps = epsilons(p)
    gates = [
        Gate("pulse_length", s.tau_p * min(p.a3, p.omega3**2 / p.a3), margin),
        Gate("transient", s.tau_tr * p.a3, margin),
    ]
    if not s.itano_mode:
        gates += [
            Gate("gap_decay", s.dt * p.a3, margin),
            Gate("gap_rabi", (p.omega2 * s.dt) ** 2, margin * eps.eps_max),
        ]
    report = RegimeReport(tuple(gates))
    if warn and not report.ok:
        warnings.warn(f"regime conditions violated: {', '.join(report.violations)}",
                      RegimeViolation, stacklevel=2)
    return eps, report
