"""Ideal (projective, instantaneous) repeated measurements of the level population."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LEVEL1, LEVEL2 = 1, 2

# Printed value of the n = 64 entry of the first projection-postulate column of
# the reference table; the closed form gives 0.0371..., a factor ten larger.
PRINTED_COL1_N64 = 0.00371


class DivergentPeriod(ArithmeticError):
    pass


def flip_probability(dt: float, omega2: float) -> float:
    """Probability that the next measurement finds the other level."""
    return math.sin(0.5 * omega2 * dt) ** 2


def ideal_survival(psi_kind: int, n: int, dt: float, omega2: float) -> float:
    """Probability that all ``n`` measurements return the initial level (either level)."""
    if psi_kind not in (LEVEL1, LEVEL2):
        raise ValueError("psi_kind must be 1 or 2")
    if n < 0 or dt < 0:
        raise ValueError("n and dt must be non-negative")
    return math.cos(0.5 * omega2 * dt) ** (2 * n)


def cook_population(n: int, dt: float, omega2: float) -> float:
    """P2 after ``n`` ideal measurements spaced ``dt`` apart, starting in |1>.

    The two-state chain has flip probability s = sin^2(omega2 dt / 2); its
    n-step 1 -> 2 probability is (1 - (1 - 2s)^n) / 2 with 1 - 2s = cos(omega2 dt).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    return 0.5 * (1.0 - math.cos(omega2 * dt) ** n)


def ideal_period_stats(dt: float, omega2: float) -> tuple[float, float]:
    """Mean and standard deviation of light (equivalently dark) period lengths."""
    s2 = math.sin(0.5 * omega2 * dt) ** 2
    if s2 == 0.0:
        raise DivergentPeriod("flip probability vanishes; periods never end")
    return dt / s2, dt * abs(math.cos(0.5 * omega2 * dt)) / s2


@dataclass
class IdealPath:
    outcomes: np.ndarray  # level found at measurement k, k = 1..n
    dt: float
    start: int
    omega2: float

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(1, len(self.outcomes) + 1)

    def population_trace(self, samples_per_step: int = 8) -> tuple[np.ndarray, np.ndarray]:
        """P2(t) between measurements, restarted from each projected state."""
        tau = np.linspace(0.0, self.dt, samples_per_step, endpoint=False)
        prev = np.concatenate(([self.start], self.outcomes[:-1]))
        rise = np.sin(0.5 * self.omega2 * tau) ** 2
        p2 = np.where(prev[:, None] == LEVEL2, 1.0 - rise, rise)
        t = (self.dt * np.arange(len(prev)))[:, None] + tau
        t_all = np.append(t.ravel(), self.dt * len(prev))
        p2_all = np.append(p2.ravel(), float(self.outcomes[-1] == LEVEL2))
        return t_all, p2_all


def sample_ideal_path(start: int, n: int, dt: float, omega2: float,
                      rng: np.random.Generator) -> IdealPath:
    if n < 1:
        raise ValueError("n must be at least 1")
    if start not in (LEVEL1, LEVEL2):
        raise ValueError("start must be 1 or 2")
    flips = rng.random(n) < flip_probability(dt, omega2)
    parity = np.cumsum(flips) % 2
    outcomes = np.where(parity == 0, start, 3 - start).astype(np.int8)
    return IdealPath(outcomes, dt, start, omega2)


def run_lengths(outcomes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(level, length) of each maximal run of equal outcomes."""
    outcomes = np.asarray(outcomes)
    if len(outcomes) == 0:
        return np.array([], dtype=int), np.array([], dtype=int)
    edges = np.flatnonzero(np.diff(outcomes)) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [len(outcomes)]))
    return outcomes[starts], ends - starts
