"""Quantum-jump description of pulsed measurements.

Conditional (no-photon) evolution under H_cond, emission times from the
no-photon probability, resets to |1> after each photon, and the first-order
correction formulas for cross-validation against simulation.

Random streams: trajectory ``k`` of an ensemble with master seed ``m`` draws
its uniforms from ``Generator(PCG64(SeedSequence(m, spawn_key=(*tag, k))))``,
so a trajectory's draws depend only on ``(m, tag, k)``. ``tag`` is empty
unless an experiment needs several ensembles under one seed.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _engine
from .ideal import DivergentPeriod
from .model import (
    AtomParams,
    PulseSchedule,
    RegimeViolation,
    build_h_cond,
    compute_epsilons,
    epsilons,
    free_propagator,
)
from .qcore import eig_with_reciprocal, ket, mat_exp, normalize_density

PERTURBATIVE_EPS_LIMIT = 0.2


# --------------------------------------------------------------------------
# conditional evolution


@lru_cache(maxsize=256)
def _eig_cached(p: AtomParams, strong_on: bool, weak_on: bool):
    return eig_with_reciprocal(build_h_cond(p, strong_on, weak_on))


def cond_propagator(p: AtomParams, strong_on: bool, weak_on: bool, t: float) -> np.ndarray:
    """exp(-i H_cond t): spectral sum when the spectrum is simple, else scaling and squaring."""
    if t < 0:
        raise ValueError("t must be non-negative")
    es = _eig_cached(p, strong_on, weak_on)
    if es.is_degenerate:
        return mat_exp(build_h_cond(p, strong_on, weak_on), t)
    return es.propagator(t)


def _pulse_gate(p: AtomParams, tau_p: float, margin: float = 10.0) -> None:
    value = tau_p * min(p.a3, p.omega3**2 / p.a3)
    if value < margin:
        warnings.warn(f"pulse_length gate fails: {value:.3g} < {margin}", RegimeViolation,
                      stacklevel=3)


def no_photon_probability(psi, p: AtomParams, tau: float, mode: str = "exact",
                          strong_on: bool = True, weak_on: bool = True) -> float:
    """Probability of no emission during ``tau`` of constant drive.

    ``mode="perturbative"`` evaluates the first-order pulse formula, which
    assumes both drives on and a pulse long enough to kill the fast modes.
    """
    psi = np.asarray(psi, dtype=complex)
    if mode == "exact":
        return float(np.linalg.norm(cond_propagator(p, strong_on, weak_on, tau) @ psi) ** 2)
    if mode != "perturbative":
        raise ValueError(f"unknown mode {mode!r}")
    if not (strong_on and weak_on):
        raise ValueError("perturbative mode needs both drives on")
    _pulse_gate(p, tau)
    e = epsilons(p)
    a1, a2, a3 = psi
    return float(
        (1 - e.eps_p * p.omega2 * tau) * abs(a2) ** 2
        + 2 * e.eps_p * (a1 * np.conj(a2)).imag
        - 2 * e.eps_r * (a2 * np.conj(a3)).real
    )


def perturbative_eigensystem(p: AtomParams) -> tuple[float, np.ndarray, np.ndarray]:
    """First-order (rate, |lambda_2>, |lambda^2>) of the least-damped mode.

    The rate is the real decay constant of the amplitude, exp(-rate*t); the
    numerical eigenvalue is -i times it.
    """
    e = epsilons(p)
    if e.eps_max >= PERTURBATIVE_EPS_LIMIT:
        raise RegimeViolation(f"eps_max = {e.eps_max:.3g} is not small")
    rate = 0.5 * p.omega2 * e.eps_p
    v = np.array([-1j * e.eps_p, 1.0, -e.eps_r], dtype=complex)
    w = np.array([1j * e.eps_p, 1.0, -e.eps_r], dtype=complex)
    return rate, v, w


def numeric_eigensystem(p: AtomParams) -> tuple[float, np.ndarray, np.ndarray]:
    """Numerical counterpart of :func:`perturbative_eigensystem`.

    The right vector is unit-normalized with a real positive |2> component;
    the reciprocal vector is returned as a ket (conjugated row).
    """
    es = _eig_cached(p, True, True)
    lam = es.eigenvalues[0]
    return -lam.imag, es.right_vectors[:, 0].copy(), es.reciprocal_vectors[0].conj()


# --------------------------------------------------------------------------
# emission sampling


@dataclass(frozen=True)
class KindTables:
    """Eigendata of the four drive configurations, laid out for the compiled engine."""

    lam: np.ndarray
    vr: np.ndarray
    vl: np.ndarray
    hmat: np.ndarray
    degen: np.ndarray

    @classmethod
    def build(cls, p: AtomParams) -> "KindTables":
        lam = np.zeros((4, 3), complex)
        vr = np.zeros((4, 3, 3), complex)
        vl = np.zeros((4, 3, 3), complex)
        hmat = np.zeros((4, 3, 3), complex)
        degen = np.zeros(4, np.bool_)
        for kind in range(4):
            strong, weak = bool(kind >> 1), bool(kind & 1)
            h = build_h_cond(p, strong, weak)
            es = _eig_cached(p, strong, weak)
            hmat[kind] = h
            lam[kind] = es.eigenvalues
            vr[kind] = es.right_vectors
            vl[kind] = es.reciprocal_vectors
            degen[kind] = es.is_degenerate
        return cls(lam, vr, vl, hmat, degen)

    def args(self):
        return self.lam, self.vr, self.vl, self.hmat, self.degen


def _kind(strong_on: bool, weak_on: bool) -> int:
    return 2 * int(strong_on) + int(weak_on)


def sample_jump_time(psi, p: AtomParams, strong_on: bool, weak_on: bool, horizon: float,
                     r: float) -> tuple[float | None, np.ndarray]:
    """Emission time in (0, horizon] solving P0(t) = r, by bisection.

    Returns ``(t, |1>)`` on emission, ``(None, renormalized no-photon state)`` otherwise.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in the open interval (0, 1)")
    psi = np.asarray(psi, dtype=complex)
    tables = KindTables.build(p)
    emitted, t, state = _engine.jump_in_segment(_kind(strong_on, weak_on), psi, float(horizon),
                                                float(r), *tables.args())
    return (t if emitted else None), state


def trajectory_stream(master_seed: int, k: int, tag: tuple[int, ...] = ()) -> np.random.Generator:
    """Independent uniform stream of trajectory ``k``; ``tag`` separates ensembles sharing a seed."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(*tag, k))
    return np.random.Generator(np.random.PCG64(seq))


# --------------------------------------------------------------------------
# schedules


@dataclass
class Trajectory:
    photon_times: np.ndarray
    pulse_flags: np.ndarray
    final_state: np.ndarray
    seed: int
    pulse_counts: np.ndarray = field(repr=False, default=None)


@dataclass
class Ensemble:
    final_states: np.ndarray  # (N, 3), normalized
    pulse_counts: np.ndarray  # (N, n_pulses)
    photon_times: list[np.ndarray] | None
    master_seed: int

    @property
    def pulse_flags(self) -> np.ndarray:
        return self.pulse_counts > 0

    def population(self, level: int) -> tuple[float, float]:
        """Ensemble mean of |<level|psi>|^2 and its standard error."""
        x = np.abs(self.final_states[:, level - 1]) ** 2
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0

    def density_matrix(self) -> np.ndarray:
        f = self.final_states
        return np.einsum("ni,nj->ij", f, f.conj()) / len(f)


def _segment_arrays(s: PulseSchedule):
    segs = s.segments()
    kind = np.array([_kind(g.strong_on, g.weak_on) for g in segs], dtype=np.int64)
    dur = np.array([g.duration for g in segs], dtype=float)
    win = np.array([g.window for g in segs], dtype=np.int64)
    return kind, dur, win


def _initial_buffer(p: AtomParams, s: PulseSchedule, n_segments: int) -> int:
    bright_time = s.n_pulses * (s.tau_p + min(s.tau_tr, s.dt))
    return 16 + 2 * n_segments + int(math.ceil(0.6 * p.a3 * bright_time))


def _run_chunk(psi0, p, tables, seg, rngs, buffer):
    n = len(rngs)
    kind, dur, win = seg
    n_windows = int(win.max()) + 1 if len(win) else 0
    results = {}
    todo = list(range(n))
    size = buffer
    while todo:
        m = len(todo)
        u = np.empty((m, size))
        for row, i in enumerate(todo):
            u[row] = rngs[i]().random(size)
        photons = np.empty((m, size))
        counts = np.zeros((m, max(n_windows, 1)), dtype=np.int64)
        status = np.empty(m, np.int64)
        used = np.empty(m, np.int64)
        nph = np.empty(m, np.int64)
        finals = np.empty((m, 3), complex)
        _engine.run_batch(psi0, kind, dur, win, *tables.args(), u, photons, counts,
                          status, used, nph, finals)
        retry = []
        for row, i in enumerate(todo):
            if status[row] == _engine.EXHAUSTED:
                retry.append(i)
            else:
                results[i] = (finals[row], counts[row, :n_windows], photons[row, :nph[row]].copy())
        todo = retry
        size *= 2
    return [results[i] for i in range(n)]


def simulate_ensemble(psi0, p: AtomParams, s: PulseSchedule, n_traj: int, master_seed: int,
                      threads: int = 1, record_photons: bool = False,
                      chunk: int = 1024, tag: tuple[int, ...] = ()) -> Ensemble:
    """Run ``n_traj`` independent trajectories; output is independent of ``threads``."""
    psi0 = np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    tables = KindTables.build(p)
    seg = _segment_arrays(s)
    buffer = _initial_buffer(p, s, len(seg[0]))
    starts = list(range(0, n_traj, chunk))

    def work(a):
        b = min(a + chunk, n_traj)
        rngs = [(lambda k=k: trajectory_stream(master_seed, k, tag)) for k in range(a, b)]
        return _run_chunk(psi0, p, tables, seg, rngs, buffer)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(a) for a in starts]
    rows = [r for part in parts for r in part]
    finals = np.array([r[0] for r in rows]).reshape(n_traj, 3)
    counts = np.zeros((n_traj, s.n_pulses), dtype=np.int64)
    for i, r in enumerate(rows):
        counts[i, :len(r[1])] = r[1]  # zero-length pulses leave no windows
    photons = [r[2] for r in rows] if record_photons else None
    return Ensemble(finals, counts, photons, master_seed)


def simulate_schedule(psi0, p: AtomParams, s: PulseSchedule, seed: int) -> Trajectory:
    """One trajectory with its own stream ``Generator(PCG64(SeedSequence(seed)))``."""
    psi0 = np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    tables = KindTables.build(p)
    seg = _segment_arrays(s)
    rng = lambda: np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))  # noqa: E731
    (final, counts, photons), = _run_chunk(psi0, p, tables, seg, [rng],
                                           _initial_buffer(p, s, len(seg[0])))
    counts = np.asarray(counts)
    return Trajectory(photons, counts > 0, final, seed, counts)


def itano_jump_population(n: int, p: AtomParams, t_pi: float, tau_p: float, n_traj: int,
                          master_seed: int, threads: int = 1,
                          pulse_position: str = "end") -> tuple[float, float]:
    """Mean final |2> population (and standard error) over the Itano schedule from |1>.

    Streams are tagged with ``n`` so rows of a table never share draws.
    """
    s = PulseSchedule.itano(n, t_pi, tau_p, tau_tr=p.default_tau_tr, pulse_position=pulse_position)
    ens = simulate_ensemble(ket(1), p, s, n_traj, master_seed, threads, tag=(n,))
    return ens.population(2)


# --------------------------------------------------------------------------
# first-order correction formulas


@dataclass(frozen=True)
class CorrectionStates:
    rho0_p: np.ndarray  # 2x2, no emission, projected onto the 1-2 block
    rhoGt_p: np.ndarray  # 2x2, with emissions
    rho0_end: np.ndarray  # 3x3 at pulse end, no emission
    rhoGt_end: np.ndarray  # 3x3 at pulse end, with emissions
    exceptional: bool = False


def post_pulse_states(p: AtomParams, tau_p: float, psi=None, margin: float = 10.0) -> CorrectionStates:
    """Post-pulse states to first order in the small parameters.

    Each matrix is Hermitized, clipped to be positive semidefinite and
    renormalized. The no-emission states are built as normalized outer
    products of the first-order vectors. ``exceptional`` is set when ``psi``
    makes the emission probability itself first order small, in which case
    the emission states are not reliable.
    """
    _pulse_gate(p, tau_p, margin)
    e = epsilons(p)
    a2, w2, tp = p.a3**2, p.omega3**2, p.omega2 * tau_p
    norm = a2 + 2 * w2 + e.eps_p * tp * a2

    v3 = np.array([-1j * e.eps_p, 1.0, -e.eps_r])
    v2 = np.array([-1j * e.eps_p, 1.0])
    rho0_end = np.outer(v3, v3.conj())
    rho0_p = np.outer(v2, v2.conj())

    b = e.eps_r * (a2 + w2)
    rhoGt_end = np.array([
        [a2 + w2, 1j * e.eps_p * a2, 1j * p.a3 * p.omega3],
        [-1j * e.eps_p * a2, e.eps_p * tp * a2, b],
        [-1j * p.a3 * p.omega3, b, w2],
    ]) / norm
    off = 1j * e.eps_p * a2 - 0.5j * e.eps_a * w2
    rhoGt_p = np.array([[a2 + 2 * w2, off], [np.conj(off), e.eps_p * tp * a2]]) / norm

    exceptional = False
    if psi is not None:
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        exceptional = 1.0 - abs(psi[1]) ** 2 <= e.eps_max
    return CorrectionStates(*(normalize_density(m) for m in (rho0_p, rhoGt_p, rho0_end, rhoGt_end)),
                            exceptional=exceptional)


def first_order_rho0_p(p: AtomParams) -> np.ndarray:
    """The no-emission 1-2 block state exactly as the first-order expansion gives it (not PSD)."""
    e = epsilons(p)
    return np.array([[0.0, -1j * e.eps_p], [1j * e.eps_p, 1.0]])


def exact_rho0_p(p: AtomParams, tau_p: float, tau: float, psi=None) -> np.ndarray:
    """No-emission state after a pulse and a weak-only wait ``tau``, with the free evolution undone.

    Deterministic counterpart of the first-order no-emission state: the
    conditional no-photon evolution is the same for every trajectory that
    stays dark, so its normalized state is the ensemble of such trajectories.
    """
    psi = ket(2) if psi is None else np.asarray(psi, dtype=complex)
    x = cond_propagator(p, False, True, tau) @ (cond_propagator(p, True, True, tau_p) @ psi)
    rho = np.outer(x, x.conj()) / np.vdot(x, x).real
    u = free_propagator(p, tau)
    rho = u.conj().T @ rho @ u
    return rho[:2, :2] / np.trace(rho[:2, :2]).real


def transition_probs_pq(p: AtomParams, dt: float, tau_p: float,
                        margin: float = 10.0) -> tuple[float, float]:
    """(p, q): P(emissions -> no emissions) and P(no emissions -> no emissions) per pulse pair."""
    s = PulseSchedule(tau_p=tau_p, dt=dt, n_pulses=1, tau_tr=min(p.default_tau_tr, dt))
    e, _ = compute_epsilons(p, s, margin)
    x = p.omega2 * dt
    sn, cs = math.sin(x), math.cos(x)
    a2, w2 = p.a3**2, p.omega3**2
    tp = p.omega2 * tau_p
    den = a2 + 2 * w2
    p_val = (
        math.sin(0.5 * x) ** 2
        + e.eps_p * (2 * sn * (a2 + w2) / den + 0.5 * tp * cs * (3 * a2 + 2 * w2) / den - 0.5 * tp)
        - 0.5 * e.eps_a * sn * w2 / den
    )
    q_val = math.cos(0.5 * x) ** 2 - e.eps_p * (2 * sn + 0.5 * tp * (1 + cs))
    return p_val, q_val


def shelving_limits(p: AtomParams) -> tuple[float, float]:
    """(mean light, mean dark) period durations for continuously driven transitions."""
    t_d = p.omega3**2 / (p.omega2**2 * p.a3)
    t_l = p.omega3**2 * (p.a3**2 + 2 * p.omega3**2) / (p.omega2**2 * p.a3**3)
    return t_l, t_d


def period_statistics(p: AtomParams, dt: float, tau_p: float, mode: str = "analytic",
                      margin: float = 10.0) -> tuple[float, float]:
    """(mean light, mean dark) period durations."""
    if mode == "limit":
        return shelving_limits(p)
    if mode != "analytic":
        raise ValueError(f"unknown mode {mode!r}")
    pv, qv = transition_probs_pq(p, dt, tau_p, margin)
    if pv <= 0 or 1 - qv <= 0:
        raise DivergentPeriod(f"p = {pv:.3g}, 1 - q = {1 - qv:.3g}")
    return (tau_p + dt) / pv, (tau_p + dt) / (1 - qv)


# --------------------------------------------------------------------------
# periods


@dataclass(frozen=True)
class PeriodRecord:
    kind: str  # "light" or "dark"
    pulse_count: int
    duration: float
    truncated: bool = False


def extract_periods(t: Trajectory, s: PulseSchedule, include_truncated: bool = False) -> list[PeriodRecord]:
    """Maximal runs of equal pulse flags; the first and last runs are marked truncated."""
    flags = np.asarray(t.pulse_flags, dtype=bool)
    if len(flags) == 0:
        return []
    edges = np.flatnonzero(np.diff(flags.astype(np.int8))) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [len(flags)]))
    out = []
    last = len(starts) - 1
    for i, (a, b) in enumerate(zip(starts, ends)):
        truncated = i == 0 or i == last
        if truncated and not include_truncated:
            continue
        n = int(b - a)
        out.append(PeriodRecord("light" if flags[a] else "dark", n, n * s.period, truncated))
    return out
