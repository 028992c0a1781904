"""Compiled inner loop of the quantum-jump simulation.

Segment kinds are indexed as 2*strong_on + weak_on. For each kind the caller
supplies the eigendata of H_cond (eigenvalues, right vectors as columns,
reciprocal vectors as rows) or, for degenerate spectra, the matrix itself,
which is then exponentiated directly.
"""
import numpy as np
from numba import njit

from .qcore import expm_scaled

BISECTION_STEPS = 35  # 2**-35 < 1e-10
OK, EXHAUSTED = 0, 1


@njit(cache=True, nogil=True)
def propagate(kind, psi, t, lam, vr, vl, hmat, degen):
    """exp(-i H_kind t) psi."""
    out = np.zeros(3, dtype=np.complex128)
    if degen[kind]:
        u = expm_scaled(-1j * t * hmat[kind])
        for i in range(3):
            for j in range(3):
                out[i] += u[i, j] * psi[j]
        return out
    for k in range(3):
        ck = 0j
        for j in range(3):
            ck += vl[kind, k, j] * psi[j]
        ck *= np.exp(-1j * lam[kind, k] * t)
        for i in range(3):
            out[i] += vr[kind, i, k] * ck
    return out


@njit(cache=True, nogil=True)
def norm2(x):
    return (x[0] * x[0].conjugate() + x[1] * x[1].conjugate() + x[2] * x[2].conjugate()).real


@njit(cache=True, nogil=True)
def _spectral_norm2(c0, c1, c2, l0, l1, l2, v, t):
    d0 = c0 * np.exp(-1j * l0 * t)
    d1 = c1 * np.exp(-1j * l1 * t)
    d2 = c2 * np.exp(-1j * l2 * t)
    acc = 0.0
    for i in range(3):
        x = v[i, 0] * d0 + v[i, 1] * d1 + v[i, 2] * d2
        acc += x.real * x.real + x.imag * x.imag
    return acc


@njit(cache=True, nogil=True)
def jump_in_segment(kind, psi, horizon, r, lam, vr, vl, hmat, degen):
    """First emission time in (0, horizon] for normalized ``psi`` and uniform ``r``.

    Returns (emitted, t, state). Without emission the state is the
    renormalized no-photon state at ``horizon``; with emission it is |1>.
    """
    end = propagate(kind, psi, horizon, lam, vr, vl, hmat, degen)
    p_end = norm2(end)
    if p_end >= r:
        return False, horizon, end / np.sqrt(p_end)
    lo, hi = 0.0, horizon
    if degen[kind]:
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if norm2(propagate(kind, psi, mid, lam, vr, vl, hmat, degen)) > r:
                lo = mid
            else:
                hi = mid
    else:
        w = vl[kind]
        c0 = w[0, 0] * psi[0] + w[0, 1] * psi[1] + w[0, 2] * psi[2]
        c1 = w[1, 0] * psi[0] + w[1, 1] * psi[1] + w[1, 2] * psi[2]
        c2 = w[2, 0] * psi[0] + w[2, 1] * psi[1] + w[2, 2] * psi[2]
        l0, l1, l2 = lam[kind, 0], lam[kind, 1], lam[kind, 2]
        v = vr[kind]
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if _spectral_norm2(c0, c1, c2, l0, l1, l2, v, mid) > r:
                lo = mid
            else:
                hi = mid
    ground = np.zeros(3, dtype=np.complex128)
    ground[0] = 1.0
    return True, 0.5 * (lo + hi), ground


@njit(cache=True, nogil=True)
def run_one(psi0, seg_kind, seg_dur, seg_window, lam, vr, vl, hmat, degen,
            u, photons, counts):
    """Chain segments for one trajectory, consuming uniforms from ``u`` in order.

    Returns (status, uniforms_used, photon_count, final_state).
    """
    psi = psi0.copy()
    used = 0
    nph = 0
    t0 = 0.0
    for s in range(seg_kind.shape[0]):
        kind = seg_kind[s]
        elapsed = 0.0
        dur = seg_dur[s]
        while True:
            if used >= u.shape[0]:
                return EXHAUSTED, used, nph, psi
            r = 1.0 - u[used]
            used += 1
            emitted, t, psi = jump_in_segment(kind, psi, dur - elapsed, r,
                                              lam, vr, vl, hmat, degen)
            if not emitted:
                break
            elapsed += t
            photons[nph] = t0 + elapsed
            nph += 1
            if seg_window[s] >= 0:
                counts[seg_window[s]] += 1
        t0 += dur
    return OK, used, nph, psi


@njit(cache=True, nogil=True)
def run_batch(psi0, seg_kind, seg_dur, seg_window, lam, vr, vl, hmat, degen,
              u, photons, counts, status, used, nph, finals):
    for n in range(u.shape[0]):
        st, us, npn, fin = run_one(psi0, seg_kind, seg_dur, seg_window, lam, vr, vl, hmat,
                                   degen, u[n], photons[n], counts[n])
        status[n] = st
        used[n] = us
        nph[n] = npn
        finals[n] = fin
