"""Small dense complex linear algebra (dimension 2 or 3).

Everything here works in the propagator convention used across the package:
a generator ``m`` stands for H/hbar, and ``mat_exp(m, t)`` returns
``exp(-i m t)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

DEFAULT_DEGENERACY_GAP = 1e-8
NEWTON_MAX_ITER = 60


class NonConvergence(ArithmeticError):
    """Root polishing did not reach the residual target within the iteration cap."""


@dataclass(frozen=True)
class EigSystem:
    """Biorthogonal eigensystem of a (possibly non-normal) matrix.

    ``right_vectors[:, i]`` is |lambda_i>; ``reciprocal_vectors[i, :]`` is
    the row <lambda^i| with <lambda^j|lambda_i> = delta_ij.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    reciprocal_vectors: np.ndarray
    is_degenerate: bool

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return (self.right_vectors * self.eigenvalues) @ self.reciprocal_vectors

    def propagator(self, t: float) -> np.ndarray:
        """sum_i exp(-i lambda_i t) |lambda_i><lambda^i|."""
        phases = np.exp(-1j * self.eigenvalues * t)
        return (self.right_vectors * phases) @ self.reciprocal_vectors


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 3):
        raise ValueError(f"expected a square 2x2 or 3x3 matrix, got shape {m.shape}")
    return m


def charpoly(m: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients, highest power first."""
    m = as_matrix(m)
    tr = np.trace(m)
    if m.shape[0] == 2:
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        return np.array([1.0, -tr, det], dtype=complex)
    minors = (
        m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
    )
    det = (
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )
    return np.array([1.0, -tr, minors, -det], dtype=complex)


def _closed_form_roots(coeffs: np.ndarray) -> np.ndarray:
    if len(coeffs) == 3:
        _, b, c = coeffs
        sq = np.sqrt(b * b / 4 - c + 0j)
        # pick the sign that avoids cancellation, recover the other root from the product
        r1 = -b / 2 + sq if abs(-b / 2 + sq) >= abs(-b / 2 - sq) else -b / 2 - sq
        r2 = c / r1 if r1 != 0 else -b - r1
        return np.array([r1, r2])
    _, a2, a1, a0 = coeffs
    p = a1 - a2 * a2 / 3
    q = 2 * a2**3 / 27 - a2 * a1 / 3 + a0
    sq = np.sqrt((q / 2) ** 2 + (p / 3) ** 3 + 0j)
    u = -q / 2 + sq
    if abs(-q / 2 - sq) > abs(u):
        u = -q / 2 - sq
    shift = -a2 / 3
    if u == 0:
        return np.full(3, shift, dtype=complex)
    c = u ** (1 / 3)
    omega = np.exp(2j * np.pi / 3)
    ks = c * omega ** np.arange(3)
    return ks - p / (3 * ks) + shift


def _polish(coeffs: np.ndarray, root: complex) -> tuple[complex, float]:
    """Newton iterations on the polynomial; returns the best root and its |p(root)|."""
    dcoeffs = np.polyder(coeffs)
    best, best_res = root, abs(np.polyval(coeffs, root))
    z = root
    for _ in range(NEWTON_MAX_ITER):
        if best_res == 0:
            break
        df = np.polyval(dcoeffs, z)
        if df == 0:
            break
        z = z - np.polyval(coeffs, z) / df
        res = abs(np.polyval(coeffs, z))
        if res < best_res:
            best, best_res = z, res
        else:
            break
    return best, best_res


def _null_vector(a: np.ndarray) -> np.ndarray:
    """Right null vector of a rank-deficient 2x2 / 3x3 matrix (bilinear, no conjugation)."""
    if a.shape[0] == 2:
        cands = [np.array([-a[0, 1], a[0, 0]]), np.array([-a[1, 1], a[1, 0]])]
    else:
        r = a
        cands = [np.cross(r[0], r[1]), np.cross(r[0], r[2]), np.cross(r[1], r[2])]
    best = max(cands, key=np.linalg.norm)
    return best


def _fix_phase(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    k = np.argmax(np.abs(v))
    return v * (abs(v[k]) / v[k])


def eig_with_reciprocal(m, degeneracy_gap: float = DEFAULT_DEGENERACY_GAP) -> EigSystem:
    """Eigenvalues, unit right eigenvectors and reciprocal vectors of ``m``.

    Roots of the characteristic polynomial come from the closed form and are
    Newton-polished; each eigenvector is the cross-product null vector of
    ``m - lambda`` refined by one inverse-iteration step. Eigenvalues are
    ordered by descending imaginary part (least damped first).
    """
    m = as_matrix(m)
    n = m.shape[0]
    norm = np.linalg.norm(m)
    if norm == 0:
        eye = np.eye(n, dtype=complex)
        return EigSystem(np.zeros(n, dtype=complex), eye, eye.copy(), True)

    coeffs = charpoly(m)
    roots = _closed_form_roots(coeffs)
    polished = []
    for r in roots:
        z, res = _polish(coeffs, r)
        # residual relative to the size of p(z) terms, or to ||m||^n near z = 0
        scale = max(np.polyval(np.abs(coeffs), abs(z)), norm**n)
        if not np.isfinite(z) or res > 1e-8 * scale:
            raise NonConvergence(f"root {r} did not converge (residual {res:.3g})")
        polished.append(z)
    lam = np.array(polished)

    tie = 1e-12 * norm
    order = sorted(range(n), key=lambda i: (-np.round(lam[i].imag / tie), -lam[i].real))
    lam = lam[order]

    gaps = [abs(lam[i] - lam[j]) for i in range(n) for j in range(i + 1, n)]
    degenerate = min(gaps) <= degeneracy_gap * norm

    eye = np.eye(n, dtype=complex)
    vecs = []
    for i, z in enumerate(lam):
        a = m - z * eye
        v = _null_vector(a)
        if np.linalg.norm(v) <= 1e-14 * norm ** (n - 1):
            v = eye[:, i].copy()
        else:
            shift = z + 1e-10 * norm
            try:
                v = np.linalg.solve(m - shift * eye, v)
            except np.linalg.LinAlgError:
                pass
        vecs.append(_fix_phase(v))
    right = np.column_stack(vecs)
    try:
        recip = np.linalg.inv(right)
    except np.linalg.LinAlgError:
        degenerate = True
        recip = np.linalg.pinv(right)
    if not np.all(np.isfinite(recip)) or np.linalg.cond(right) > 1e12:
        degenerate = True
    return EigSystem(lam, right, recip, bool(degenerate))


@njit(cache=True, nogil=True)
def expm_scaled(x):
    """exp(x) for a small complex matrix by scaling and squaring with a Taylor core."""
    n = x.shape[0]
    nrm = 0.0
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += abs(x[i, j])
        nrm = max(nrm, col)
    s = 0
    while nrm > 0.5:
        nrm *= 0.5
        s += 1
    y = x / (2.0**s)
    result = np.eye(n, dtype=np.complex128)
    term = np.eye(n, dtype=np.complex128)
    for k in range(1, 19):
        term = term @ y / k
        result = result + term
    for _ in range(s):
        result = result @ result
    return result


def mat_exp(m, t: float) -> np.ndarray:
    """exp(-i m t), scaling and squaring; valid for degenerate and defective ``m``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    m = as_matrix(m)
    out = expm_scaled(np.ascontiguousarray(-1j * t * m))
    if not np.all(np.isfinite(out)):
        raise OverflowError("matrix exponential overflowed")
    return out


def ket(index: int, dim: int = 3) -> np.ndarray:
    """Basis vector |index> with 1-based level labels."""
    v = np.zeros(dim, dtype=complex)
    v[index - 1] = 1.0
    return v


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def normalize_density(rho: np.ndarray, clip_negative: bool = True) -> np.ndarray:
    """Hermitian, unit-trace, and (optionally) eigenvalue-clipped copy of ``rho``."""
    rho = hermitize(np.asarray(rho, dtype=complex))
    if clip_negative:
        w, v = np.linalg.eigh(rho)
        if w.min() < 0:
            rho = hermitize((v * np.clip(w, 0, None)) @ v.conj().T)
    return rho / np.trace(rho).real


def check_density(rho: np.ndarray, tol: float = 1e-10, psd_tol: float = 1e-8) -> None:
    rho = np.asarray(rho)
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(hermitize(rho)).min() < -psd_tol:
        raise ValueError("density matrix has a negative eigenvalue")
