"""Dense eigenvalue solver: Hessenberg reduction + shifted QR iteration.

Sized for the small Jacobians this package produces (N up to a few
hundred).  Matrices are reduced to upper Hessenberg form with Householder
reflections, then eigenvalues are extracted by an explicit single-shift
QR iteration in complex arithmetic (Wilkinson shifts, bottom-up deflation,
occasional exceptional shifts to break limit cycles).

Accuracy is that of unbalanced QR: fine for the well-scaled matrices at
hand, degraded for strongly non-normal or defective ones.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .errors import EigenConvergenceError, InputError

_EPS = float(np.finfo(np.float64).eps)
_MAX_ITER_PER_BLOCK = 200
_EXC_EVERY = 12  # iterations between exceptional shifts


def _hessenberg(A: np.ndarray) -> np.ndarray:
    """Householder reduction to upper Hessenberg (unitary similarity)."""
    H = np.array(A, dtype=np.complex128)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k]
        norm_x = float(np.linalg.norm(x))
        if norm_x == 0.0:
            continue
        x0 = complex(x[0])
        phase = x0 / abs(x0) if x0 != 0.0 else 1.0
        v = x.copy()
        v[0] -= -phase * norm_x  # alpha chosen to avoid cancellation
        vnorm = float(np.linalg.norm(v))
        if vnorm == 0.0:
            continue
        v /= vnorm
        # P = I - 2 v v^H applied from both sides
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H


def _two_by_two(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]] in complex arithmetic."""
    tr2 = 0.5 * (a + d)
    disc = cmath.sqrt(tr2 * tr2 - (a * d - b * c))
    return tr2 + disc, tr2 - disc


def _wilkinson_shift(a, b, c, d):
    """Eigenvalue of the trailing 2x2 block closest to its bottom entry."""
    l1, l2 = _two_by_two(a, b, c, d)
    return l1 if abs(l1 - d) <= abs(l2 - d) else l2


def eigvals(A) -> np.ndarray:
    """All eigenvalues of a real or complex square matrix.

    Raises:
        EigenConvergenceError: a block failed to deflate within the
            iteration budget.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"need a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix entries must be finite")
    n = A.shape[0]
    if n == 0:
        return np.array([], dtype=np.complex128)
    if n == 1:
        return np.array([complex(A[0, 0])], dtype=np.complex128)

    H = _hessenberg(A)
    out = []
    m = n  # active block is H[:m, :m]
    stalled = 0
    while m > 0:
        if m == 1:
            out.append(H[0, 0])
            break
        # zero the bottom-most negligible subdiagonal of the active block
        # and locate the start of the trailing unreduced part
        lo = 0
        for k in range(m - 1, 0, -1):
            h = abs(H[k, k - 1])
            if h <= _EPS * (abs(H[k - 1, k - 1]) + abs(H[k, k])) or h < 1e-300:
                H[k, k - 1] = 0.0
                lo = k
                break
        if lo == m - 1:
            out.append(H[m - 1, m - 1])
            m -= 1
            stalled = 0
            continue
        if lo == m - 2:
            l1, l2 = _two_by_two(
                H[m - 2, m - 2], H[m - 2, m - 1], H[m - 1, m - 2], H[m - 1, m - 1]
            )
            out.extend([l1, l2])
            m -= 2
            stalled = 0
            continue

        stalled += 1
        if stalled > _MAX_ITER_PER_BLOCK:
            raise EigenConvergenceError(
                f"QR iteration failed to deflate a block of size {m - lo}"
            )
        if stalled % _EXC_EVERY == 0:
            sigma = H[m - 1, m - 1] + 1.5 * abs(H[m - 1, m - 2])
        else:
            sigma = _wilkinson_shift(
                H[m - 2, m - 2], H[m - 2, m - 1], H[m - 1, m - 2], H[m - 1, m - 1]
            )

        # one explicit shifted QR sweep on the active block (a similarity,
        # so eigenvalues are preserved; subdiagonals contract toward zero)
        B = H[lo:m, lo:m]
        sz = m - lo
        for j in range(sz):
            B[j, j] -= sigma
        rots = []
        for j in range(sz - 1):
            a, b = complex(B[j, j]), complex(B[j + 1, j])
            r = math.hypot(abs(a), abs(b))
            if r == 0.0:
                rots.append((1.0 + 0.0j, 0.0 + 0.0j))
                continue
            ca, cb = a.conjugate() / r, b.conjugate() / r
            rots.append((ca, cb))
            upper = B[j, j:].copy()
            lower = B[j + 1, j:]
            B[j, j:] = ca * upper + cb * lower
            B[j + 1, j:] = -cb.conjugate() * upper + ca.conjugate() * lower
        for j in range(sz - 1):
            ca, cb = rots[j]
            left = B[: j + 2, j].copy()
            right = B[: j + 2, j + 1]
            B[: j + 2, j] = left * ca.conjugate() + right * cb.conjugate()
            B[: j + 2, j + 1] = -left * cb + right * ca
        for j in range(sz):
            B[j, j] += sigma

    return np.array(out, dtype=np.complex128)


def spectral_bound(A) -> float:
    """Largest real part over the spectrum of A."""
    return float(np.max(eigvals(A).real))
