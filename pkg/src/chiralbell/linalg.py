"""Dense complex linear algebra for small (2-16 dimensional) operators.

Everything here works on plain ``numpy`` arrays of dtype ``complex128``.
The matrix exponential is a batched Padé scaling-and-squaring routine
(Higham 2005) so that whole grids of time-step generators can be
exponentiated at once; it never diagonalizes, which matters close to
exceptional points where eigenvector bases degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DIM = 16
DEFECTIVE_COND = 1e8


class LinAlgError(RuntimeError):
    """Raised when an iterative kernel fails to converge."""


def as_complex_matrix(m, square: bool = False) -> np.ndarray:
    """Return ``m`` as a finite complex128 2-D array.

    Raises ``ValueError`` for wrong dimensionality, non-square input (when
    ``square`` is set) or non-finite entries.
    """
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def kron(a, b) -> np.ndarray:
    """Kronecker product; ``a`` is the left (first-qubit) factor."""
    return np.kron(as_complex_matrix(a), as_complex_matrix(b))


@dataclass(frozen=True)
class SpectrumResult:
    """Eigen-decomposition of a (possibly non-normal) square matrix.

    Attributes
    ----------
    eigenvalues : ndarray, shape (n,)
        Sorted by real part, then imaginary part.
    eigenvectors : ndarray, shape (n, n)
        Unit-norm right eigenvectors stored as columns, same order.
    eigvec_condition : float
        2-norm condition number of the eigenvector matrix.
    near_defective : bool
        ``eigvec_condition > 1e8``; the standard proxy for EP proximity.
    residual : float
        ``max_i ||M v_i - lambda_i v_i||``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    eigvec_condition: float
    near_defective: bool
    residual: float


def eig_general(m) -> SpectrumResult:
    """Eigenvalues and right eigenvectors of a general complex matrix.

    Backed by LAPACK ``zgeev`` (Hessenberg reduction, shifted QR sweeps,
    back-substitution), applied to ``m - (tr m / n) I`` so that rounding
    errors scale with the spread of the spectrum rather than its offset;
    this sharpens coalescing pairs sitting far from the origin.  The residual is checked against ``1e-9 ||m||``;
    near a defective point (eigenvector condition above ``1e8``) the bound
    relaxes to ``1e-6 ||m||``.

    Raises
    ------
    ValueError
        Non-square input or dimension above 16.
    LinAlgError
        QR iteration did not converge, or the residual bound is violated.
    """
    a = as_complex_matrix(m, square=True)
    n = a.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds {MAX_DIM}")
    shift = np.trace(a) / n if n else 0.0
    try:
        w, v = np.linalg.eig(a - shift * np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise LinAlgError(f"eigenvalue iteration did not converge: {exc}") from exc
    w = w + shift
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    v = v[:, order]
    v = v / np.linalg.norm(v, axis=0, keepdims=True)

    norm = np.linalg.norm(a, 2)
    residual = float(np.max(np.linalg.norm(a @ v - v * w, axis=0))) if n else 0.0
    with np.errstate(divide="ignore", over="ignore"):
        cond = float(np.linalg.cond(v)) if n else 1.0
    if not np.isfinite(cond):
        cond = np.inf
    defective = cond > DEFECTIVE_COND
    bound = (1e-6 if defective else 1e-9) * max(norm, np.finfo(float).tiny)
    if residual > bound:
        raise LinAlgError(f"eigenpair residual {residual:.3e} exceeds {bound:.3e}")
    return SpectrumResult(w, v, cond, bool(defective), residual)


# Padé coefficients b_0..b_13 and backward-error thresholds theta_m
# for double precision, Higham (2005) table 2.3.
_PADE_B = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_PADE_LOW = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0,
        8821612800.0,
        2075673600.0,
        302702400.0,
        30270240.0,
        2162160.0,
        110880.0,
        3960.0,
        90.0,
        1.0,
    ),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_low(a: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE_LOW[m]
    eye = np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape)
    powers = [eye, a @ a]
    for _ in range((m - 1) // 2 - 1):
        powers.append(powers[-1] @ powers[1])
    u = sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    v = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return a @ u, v


def _pade13(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE_B
    eye = np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    return u, v


def expm(m) -> np.ndarray:
    """Matrix exponential by Padé scaling and squaring.

    Accepts a single ``(n, n)`` matrix or a stack ``(..., n, n)``; stacks
    are processed together with a per-matrix scaling exponent.  The Padé
    degree is chosen once for the stack from its largest 1-norm.

    Examples
    --------
    >>> expm(np.array([[0.0, 1.0], [0.0, 0.0]])).real
    array([[1., 1.],
           [0., 1.]])
    """
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    n = a.shape[-1]
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if a.size == 0:
        return a.copy()

    batch_shape = a.shape[:-2]
    a = a.reshape((-1, n, n))
    norms = np.abs(a).sum(axis=-2).max(axis=-1)
    top = float(norms.max())

    for m_deg in (3, 5, 7, 9):
        if top <= _THETA[m_deg]:
            u, v = _pade_low(a, m_deg)
            r = np.linalg.solve(v - u, v + u)
            return r.reshape(batch_shape + (n, n))

    with np.errstate(divide="ignore"):
        s = np.ceil(np.log2(norms / _THETA[13]))
    s = np.where(np.isfinite(s), np.maximum(s, 0), 0).astype(int)
    a = a / (2.0 ** s)[:, None, None]
    u, v = _pade13(a)
    r = np.linalg.solve(v - u, v + u)
    for k in range(int(s.max())):
        idx = np.nonzero(s > k)[0]
        r[idx] = r[idx] @ r[idx]
    return r.reshape(batch_shape + (n, n))
