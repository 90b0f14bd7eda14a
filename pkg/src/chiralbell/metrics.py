"""State functionals: Bell fidelities, Wootters concurrence, purity, PT check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import SystemConfig, bell_states, derived_rates

_PSI_PLUS, _PSI_MINUS = bell_states()
_SY = np.array([[0, -1j], [1j, 0]])
_SYSY = np.kron(_SY, _SY)


def bell_fidelity(rho, which: str = "-") -> float:
    """Overlap ``<Psi+-| rho |Psi+->`` with a Bell state.

    ``which`` is ``"+"`` or ``"-"``.
    """
    if which in ("+", "plus"):
        psi = _PSI_PLUS
    elif which in ("-", "minus"):
        psi = _PSI_MINUS
    else:
        raise ValueError(f"which must be '+' or '-', got {which!r}")
    rho = np.asarray(rho)
    return float(np.real(psi.conj() @ rho @ psi))


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    ``max(0, l1 - l2 - l3 - l4)`` with ``l_i`` the decreasing square roots of
    the eigenvalues of ``rho (sy x sy) rho* (sy x sy)``.  They are obtained as
    singular values of ``B^T (sy x sy) B`` for ``rho = B B^dag``, which avoids
    square roots of round-off-sized eigenvalues of a non-Hermitian product.
    Eigenvalues of ``rho`` below ``16 eps max(w)`` (including negative ones)
    are treated as zero.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    w = np.where(w > 16 * np.finfo(float).eps * max(w.max(), 0.0), w, 0.0)
    b = v * np.sqrt(w)
    lam = np.linalg.svd(b.T @ _SYSY @ b, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def purity(rho) -> float:
    """``Tr rho^2``."""
    rho = np.asarray(rho)
    return float(np.real(np.einsum("ij,ji->", rho, rho)))


@dataclass(frozen=True)
class MetricSample:
    fidelity_plus: float
    fidelity_minus: float
    concurrence: float
    purity: float

    @classmethod
    def of(cls, rho) -> "MetricSample":
        return cls(bell_fidelity(rho, "+"), bell_fidelity(rho, "-"), concurrence(rho), purity(rho))


@dataclass(frozen=True)
class PTReport:
    is_pt_symmetric: bool
    violated_conditions: list = field(default_factory=list)
    occupation_sum: float = math.nan


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def pt_symmetry_check(cfg: SystemConfig, rtol: float = 1e-12) -> PTReport:
    """Classify a configuration against the dissipative PT-symmetry conditions.

    Checks ``delta = -2 epsilon``, ``gamma_1^+ = gamma_2^-`` and
    ``gamma_1^- = gamma_2^+``, each to relative precision ``rtol``, and
    reports ``n1 + n2`` (equal to 1 in the fermionic PT-symmetric case).
    """
    r = derived_rates(cfg)
    violated = []
    if not _close(cfg.delta, -2 * cfg.epsilon, rtol):
        violated.append("delta == -2*epsilon")
    if not _close(r.gamma1_plus, r.gamma2_minus, rtol):
        violated.append("gamma1_plus == gamma2_minus")
    if not _close(r.gamma1_minus, r.gamma2_plus, rtol):
        violated.append("gamma1_minus == gamma2_plus")
    return PTReport(not violated, violated, r.n1 + r.n2)
