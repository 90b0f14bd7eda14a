"""Two dissipatively coupled qubits: parameters, operators, Liouvillians.

Conventions
-----------
* Two-qubit basis ordered ``|11>, |10>, |01>, |00>``; qubit 1 is the left
  tensor factor and ``|1>`` is the excited level.
* Density matrices are vectorized by column stacking, so element
  ``rho[i, j]`` sits at index ``i + 4 j`` and ``vec(A X B) = (B^T kron A) vec(X)``.
* Coherent part ``d rho/dt = -i (H_eff rho - rho H_eff^dag)``, jumps weighted
  by the postselection parameter ``q``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .linalg import dagger

BASIS_LABELS = ("11", "10", "01", "00")

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
_I2 = np.eye(2, dtype=np.complex128)
_I4 = np.eye(4, dtype=np.complex128)

SP1 = np.kron(SIGMA_PLUS, _I2)
SM1 = np.kron(SIGMA_MINUS, _I2)
SP2 = np.kron(_I2, SIGMA_PLUS)
SM2 = np.kron(_I2, SIGMA_MINUS)

# number operators and their complements
N1 = SP1 @ SM1
N2 = SP2 @ SM2
HOLE1 = SM1 @ SP1
HOLE2 = SM2 @ SP2
HOP = SP1 @ SM2 + SM1 @ SP2


class MarkovianValidityWarning(UserWarning):
    """Issued when g, gamma, alpha*gamma or |delta| exceed 0.1 epsilon."""


def _encode_float(x: float):
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return x


def _decode_float(x) -> float:
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("+inf", "inf"):
            return math.inf
        if s == "-inf":
            return -math.inf
        raise ValueError(f"cannot parse {x!r} as a number")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"expected a number, got {x!r}")
    return float(x)


@dataclass(frozen=True)
class SystemConfig:
    """Physical parameters of the two-qubit model (hbar = k_B = 1).

    Attributes
    ----------
    epsilon : float
        Transition energy of qubit 1; qubit 2 sits at ``epsilon + delta``.
    delta : float
        Detuning of qubit 2.
    g : float
        Exchange coupling.
    gamma : float
        Bath coupling of qubit 1; qubit 2 couples with ``alpha * gamma``.
    alpha : float
        Ratio of bath couplings.
    beta1, beta2 : float
        Inverse bath temperatures; ``+inf`` / ``-inf`` allowed.
    q : float
        Weight of quantum-jump terms, 0 (full postselection) to 1 (Lindblad).
    """

    epsilon: float = 1.0
    delta: float = 0.0
    g: float = 0.01
    gamma: float = 0.0
    alpha: float = 1.0
    beta1: float = -math.inf
    beta2: float = math.inf
    q: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, _decode_float(getattr(self, f.name)))
        for name in ("epsilon", "delta", "g", "gamma", "alpha", "q"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if math.isnan(self.beta1) or math.isnan(self.beta2):
            raise ValueError("inverse temperatures must not be NaN")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.g < 0:
            raise ValueError("g must be non-negative")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        scale = max(self.g, self.gamma, self.alpha * self.gamma, abs(self.delta))
        if scale > 0.1 * self.epsilon:
            warnings.warn(
                f"max(g, gamma, alpha*gamma, |delta|) = {scale:g} exceeds 0.1*epsilon; "
                "the Markovian master equation may not be valid",
                MarkovianValidityWarning,
                stacklevel=3,
            )

    def replace(self, **changes) -> "SystemConfig":
        d = asdict(self)
        d.update(changes)
        return SystemConfig(**d)

    def to_dict(self) -> dict:
        return {k: _encode_float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown SystemConfig fields: {sorted(unknown)}")
        return cls(**{k: _decode_float(v) for k, v in d.items()})


def fermi(beta, energy):
    """Fermi-Dirac occupation ``1 / (exp(beta * energy) + 1)``.

    Infinite ``beta`` maps to exactly 0 (``+inf``) or 1 (``-inf``), whatever
    the sign of ``energy``.  Works elementwise on arrays of ``energy``.
    """
    if math.isinf(beta):
        val = 0.0 if beta > 0 else 1.0
        return np.full_like(np.asarray(energy, dtype=float), val)[()]
    x = np.asarray(beta * np.asarray(energy, dtype=float))
    # 0.5 * (1 - tanh(x/2)) is the overflow-free form
    return (0.5 * (1.0 - np.tanh(0.5 * x)))[()]


@dataclass(frozen=True)
class DerivedRates:
    """Jump rates and their sums, following ``gamma_j^+ = gamma_j n_j``."""

    n1: float
    n2: float
    gamma1_plus: float
    gamma1_minus: float
    gamma2_plus: float
    gamma2_minus: float
    Gamma_1: float = field(init=False)
    Gamma_2: float = field(init=False)
    Gamma_plus: float = field(init=False)
    Gamma_minus: float = field(init=False)
    Gamma_total: float = field(init=False)
    Gamma_tilde_1: float = field(init=False)
    Gamma_tilde_2: float = field(init=False)

    def __post_init__(self):
        s = object.__setattr__
        s(self, "Gamma_1", self.gamma1_plus + self.gamma1_minus)
        s(self, "Gamma_2", self.gamma2_plus + self.gamma2_minus)
        s(self, "Gamma_plus", self.gamma1_plus + self.gamma2_plus)
        s(self, "Gamma_minus", self.gamma1_minus + self.gamma2_minus)
        s(self, "Gamma_total", self.Gamma_plus + self.Gamma_minus)
        s(self, "Gamma_tilde_1", self.gamma1_minus - self.gamma1_plus)
        s(self, "Gamma_tilde_2", self.gamma2_minus - self.gamma2_plus)


def derived_rates(cfg: SystemConfig) -> DerivedRates:
    n1 = float(fermi(cfg.beta1, cfg.epsilon))
    n2 = float(fermi(cfg.beta2, cfg.epsilon + cfg.delta))
    g1 = cfg.gamma
    g2 = cfg.alpha * cfg.gamma
    return DerivedRates(n1, n2, g1 * n1, g1 * (1 - n1), g2 * n2, g2 * (1 - n2))


def jump_operators(cfg: SystemConfig) -> list[np.ndarray]:
    """The four scaled jump operators ``sqrt(gamma_j^pm) sigma_pm^(j)``."""
    r = derived_rates(cfg)
    return [
        math.sqrt(r.gamma1_plus) * SP1,
        math.sqrt(r.gamma1_minus) * SM1,
        math.sqrt(r.gamma2_plus) * SP2,
        math.sqrt(r.gamma2_minus) * SM2,
    ]


def build_hamiltonian(cfg: SystemConfig) -> np.ndarray:
    """Hermitian two-qubit Hamiltonian ``H_0``."""
    return cfg.epsilon * N1 + (cfg.epsilon + cfg.delta) * N2 + cfg.g * HOP


def build_effective_hamiltonian(cfg: SystemConfig) -> np.ndarray:
    """Non-Hermitian ``H_eff = H_0 - (i/2) sum_j (gamma_j^- n_j + gamma_j^+ (1 - n_j))``."""
    r = derived_rates(cfg)
    loss = (
        r.gamma1_minus * N1
        + r.gamma1_plus * HOLE1
        + r.gamma2_minus * N2
        + r.gamma2_plus * HOLE2
    )
    return build_hamiltonian(cfg) - 0.5j * loss


def _left(a):
    # vec(A X) = (I kron A) vec X
    return np.kron(_I4, a)


def _right(b):
    # vec(X B) = (B^T kron I) vec X
    return np.kron(b.T, _I4)


def _coherent(h):
    """Superoperator of ``-i (h X - X h^dag)``."""
    return -1j * (_left(h) - _right(dagger(h)))


def _sandwich(a):
    """Superoperator of ``a X a^dag``."""
    return np.kron(a.conj(), a)


# Generator pieces; the Liouvillian is linear in epsilon, delta, g and the rates.
_L_EPS = _coherent(N1 + N2)
_L_DELTA = _coherent(N2)
_L_G = _coherent(HOP)
_L_DAMP = {
    "gamma1_plus": _coherent(-0.5j * HOLE1),
    "gamma1_minus": _coherent(-0.5j * N1),
    "gamma2_plus": _coherent(-0.5j * HOLE2),
    "gamma2_minus": _coherent(-0.5j * N2),
}
_L_JUMP = {
    "gamma1_plus": _sandwich(SP1),
    "gamma1_minus": _sandwich(SM1),
    "gamma2_plus": _sandwich(SP2),
    "gamma2_minus": _sandwich(SM2),
}


def liouvillian_stack(cfg: SystemConfig, delta=None, gamma=None) -> np.ndarray:
    """Full 16x16 generators for arrays of ``delta`` and ``gamma`` values.

    Parameters not given are taken from ``cfg``.  The occupation of qubit 2
    is evaluated at the instantaneous ``epsilon + delta``.  Returns an array
    of shape ``broadcast(delta, gamma).shape + (16, 16)``.
    """
    delta = np.asarray(cfg.delta if delta is None else delta, dtype=float)
    gamma = np.asarray(cfg.gamma if gamma is None else gamma, dtype=float)
    delta, gamma = np.broadcast_arrays(delta, gamma)
    n1 = fermi(cfg.beta1, cfg.epsilon)
    n2 = np.asarray(fermi(cfg.beta2, cfg.epsilon + delta))
    g2 = cfg.alpha * gamma
    rates = {
        "gamma1_plus": gamma * n1,
        "gamma1_minus": gamma * (1 - n1),
        "gamma2_plus": g2 * n2,
        "gamma2_minus": g2 * (1 - n2),
    }
    names = list(rates)
    coeffs = np.stack(
        [np.ones(delta.shape), delta] + [np.asarray(rates[n], dtype=float) for n in names], axis=-1
    )
    basis = np.stack(
        [cfg.epsilon * _L_EPS + cfg.g * _L_G, _L_DELTA]
        + [_L_DAMP[n] + cfg.q * _L_JUMP[n] for n in names]
    )
    return (coeffs.reshape(-1, coeffs.shape[-1]) @ basis.reshape(len(basis), -1)).reshape(
        delta.shape + (16, 16)
    )


FULL_BASIS = tuple(
    f"|{BASIS_LABELS[i]}><{BASIS_LABELS[j]}|" for j in range(4) for i in range(4)
)
REDUCED_UNITS = ((0, 0), (1, 1), (1, 2), (2, 1), (2, 2), (3, 3))
REDUCED_BASIS = tuple(f"|{BASIS_LABELS[i]}><{BASIS_LABELS[j]}|" for i, j in REDUCED_UNITS)
REDUCED_INDEX = tuple(i + 4 * j for i, j in REDUCED_UNITS)


@dataclass(frozen=True)
class Superoperator:
    """Matrix acting on column-stacked density matrices.

    ``label`` is ``"full"`` (16-dimensional, all matrix units) or
    ``"reduced"`` (the 6 matrix units of ``REDUCED_BASIS``).
    """

    matrix: np.ndarray
    label: str = "full"

    def __post_init__(self):
        expected = {"full": 16, "reduced": 6}.get(self.label)
        if expected is None:
            raise ValueError(f"unknown superoperator label {self.label!r}")
        if self.matrix.shape != (expected, expected):
            raise ValueError(f"{self.label} superoperator must be {expected}x{expected}")

    @property
    def basis(self) -> tuple[str, ...]:
        return FULL_BASIS if self.label == "full" else REDUCED_BASIS

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Act on a 4x4 density matrix (full superoperators only)."""
        if self.label != "full":
            raise ValueError("only full superoperators act on 4x4 matrices")
        return unvec(self.matrix @ vec(rho))


def vec(rho) -> np.ndarray:
    return np.asarray(rho, dtype=np.complex128).reshape(-1, order="F")


def unvec(v) -> np.ndarray:
    return np.asarray(v).reshape(4, 4, order="F")


def build_liouvillian(cfg: SystemConfig) -> Superoperator:
    """Hybrid Liouvillian ``L_[q]`` as a 16x16 superoperator."""
    return Superoperator(liouvillian_stack(cfg), "full")


def restrict_to_reduced(sup: Superoperator) -> Superoperator:
    """Restriction of a full superoperator to the 6 reduced matrix units."""
    if sup.label != "full":
        raise ValueError("expected a full superoperator")
    idx = np.array(REDUCED_INDEX)
    return Superoperator(sup.matrix[np.ix_(idx, idx)].copy(), "reduced")


def build_reduced_liouvillian(cfg: SystemConfig) -> Superoperator:
    """6x6 hybrid Liouvillian on ``|11><11|, |10><10|, |10><01|, |01><10|, |01><01|, |00><00|``.

    Written out entry by entry rather than sliced from the 16x16 matrix so
    that the two constructions can check each other.
    """
    r = derived_rates(cfg)
    a, b = r.gamma1_minus, r.gamma1_plus
    c, d = r.gamma2_minus, r.gamma2_plus
    G = r.Gamma_total
    g, q, dl = cfg.g, cfg.q, cfg.delta
    ig = 1j * g
    m = np.array(
        [
            [-a - c, d * q, 0, 0, b * q, 0],
            [c * q, -a - d, ig, -ig, 0, b * q],
            [0, ig, (2j * dl - G) / 2, 0, -ig, 0],
            [0, -ig, 0, (-2j * dl - G) / 2, ig, 0],
            [a * q, 0, -ig, ig, -b - c, d * q],
            [0, a * q, 0, 0, c * q, -b - d],
        ],
        dtype=np.complex128,
    )
    return Superoperator(m, "reduced")


def bell_states() -> tuple[np.ndarray, np.ndarray]:
    """``|Psi+>`` and ``|Psi->`` as vectors in the ``|11>, |10>, |01>, |00>`` basis."""
    s = 1 / math.sqrt(2)
    plus = np.array([0, s, s, 0], dtype=np.complex128)
    minus = np.array([0, s, -s, 0], dtype=np.complex128)
    return plus, minus


def basis_state(label: str) -> np.ndarray:
    """Computational basis ket, e.g. ``basis_state("10")``."""
    try:
        k = BASIS_LABELS.index(label)
    except ValueError:
        raise ValueError(f"unknown basis label {label!r}; expected one of {BASIS_LABELS}") from None
    v = np.zeros(4, dtype=np.complex128)
    v[k] = 1
    return v


def projector(ket) -> np.ndarray:
    ket = np.asarray(ket, dtype=np.complex128)
    return np.outer(ket, ket.conj())


def check_density_matrix(rho, atol: float = 1e-10) -> np.ndarray:
    """Validate a 4x4 density matrix and return it as complex128.

    Hermitian within ``atol``, unit trace within ``atol`` and eigenvalues
    above ``-1e-9``; raises ``ValueError`` otherwise.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (4, 4):
        raise ValueError(f"density matrix must be 4x4, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if np.max(np.abs(rho - dagger(rho))) > atol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0] < -1e-9:
        raise ValueError("density matrix is not positive semidefinite")
    return rho
