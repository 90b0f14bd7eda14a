"""Closed-loop driving of (delta, gamma) and time-ordered propagation.

The time-ordered exponential is approximated by piecewise-constant
generators evaluated at step midpoints.  After every step the state is
divided by its trace, which for ``q < 1`` reproduces the normalized
solution of the nonlinear renormalized master equation.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import LinAlgError, eig_general, expm
from .metrics import bell_fidelity, concurrence
from .model import (
    SystemConfig,
    Superoperator,
    bell_states,
    check_density_matrix,
    jump_operators,
    liouvillian_stack,
    unvec,
    vec,
)

ORIENTATIONS = ("CW", "CCW")
STEPS_PER_UNIT_TIME = 20  # default dt = 0.05 / epsilon


class NumericalError(RuntimeError):
    """Propagation produced a non-finite or non-positive trace."""


class ConvergenceWarning(UserWarning):
    """Step doubling changed a final fidelity by 1e-4 or more."""


@dataclass(frozen=True)
class Trajectory:
    """Periodic loop ``delta(t) = +-A sin(2 pi t/T)``, ``gamma(t) = gamma0 + B sin^2(pi t/T)``.

    CW takes the ``+`` sign, CCW the ``-`` sign.
    """

    delta_amp: float = 0.04
    gamma0: float = 0.0
    gamma_amp: float = 0.008
    period: float = 2500.0
    orientation: str = "CCW"

    def __post_init__(self):
        for name in ("delta_amp", "gamma0", "gamma_amp", "period"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite number")
            object.__setattr__(self, name, float(v))
        if self.delta_amp < 0 or self.gamma0 < 0 or self.gamma_amp < 0:
            raise ValueError("trajectory amplitudes and origin must be non-negative")
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")

    @property
    def sign(self) -> int:
        return 1 if self.orientation == "CW" else -1

    def values(self, t):
        """``(delta(t), gamma(t))`` for scalar or array ``t``."""
        t = np.asarray(t, dtype=float)
        delta = self.sign * self.delta_amp * np.sin(2 * np.pi * t / self.period)
        gamma = self.gamma0 + self.gamma_amp * np.sin(np.pi * t / self.period) ** 2
        return delta[()], gamma[()]

    def reversed(self) -> "Trajectory":
        other = "CW" if self.orientation == "CCW" else "CCW"
        return Trajectory(self.delta_amp, self.gamma0, self.gamma_amp, self.period, other)

    def to_dict(self) -> dict:
        return {
            "delta_amp": self.delta_amp,
            "gamma0": self.gamma0,
            "gamma_amp": self.gamma_amp,
            "period": self.period,
            "orientation": self.orientation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown Trajectory fields: {sorted(unknown)}")
        return cls(**d)


def params_at(traj: Trajectory, base: SystemConfig, t: float) -> SystemConfig:
    """Configuration at time ``t`` of the loop (``0 <= t <= T``)."""
    if not 0 <= t <= traj.period:
        raise ValueError(f"t={t} outside [0, {traj.period}]")
    delta, gamma = traj.values(t)
    return base.replace(delta=float(delta), gamma=float(gamma))


def default_steps(traj: Trajectory, base: SystemConfig) -> int:
    return max(1, math.ceil(STEPS_PER_UNIT_TIME * traj.period * base.epsilon))


def step_propagators(traj: Trajectory, base: SystemConfig, steps: int, chunk: int = 2048):
    """Yield blocks of per-step factors ``expm(L(t_mid) dt)`` in time order."""
    h = traj.period / steps
    for start in range(0, steps, chunk):
        k = np.arange(start, min(start + chunk, steps))
        delta, gamma = traj.values((k + 0.5) * h)
        yield expm(liouvillian_stack(base, delta=delta, gamma=gamma) * h)


@dataclass
class PropagationRecord:
    """Normalized states along one propagation.

    ``states[k]`` is the state at ``times[k]``; ``trace_before_renorm[k]``
    is the trace produced by step ``k`` (from ``times[k]`` to
    ``times[k+1]``) before division.
    """

    times: np.ndarray
    states: np.ndarray
    trace_before_renorm: np.ndarray
    purity: np.ndarray
    config: SystemConfig
    trajectory: Trajectory

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def fidelity(self, which: str = "-") -> np.ndarray:
        plus, minus = bell_states()
        psi = plus if which in ("+", "plus") else minus
        return np.einsum("i,kij,j->k", psi.conj(), self.states, psi).real

    def concurrence(self, stride: int = 1) -> np.ndarray:
        return np.array([concurrence(r) for r in self.states[::stride]])

    def to_csv(self, path, include_entries: bool = False, stride: int = 1) -> None:
        """Write the time series; one row every ``stride`` steps plus the last."""
        idx = np.arange(0, len(self.times), stride)
        if idx[-1] != len(self.times) - 1:
            idx = np.append(idx, len(self.times) - 1)
        write_timeseries_csv(path, self, idx, include_entries)


def _fmt(x) -> str:
    return format(float(x), ".12g")


def write_timeseries_csv(path, rec: PropagationRecord, idx, include_entries: bool = False) -> None:
    header = ["t"]
    if include_entries:
        for i in range(4):
            for j in range(4):
                header += [f"re_rho_{i}{j}", f"im_rho_{i}{j}"]
    header += [
        "fidelity_psi_plus",
        "fidelity_psi_minus",
        "concurrence",
        "purity",
        "trace_before_renorm",
    ]
    f_plus = rec.fidelity("+")
    f_minus = rec.fidelity("-")
    # step k ends at time k+1; the initial state carries trace 1
    traces = np.concatenate([[1.0], rec.trace_before_renorm])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in idx:
            row = [_fmt(rec.times[k])]
            if include_entries:
                for z in rec.states[k].reshape(-1):
                    row += [_fmt(z.real), _fmt(z.imag)]
            row += [
                _fmt(f_plus[k]),
                _fmt(f_minus[k]),
                _fmt(concurrence(rec.states[k])),
                _fmt(rec.purity[k]),
                _fmt(traces[k]),
            ]
            w.writerow(row)


def propagate(
    traj: Trajectory,
    base: SystemConfig,
    rho0,
    steps: int | None = None,
    check_convergence: bool = False,
) -> PropagationRecord:
    """Propagate ``rho0`` once around ``traj`` with the hybrid Liouvillian.

    Parameters
    ----------
    traj : Trajectory
    base : SystemConfig
        Supplies everything except ``delta`` and ``gamma``, which follow the loop.
    rho0 : array_like, shape (4, 4)
    steps : int, optional
        Number of midpoint exponential steps; defaults to ``20 T epsilon``.
    check_convergence : bool
        Re-run with twice the steps and warn if a final Bell fidelity moves
        by ``1e-4`` or more.

    Raises
    ------
    NumericalError
        If a step produces a non-finite or non-positive trace.
    """
    rho0 = check_density_matrix(rho0)
    if steps is None:
        steps = default_steps(traj, base)
    if int(steps) != steps or steps < 1:
        raise ValueError("steps must be a positive integer")
    steps = int(steps)

    vecs = np.empty((steps + 1, 16), dtype=np.complex128)
    traces = np.empty(steps)
    v = vec(rho0).copy()
    vecs[0] = v
    k = 0
    for block in step_propagators(traj, base, steps):
        for e in block:
            v = e @ v
            tr = v[0] + v[5] + v[10] + v[15]
            if not (math.isfinite(tr.real) and tr.real > 0):
                raise NumericalError(f"non-finite or non-positive trace at step {k}; reduce the time step")
            v /= tr
            traces[k] = tr.real
            k += 1
            vecs[k] = v
    if not np.all(np.isfinite(vecs)):
        raise NumericalError("propagation produced non-finite state entries")

    states = vecs.reshape(-1, 4, 4).transpose(0, 2, 1)
    pur = np.einsum("kij,kji->k", states, states).real
    times = np.linspace(0.0, traj.period, steps + 1)
    rec = PropagationRecord(times, states, traces, pur, base, traj)

    if check_convergence:
        fine = propagate(traj, base, rho0, 2 * steps)
        for which in ("+", "-"):
            d = abs(bell_fidelity(fine.final_state, which) - bell_fidelity(rec.final_state, which))
            if d >= 1e-4:
                warnings.warn(
                    f"step doubling changed the final {which} fidelity by {d:.2e}",
                    ConvergenceWarning,
                    stacklevel=2,
                )
    return rec


def trace_loss_rate(cfg: SystemConfig, rho) -> float:
    """``d Tr(rho)/dt = -(1 - q) sum_j Tr(L_j^dag L_j rho)`` for the unnormalized flow."""
    rho = np.asarray(rho)
    total = sum(np.trace(L.conj().T @ L @ rho) for L in jump_operators(cfg))
    return float(-(1 - cfg.q) * np.real(total))


def purity_rate(cfg: SystemConfig, rho) -> float:
    """``d Tr(rho^2)/dt`` under the renormalized hybrid master equation.

    ``rho`` must have unit trace.
    """
    rho = np.asarray(rho)
    p = np.real(np.trace(rho @ rho))
    half = 0.0
    for L in jump_operators(cfg):
        Ld = L.conj().T
        loss = np.real(np.trace(Ld @ L @ rho))
        half += cfg.q * (np.real(np.trace(Ld @ rho @ L @ rho)) - loss * p)
        half += -np.real(np.trace(Ld @ L @ rho @ rho)) + loss * p
    return float(2 * half)


def one_cycle_propagator(traj: Trajectory, base: SystemConfig, steps: int | None = None) -> Superoperator:
    """Raw (unnormalized) superoperator mapping ``rho(0)`` to ``rho(T)``."""
    if steps is None:
        steps = default_steps(traj, base)
    p = np.eye(16, dtype=np.complex128)
    for block in step_propagators(traj, base, int(steps)):
        for e in block:
            p = e @ p
    return Superoperator(p, "full")


def _hermitian_normalized(v) -> np.ndarray:
    rho = unvec(v)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-14:
        raise LinAlgError("eigenmatrix has vanishing trace")
    return rho / tr


def spectral_radius(sup: Superoperator) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(sup.matrix))))


def fixed_point_state(sup: Superoperator) -> np.ndarray:
    """Hermitized, unit-trace eigenmatrix of the eigenvalue of largest modulus."""
    spec = eig_general(sup.matrix)
    k = int(np.argmax(np.abs(spec.eigenvalues)))
    return _hermitian_normalized(spec.eigenvectors[:, k])


def steady_state(sup: Superoperator) -> np.ndarray:
    """Hermitized, unit-trace eigenmatrix of the eigenvalue closest to 0."""
    spec = eig_general(sup.matrix)
    k = int(np.argmin(np.abs(spec.eigenvalues)))
    return _hermitian_normalized(spec.eigenvectors[:, k])


def trace_distance(a, b) -> float:
    d = np.asarray(a) - np.asarray(b)
    d = 0.5 * (d + d.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(d)).sum())
