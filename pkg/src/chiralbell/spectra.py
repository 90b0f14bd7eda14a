"""Closed-form spectra, exceptional points and eigenvalue sweeps.

Square roots of complex numbers use the principal branch unless a path is
being followed, in which case branches are re-assigned by continuity.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .linalg import SpectrumResult, eig_general
from .model import (
    REDUCED_INDEX,
    MarkovianValidityWarning,
    SystemConfig,
    build_effective_hamiltonian,
    build_liouvillian,
    build_reduced_liouvillian,
    derived_rates,
)


class NoExceptionalPointError(ValueError):
    """The discriminant has no sign change in the searched bracket."""


# --- closed forms -------------------------------------------------------


def _csqrt(z) -> complex:
    return complex(np.sqrt(complex(z)))


def analytic_heff_eigs(cfg: SystemConfig) -> tuple[np.ndarray, complex]:
    """Eigenvalues ``xi_1..xi_4`` of ``H_eff`` and the splitting ``eta_0``.

    ``xi_1`` belongs to ``|00>``, ``xi_4`` to ``|11>`` and ``xi_2,3`` to the
    single-excitation sector.  ``eta_0`` is taken with non-negative real part
    (non-negative imaginary part when purely imaginary) so that
    ``Re xi_2 >= Re xi_3``.
    """
    r = derived_rates(cfg)
    eps, dl, g = cfg.epsilon, cfg.delta, cfg.g
    eta0 = 1j * _csqrt((r.Gamma_tilde_1 - r.Gamma_tilde_2 - 2j * dl) ** 2 - 16 * g * g)
    if eta0.real < 0 or (eta0.real == 0 and eta0.imag < 0):
        eta0 = -eta0
    G = r.Gamma_total
    xi = np.array(
        [
            -0.5j * r.Gamma_plus,
            (-1j * G + eta0 + 4 * eps + 2 * dl) / 4,
            (-1j * G - eta0 + 4 * eps + 2 * dl) / 4,
            -0.5j * r.Gamma_minus + 2 * eps + dl,
        ]
    )
    return xi, eta0


def _liouvillian_invariants(cfg: SystemConfig) -> tuple[float, complex]:
    """``(S, beta_q^2)`` with ``eta^2 = S +- 2 beta_q``."""
    r = derived_rates(cfg)
    a, b = r.gamma1_minus, r.gamma1_plus
    c, d = r.gamma2_minus, r.gamma2_plus
    g2, q2 = cfg.g**2, cfg.q**2
    s = -8 * g2 + (a - b) ** 2 + 4 * q2 * a * b + (c - d) ** 2 + 4 * q2 * c * d
    bracket = a * c + b * d - (b * c + a * d) * (1 - 2 * q2)
    beta2 = (
        16 * g2 * g2
        + 8 * g2 * bracket
        + (r.Gamma_1**2 - 4 * (1 - q2) * a * b) * (r.Gamma_2**2 - 4 * (1 - q2) * c * d)
    )
    return s, beta2


@dataclass(frozen=True)
class LiouvillianEigs:
    """Closed-form eigenvalues of the 6x6 reduced Liouvillian at zero detuning.

    ``eigenvalues`` are ``lambda_1..lambda_6`` in the order
    ``(-G + eta1)/2, (-G - eta1)/2, -G/2, -G/2, (-G + eta2)/2, (-G - eta2)/2``.
    """

    eigenvalues: np.ndarray
    eta1: complex
    eta2: complex
    beta_q: complex


def analytic_liouvillian_eigs(cfg: SystemConfig) -> LiouvillianEigs:
    """Closed-form spectrum of the reduced hybrid Liouvillian (``delta = 0`` only).

    ``eta^(1,2) = sqrt(S +- 2 beta_q)`` with principal square roots.  The
    ``g^2`` cross term of ``beta_q^2`` carries ``(1 - 2 q^2)``; this is the
    form whose roots coincide with the characteristic polynomial of the 6x6
    matrix and which reduces to ``eta^(1) = Gamma`` at ``q = 1``.
    """
    if cfg.delta != 0:
        raise ValueError("closed-form Liouvillian eigenvalues require delta == 0")
    s, beta2 = _liouvillian_invariants(cfg)
    beta = _csqrt(beta2)
    eta1 = _csqrt(s + 2 * beta)
    eta2 = _csqrt(s - 2 * beta)
    G = derived_rates(cfg).Gamma_total
    lam = np.array(
        [(-G + eta1) / 2, (-G - eta1) / 2, -G / 2, -G / 2, (-G + eta2) / 2, (-G - eta2) / 2],
        dtype=np.complex128,
    )
    return LiouvillianEigs(lam, eta1, eta2, beta)


# --- numerical coalescence measures --------------------------------------


def heff_gap(cfg: SystemConfig) -> float:
    """Smallest pairwise distance between numerical ``H_eff`` eigenvalues."""
    w = eig_general(build_effective_hamiltonian(cfg)).eigenvalues
    return float(min(abs(w[i] - w[j]) for i in range(4) for j in range(i + 1, 4)))


def liouvillian_gap(cfg: SystemConfig) -> float:
    """Separation of the ``eta^(2)``-type pair in the numerical 6x6 spectrum.

    Two eigenvalues sit at ``-Gamma/2`` for every parameter value; they are
    dropped (the two closest to ``-Gamma/2``) and the distance between the
    next two closest is returned, i.e. ``|eta|`` of the smaller splitting.
    """
    w = np.linalg.eigvals(build_reduced_liouvillian(cfg).matrix)
    centre = -derived_rates(cfg).Gamma_total / 2
    w = w[np.argsort(np.abs(w - centre))]
    return float(abs(w[2] - w[3]))


def coalescence_scan(template: SystemConfig, gammas, refine: bool = True) -> float:
    """Locate an EP in ``gamma`` by minimizing a numerical eigenvalue gap.

    Independent of the closed forms: uses only numerically computed
    eigenvalues.  For ``q = 0`` the gap of ``H_eff`` is used; otherwise the
    reduced-Liouvillian gap relative to ``Gamma``.  The grid minimum is refined
    by bounded scalar minimization between its neighbours.
    """
    gammas = np.asarray(gammas, dtype=float)

    if template.q == 0:
        def f(gm):
            return heff_gap(template.replace(gamma=gm))
    else:
        def f(gm):
            c = template.replace(gamma=gm)
            return liouvillian_gap(c) / derived_rates(c).Gamma_total

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarkovianValidityWarning)
        vals = np.array([f(gm) for gm in gammas])
        k = int(np.argmin(vals))
        if not refine:
            return float(gammas[k])
        lo = gammas[max(k - 1, 0)]
        hi = gammas[min(k + 1, len(gammas) - 1)]
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14 * hi})
    return float(res.x)


# --- exceptional points ---------------------------------------------------


@dataclass(frozen=True)
class EPResult:
    """Exceptional point in ``gamma`` at fixed ``q``.

    ``branch`` is ``"eta0"`` (effective-Hamiltonian EP, ``q = 0``),
    ``"eta_q1"`` or ``"eta_q2"``.  ``order`` counts eigenvalues in the
    coalescing cluster of the operator used for confirmation (``H_eff`` for
    ``q = 0``, the reduced Liouvillian otherwise).  ``residual_gap`` is
    measured on that operator and ``liouvillian_norm`` is the 2-norm of the
    full 16x16 Liouvillian at the EP.
    """

    q: float
    gamma_EP: float
    branch: str
    residual_gap: float
    order: int
    liouvillian_norm: float


def ep_discriminant(template: SystemConfig, gamma: float) -> float:
    """Real polynomial in ``gamma`` vanishing where an ``eta`` branch vanishes.

    For ``q = 0`` this is ``(Gt_1 - Gt_2)^2 - 16 g^2``; otherwise
    ``S^2 - 4 beta_q^2`` (= ``eta1^2 eta2^2``), both at zero detuning.
    """
    cfg = template.replace(gamma=gamma, delta=0.0)
    if template.q == 0:
        r = derived_rates(cfg)
        return (r.Gamma_tilde_1 - r.Gamma_tilde_2) ** 2 - 16 * cfg.g**2
    s, beta2 = _liouvillian_invariants(cfg)
    return float(s * s - 4 * beta2.real)


def _cluster_order(w: np.ndarray, centre: complex, radius: float) -> int:
    return int(np.sum(np.abs(w - centre) <= radius))


def locate_ep(q: float, template: SystemConfig, gamma_max: float | None = None, n_grid: int = 400) -> EPResult:
    """Find ``gamma_EP`` at jump weight ``q`` by bracketed root finding.

    The discriminant from :func:`ep_discriminant` is sampled on a
    logarithmic grid over ``(0, gamma_max]`` (default ``100 g``); the first
    sign change is refined with Brent's method and confirmed numerically.

    Raises
    ------
    NoExceptionalPointError
        If the discriminant does not change sign.
    """
    tpl = template.replace(q=q, delta=0.0)
    if gamma_max is None:
        gamma_max = 100 * max(tpl.g, 1e-12)
    # the EP is a spectral feature; it may lie outside the Markovian regime
    # without that being a modelling choice, so validity warnings are muted
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarkovianValidityWarning)
        return _locate_ep(tpl, float(q), gamma_max, n_grid)


def _locate_ep(tpl: SystemConfig, q: float, gamma_max: float, n_grid: int) -> EPResult:
    grid = np.geomspace(gamma_max * 1e-6, gamma_max, n_grid)
    vals = np.array([ep_discriminant(tpl, gm) for gm in grid])
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    exact = np.nonzero(vals == 0)[0]
    if len(sign_change) == 0 and len(exact) == 0:
        raise NoExceptionalPointError(f"no root of the EP discriminant for q={q} in (0, {gamma_max:g}]")
    if len(exact) and (not len(sign_change) or exact[0] <= sign_change[0]):
        gamma_ep = float(grid[exact[0]])
    else:
        i = sign_change[0]
        gamma_ep = brentq(lambda gm: ep_discriminant(tpl, gm), grid[i], grid[i + 1], xtol=1e-300, rtol=1e-15)

    cfg = tpl.replace(gamma=gamma_ep)
    lnorm = float(np.linalg.norm(build_liouvillian(cfg).matrix, 2))
    if q == 0:
        w = eig_general(build_effective_hamiltonian(cfg)).eigenvalues
        pairs = sorted((abs(w[i] - w[j]), i, j) for i in range(4) for j in range(i + 1, 4))
        gap, i, j = pairs[0]
        centre = 0.5 * (w[i] + w[j])
        order = _cluster_order(w, centre, max(10 * gap, 1e-12))
        branch = "eta0"
    else:
        gap = liouvillian_gap(cfg)
        w = np.linalg.eigvals(build_reduced_liouvillian(cfg).matrix)
        centre = -derived_rates(cfg).Gamma_total / 2
        near = np.sort(np.abs(w - centre))
        # the two modes pinned at -Gamma/2 are not part of the count, except
        # that a coalescing pair landing on them raises the order
        order = _cluster_order(w, centre, max(10 * near[3], 1e-12)) - 1
        le = analytic_liouvillian_eigs(cfg)
        branch = "eta_q2" if abs(le.eta2) <= abs(le.eta1) else "eta_q1"
    return EPResult(float(q), float(gamma_ep), branch, float(gap), int(order), lnorm)


# --- sweeps ---------------------------------------------------------------


def match_continuation(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Permutation of ``cur`` minimizing total displacement from ``prev``."""
    cost = np.abs(prev[:, None] - cur[None, :])
    rows, cols = linear_sum_assignment(cost)
    out = np.empty_like(cur)
    out[rows] = cur[cols]
    return out


def track_branches(values) -> np.ndarray:
    """Reorder each row of ``values`` (points x branches) for continuity."""
    values = np.array(values, dtype=np.complex128)
    for k in range(1, len(values)):
        values[k] = match_continuation(values[k - 1], values[k])
    return values


@dataclass
class SpectrumSweep:
    """Full-Liouvillian spectra along a 1-D parameter grid.

    ``eigenvalues[k]`` holds the 16 eigenvalues at ``grid[k]``, columns
    ordered by continuity from the first point.
    """

    variable: str
    grid: np.ndarray
    eigenvalues: np.ndarray
    condition: np.ndarray
    near_defective: np.ndarray
    results: list

    def to_csv(self, path) -> None:
        n = self.eigenvalues.shape[1]
        header = ["sweep_value"]
        header += [f"re_lambda_{i + 1}" for i in range(n)]
        header += [f"im_lambda_{i + 1}" for i in range(n)]
        header += ["near_defective"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for x, lam, nd in zip(self.grid, self.eigenvalues, self.near_defective):
                w.writerow(
                    [format(float(x), ".12g")]
                    + [format(float(v), ".12g") for v in lam.real]
                    + [format(float(v), ".12g") for v in lam.imag]
                    + [int(bool(nd))]
                )


SWEEP_VARIABLES = ("g", "gamma")


def spectrum_sweep(template: SystemConfig, variable: str, grid) -> SpectrumSweep:
    """Eigenvalues of the 16x16 Liouvillian for each value of ``g`` or ``gamma``."""
    if variable not in SWEEP_VARIABLES:
        raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    d = np.diff(grid)
    if len(grid) > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("grid must be strictly monotone")
    results: list[SpectrumResult] = [
        eig_general(build_liouvillian(template.replace(**{variable: float(x)})).matrix) for x in grid
    ]
    lam = track_branches([r.eigenvalues for r in results])
    cond = np.array([r.eigvec_condition for r in results])
    nd = np.array([r.near_defective for r in results])
    return SpectrumSweep(variable, grid, lam, cond, nd, results)


def reduced_spectrum_embeds(cfg: SystemConfig) -> float:
    """Largest distance from a reduced-Liouvillian eigenvalue to the full spectrum."""
    full = np.linalg.eigvals(build_liouvillian(cfg).matrix)
    red = np.linalg.eigvals(build_reduced_liouvillian(cfg).matrix)
    return float(max(np.min(np.abs(full - z)) for z in red))


@dataclass
class RiemannSheets:
    """``xi_2`` and ``xi_3`` of ``H_eff`` over a (delta, gamma) grid.

    Arrays have shape ``(len(deltas), len(gammas))``; along each row (fixed
    delta) the two sheets are continuous in gamma.  ``more_decaying`` marks
    where the first sheet has the more negative imaginary part.
    """

    deltas: np.ndarray
    gammas: np.ndarray
    sheet_a: np.ndarray
    sheet_b: np.ndarray

    @property
    def more_decaying(self) -> np.ndarray:
        return self.sheet_a.imag < self.sheet_b.imag


def riemann_sheets(template: SystemConfig, deltas, gammas) -> RiemannSheets:
    deltas = np.asarray(deltas, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    a = np.empty((len(deltas), len(gammas)), dtype=np.complex128)
    b = np.empty_like(a)
    for i, dl in enumerate(deltas):
        row = []
        for gm in gammas:
            xi, _ = analytic_heff_eigs(template.replace(delta=float(dl), gamma=float(gm)))
            row.append(xi[1:3])
        row = track_branches(row)
        a[i], b[i] = row[:, 0], row[:, 1]
    return RiemannSheets(deltas, gammas, a, b)


def follow_loop(template: SystemConfig, centre: tuple[float, float], radius: tuple[float, float], n: int = 2000):
    """Track ``xi_2, xi_3`` once around an ellipse in the (delta, gamma) plane.

    Returns the tracked pair at every point; row 0 is the start.
    """
    phi = np.linspace(0, 2 * np.pi, n + 1)
    pts = []
    for p in phi:
        cfg = template.replace(
            delta=float(centre[0] + radius[0] * np.sin(p)),
            gamma=float(centre[1] + radius[1] * np.cos(p)),
        )
        xi, _ = analytic_heff_eigs(cfg)
        pts.append(xi[1:3])
    return track_branches(pts)


def reduced_indices() -> tuple[int, ...]:
    return REDUCED_INDEX


def analytic_ep_gamma(template: SystemConfig, q: float) -> float:
    """Closed-form ``gamma_EP`` for pure gain on qubit 1 and pure loss on qubit 2.

    ``4 g sqrt(1 + alpha^2 - 2 alpha (1 - 2 q^2)) / |1 - alpha^2|``; reduces to
    ``4 g / (1 + alpha)`` at ``q = 0`` and ``4 g / |1 - alpha|`` at ``q = 1``.
    """
    a = template.alpha
    if a == 1:
        return math.inf if q else 2 * template.g
    return 4 * template.g * math.sqrt(1 + a * a - 2 * a * (1 - 2 * q * q)) / abs(1 - a * a)
