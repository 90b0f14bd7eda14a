import csv
import math

import numpy as np
import pytest

from _configs import GAIN_LOSS, random_config
from chiralbell.linalg import eig_general
from chiralbell.model import (
    SystemConfig,
    build_effective_hamiltonian,
    build_liouvillian,
    build_reduced_liouvillian,
    derived_rates,
)
from chiralbell.spectra import (
    NoExceptionalPointError,
    analytic_ep_gamma,
    analytic_heff_eigs,
    analytic_liouvillian_eigs,
    coalescence_scan,
    follow_loop,
    locate_ep,
    reduced_spectrum_embeds,
    riemann_sheets,
    spectrum_sweep,
    track_branches,
)

# rates gamma1- = 0.02, gamma1+ = 0.01, gamma2- = 0.01, gamma2+ = 0.005
SPECTRUM_RATES = SystemConfig(gamma=0.03, alpha=0.5, beta1=math.log(2), beta2=math.log(2))


def set_distance(a, b) -> float:
    """Largest distance from a point of ``a`` to the nearest point of ``b``."""
    a, b = np.asarray(a), np.asarray(b)
    return float(max(np.min(np.abs(b - z)) for z in a))


def test_spectrum_rates_fixture():
    r = derived_rates(SPECTRUM_RATES)
    np.testing.assert_allclose(
        [r.gamma1_minus, r.gamma1_plus, r.gamma2_minus, r.gamma2_plus], [0.02, 0.01, 0.01, 0.005], rtol=1e-14
    )


def test_heff_eigs_hermitian_limit():
    xi, eta0 = analytic_heff_eigs(SystemConfig(g=0.01))
    np.testing.assert_allclose(xi, [0, 1.01, 0.99, 2], atol=1e-15)
    assert eta0 == pytest.approx(4 * 0.01)


def test_heff_eigs_at_ep():
    xi, eta0 = analytic_heff_eigs(GAIN_LOSS.replace(gamma=4 * 0.01 / 2.2))
    assert abs(eta0) < 1e-9
    assert abs(xi[1] - xi[2]) < 1e-9


def test_heff_eigs_match_numerics():
    rng = np.random.default_rng(10)
    worst = 0.0
    for k in range(100):
        cfg = random_config(rng, finite_beta=k % 2 == 0)
        xi, _ = analytic_heff_eigs(cfg)
        w = eig_general(build_effective_hamiltonian(cfg)).eigenvalues
        worst = max(worst, set_distance(xi, w), set_distance(w, xi))
    assert worst < 1e-10


def test_liouvillian_eigs_lindblad_limit():
    cfg = GAIN_LOSS.replace(gamma=0.013, beta1=0.4, beta2=1.7)
    le = analytic_liouvillian_eigs(cfg)
    r = derived_rates(cfg)
    assert abs(le.eigenvalues[0]) < 1e-15
    assert le.eta1 == pytest.approx(r.Gamma_total, rel=1e-12)
    expect = np.sqrt(complex((r.Gamma_1 - r.Gamma_2) ** 2 - 16 * cfg.g**2))
    assert le.eta2 == pytest.approx(expect, rel=1e-10)


def test_liouvillian_eigs_postselected_limit():
    cfg = random_config(np.random.default_rng(11), q=0.0, delta=0.0)
    le = analytic_liouvillian_eigs(cfg)
    r = derived_rates(cfg)
    nhh_branch = np.sqrt(complex((r.Gamma_tilde_1 - r.Gamma_tilde_2) ** 2 - 16 * cfg.g**2))
    sum_branch = r.Gamma_tilde_1 + r.Gamma_tilde_2
    # the two splittings, compared up to sign and labelling
    got = sorted([abs(le.eta1), abs(le.eta2)])
    assert got == pytest.approx(sorted([abs(nhh_branch), abs(sum_branch)]), rel=1e-10)


@pytest.mark.parametrize("q", [0.0, 0.3, 0.7, 1.0])
def test_liouvillian_eigs_match_numerics(q):
    rng = np.random.default_rng(int(q * 10) + 20)
    for k in range(25):
        cfg = random_config(rng, q=q, delta=0.0, finite_beta=k % 3 != 0)
        lam = analytic_liouvillian_eigs(cfg).eigenvalues
        w = np.linalg.eigvals(build_reduced_liouvillian(cfg).matrix)
        assert set_distance(lam, w) < 1e-9
        assert set_distance(w, lam) < 1e-9


def test_printed_cross_term_disagrees_for_partial_jumps():
    # the (1 - q^2) weight on the g^2 cross term does not reproduce the 6x6
    # spectrum for 0 < q < 1; (1 - 2 q^2) does
    cfg = SystemConfig(g=0.01, gamma=0.02, alpha=0.6, beta1=0.5, beta2=1.5, q=0.5)
    r = derived_rates(cfg)
    a, b, c, d = r.gamma1_minus, r.gamma1_plus, r.gamma2_minus, r.gamma2_plus
    g2, q2 = cfg.g**2, cfg.q**2
    s = -8 * g2 + (a - b) ** 2 + 4 * q2 * a * b + (c - d) ** 2 + 4 * q2 * c * d
    tail = (r.Gamma_1**2 - 4 * (1 - q2) * a * b) * (r.Gamma_2**2 - 4 * (1 - q2) * c * d)
    printed = np.sqrt(complex(16 * g2**2 + 8 * g2 * (a * c + b * d - (b * c + a * d) * (1 - q2)) + tail))
    G = r.Gamma_total
    lam_printed = [(-G + np.sqrt(s + sgn * 2 * printed)) / 2 for sgn in (1, -1)]
    w = np.linalg.eigvals(build_reduced_liouvillian(cfg).matrix)
    assert set_distance(lam_printed, w) > 1e-6
    assert set_distance(analytic_liouvillian_eigs(cfg).eigenvalues, w) < 1e-12


def test_liouvillian_eigs_reject_detuning():
    with pytest.raises(ValueError):
        analytic_liouvillian_eigs(GAIN_LOSS.replace(delta=0.01))


def test_locate_ep_postselected():
    ep = locate_ep(0.0, GAIN_LOSS)
    assert ep.gamma_EP == pytest.approx(0.01818181818181818, rel=1e-12)
    assert ep.branch == "eta0"
    assert ep.order == 2
    assert ep.residual_gap <= 1e-6 * ep.liouvillian_norm


def test_locate_ep_lindblad():
    ep = locate_ep(1.0, GAIN_LOSS)
    assert ep.gamma_EP == pytest.approx(0.2, rel=1e-12)
    assert ep.branch == "eta_q2"
    assert ep.residual_gap <= 1e-6 * ep.liouvillian_norm


def test_locate_ep_partial_jumps():
    ep = locate_ep(0.5, GAIN_LOSS)
    # 4 g sqrt(1 + a^2 - 2 a (1 - 2 q^2)) / |1 - a^2| at a = 1.2, q = 0.5
    assert ep.gamma_EP == pytest.approx(0.04 * math.sqrt(2.44 - 1.2) / 0.44, rel=1e-12)
    assert ep.gamma_EP == pytest.approx(analytic_ep_gamma(GAIN_LOSS, 0.5), rel=1e-12)
    # the coalescing cluster of the reduced Liouvillian is third order
    assert ep.order == 3
    assert ep.residual_gap <= 1e-6 * ep.liouvillian_norm


def test_ep_monotone_in_q():
    values = [locate_ep(q, GAIN_LOSS).gamma_EP for q in np.linspace(0, 1, 6)]
    assert np.all(np.diff(values) > 0)


def test_locate_ep_no_root():
    with pytest.raises(NoExceptionalPointError, match="no root"):
        locate_ep(1.0, GAIN_LOSS.replace(alpha=1.0))


def test_coalescence_scan_partial_jumps():
    gammas = np.geomspace(1e-3, 0.5, 200)
    found = coalescence_scan(GAIN_LOSS.replace(q=0.5), gammas)
    assert found == pytest.approx(locate_ep(0.5, GAIN_LOSS).gamma_EP, rel=1e-6)


def test_track_branches_avoided_crossing():
    t = np.linspace(-1, 1, 41)
    a = t + 0.5j
    b = -t - 0.5j
    scrambled = np.stack([np.where(t < 0, a, b), np.where(t < 0, b, a)], axis=1)
    tracked = track_branches(scrambled)
    np.testing.assert_allclose(tracked[:, 0], a)
    np.testing.assert_allclose(tracked[:, 1], b)


def test_spectrum_sweep_lindblad_unique_steady_state():
    grid = np.linspace(1e-4, 5e-3, 40)
    sw = spectrum_sweep(SPECTRUM_RATES.replace(q=1.0), "g", grid)
    assert sw.eigenvalues.shape == (40, 16)
    assert np.all(np.sum(np.abs(sw.eigenvalues) < 1e-12, axis=1) == 1)


@pytest.mark.parametrize("q", [0.0, 0.5, 1.0])
def test_spectrum_sweep_decaying(q):
    sw = spectrum_sweep(SPECTRUM_RATES.replace(q=q), "g", np.linspace(1e-4, 5e-3, 30))
    assert np.max(sw.eigenvalues.real) <= 1e-10


def test_spectrum_sweep_postselected_merge_location():
    grid = np.linspace(5e-5, 5e-3, 100)
    sw = spectrum_sweep(SPECTRUM_RATES.replace(q=0.0), "g", grid)
    # g_EP = |Gt_1 - Gt_2| / 4
    g_ep = abs(0.01 - 0.005) / 4
    k = int(np.argmax(sw.condition))
    assert abs(grid[k] - g_ep) <= (grid[1] - grid[0]) * (1 + 1e-9)
    assert sw.near_defective[k]


def test_spectrum_sweep_continuity():
    grid = np.linspace(2e-3, 6e-3, 80)
    sw = spectrum_sweep(SPECTRUM_RATES.replace(q=0.5), "g", grid)
    steps = np.abs(np.diff(sw.eigenvalues, axis=0))
    assert np.max(steps) < 10 * (grid[1] - grid[0]) * 4


def test_spectrum_sweep_validation():
    with pytest.raises(ValueError):
        spectrum_sweep(SPECTRUM_RATES, "alpha", [0.1, 0.2])
    with pytest.raises(ValueError):
        spectrum_sweep(SPECTRUM_RATES, "g", [0.1, 0.05, 0.2])
    with pytest.raises(ValueError):
        spectrum_sweep(SPECTRUM_RATES, "g", [])


def test_spectrum_sweep_csv(tmp_path):
    sw = spectrum_sweep(SPECTRUM_RATES, "gamma", [0.01, 0.02, 0.03])
    path = tmp_path / "spec.csv"
    sw.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "sweep_value" and rows[0][1] == "re_lambda_1"
    assert rows[0][17] == "im_lambda_1" and rows[0][-1] == "near_defective"
    assert len(rows) == 4 and len(rows[1]) == 34
    assert float(rows[2][0]) == 0.02


@pytest.mark.parametrize("seed", range(4))
def test_reduced_spectrum_embeds(seed):
    assert reduced_spectrum_embeds(random_config(np.random.default_rng(seed))) < 1e-9


def test_riemann_sheets_origin_gap():
    sheets = riemann_sheets(GAIN_LOSS, [0.0], [0.0])
    assert abs(sheets.sheet_a[0, 0] - sheets.sheet_b[0, 0]) == pytest.approx(2 * 0.01)


def test_riemann_sheets_detuning_symmetry():
    deltas = np.linspace(-0.04, 0.04, 9)
    gammas = np.linspace(0.0, 0.03, 7)
    sh = riemann_sheets(GAIN_LOSS, deltas, gammas)
    for i, dl in enumerate(deltas):
        j = len(deltas) - 1 - i
        for k, gm in enumerate(gammas):
            G = derived_rates(GAIN_LOSS.replace(gamma=gm)).Gamma_total
            here = 4 * np.array([sh.sheet_a[i, k], sh.sheet_b[i, k]]) - 4 + 1j * G
            mirror = 4 * np.array([sh.sheet_a[j, k], sh.sheet_b[j, k]]) - 4 + 1j * G
            assert set_distance(here, -np.conj(mirror)) < 1e-12


def test_riemann_sheets_more_decaying_flag():
    sh = riemann_sheets(GAIN_LOSS, [0.02], [0.005, 0.03])
    assert sh.more_decaying.shape == (1, 2)
    np.testing.assert_array_equal(sh.more_decaying, sh.sheet_a.imag < sh.sheet_b.imag)


def test_loop_around_ep_swaps_sheets():
    g_ep = 4 * 0.01 / 2.2
    path = follow_loop(GAIN_LOSS, centre=(0.0, g_ep), radius=(0.004, 0.004))
    np.testing.assert_allclose(path[-1], path[0][::-1], atol=1e-9)


def test_loop_away_from_ep_returns():
    g_ep = 4 * 0.01 / 2.2
    path = follow_loop(GAIN_LOSS, centre=(0.0, 2 * g_ep), radius=(0.004, 0.004))
    np.testing.assert_allclose(path[-1], path[0], atol=1e-9)


def test_full_spectrum_contains_reduced_at_ep():
    cfg = GAIN_LOSS.replace(gamma=locate_ep(0.5, GAIN_LOSS).gamma_EP, q=0.5)
    w = np.linalg.eigvals(build_liouvillian(cfg).matrix)
    lam = analytic_liouvillian_eigs(cfg).eigenvalues
    # coalescing cluster is resolved only to about eps**(1/3)
    assert set_distance(lam, w) < 1e-5
