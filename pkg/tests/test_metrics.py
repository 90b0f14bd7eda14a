import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _configs import GAIN_LOSS, random_density_matrix
from chiralbell.metrics import MetricSample, bell_fidelity, concurrence, pt_symmetry_check, purity
from chiralbell.model import MarkovianValidityWarning, SystemConfig, basis_state, bell_states, projector

PLUS, MINUS = bell_states()
MIXED = np.eye(4) / 4


def pt_config(base, **changes):
    # the PT point delta = -2 epsilon lies outside the Markovian regime by construction
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarkovianValidityWarning)
        return base.replace(**changes)


def random_unitary(rng, n=2):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_fidelity_examples():
    rho = projector(MINUS)
    assert bell_fidelity(rho, "-") == pytest.approx(1)
    assert bell_fidelity(rho, "+") == pytest.approx(0, abs=1e-16)
    assert bell_fidelity(MIXED, "+") == pytest.approx(0.25)
    assert bell_fidelity(MIXED, "minus") == pytest.approx(0.25)
    sep = projector(basis_state("10"))
    assert bell_fidelity(sep, "+") == pytest.approx(0.5)
    assert bell_fidelity(sep, "-") == pytest.approx(0.5)
    with pytest.raises(ValueError):
        bell_fidelity(sep, "x")


def test_concurrence_examples():
    assert concurrence(MIXED) == 0.0
    assert concurrence(projector(PLUS)) == pytest.approx(1, abs=1e-12)
    assert concurrence(projector(MINUS)) == pytest.approx(1, abs=1e-12)
    assert concurrence(projector(basis_state("01"))) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("p, expected", [(0.6, 0.4), (1 / 3, 0.0), (0.2, 0.0), (0.9, 0.85)])
def test_concurrence_werner(p, expected):
    rho = p * projector(MINUS) + (1 - p) * MIXED
    assert concurrence(rho) == pytest.approx(expected, abs=1e-12)


def test_concurrence_partially_entangled_pure():
    # cos(t)|10> + sin(t)|01> has C = |sin(2t)|
    t = 0.3
    psi = math.cos(t) * basis_state("10") + math.sin(t) * basis_state("01")
    assert concurrence(projector(psi)) == pytest.approx(abs(math.sin(2 * t)), abs=1e-12)


def test_purity_examples():
    assert purity(projector(PLUS)) == pytest.approx(1)
    assert purity(MIXED) == pytest.approx(0.25)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_fidelity_linear(seed, a):
    rng = np.random.default_rng(seed)
    r1, r2 = random_density_matrix(rng), random_density_matrix(rng)
    for which in "+-":
        mix = bell_fidelity(a * r1 + (1 - a) * r2, which)
        assert mix == pytest.approx(a * bell_fidelity(r1, which) + (1 - a) * bell_fidelity(r2, which), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_metric_ranges(seed, rank):
    rho = random_density_matrix(np.random.default_rng(seed), rank)
    s = MetricSample.of(rho)
    assert s.fidelity_plus + s.fidelity_minus <= 1 + 1e-12
    assert -1e-9 <= s.concurrence <= 1 + 1e-9
    assert 0.25 - 1e-9 <= s.purity <= 1 + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_concurrence_local_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(rng, 2)
    u = np.kron(random_unitary(rng), random_unitary(rng))
    assert abs(concurrence(u @ rho @ u.conj().T) - concurrence(rho)) < 1e-9


def test_pt_gain_loss():
    rep = pt_symmetry_check(pt_config(GAIN_LOSS, alpha=1.0, gamma=0.01, delta=-2.0))
    assert rep.is_pt_symmetric
    assert rep.violated_conditions == []
    assert rep.occupation_sum == 1.0


def test_pt_unbalanced_rates():
    rep = pt_symmetry_check(pt_config(GAIN_LOSS, alpha=1.2, gamma=0.01, delta=-2.0))
    assert not rep.is_pt_symmetric
    assert "gamma1_plus == gamma2_minus" in rep.violated_conditions


def test_pt_infinite_temperature():
    rep = pt_symmetry_check(pt_config(SystemConfig(), delta=-2.0, gamma=0.01, alpha=1.0, beta1=0.0, beta2=0.0))
    assert rep.is_pt_symmetric
    assert rep.occupation_sum == pytest.approx(1.0)


def test_pt_detuning_condition():
    rep = pt_symmetry_check(pt_config(GAIN_LOSS, alpha=1.0, gamma=0.01, delta=0.0))
    assert rep.violated_conditions == ["delta == -2*epsilon"]


def test_pt_finite_temperature_needs_matching_occupations():
    # qubit 2 sits at energy -1, so n2(beta) = 1 - n1(beta) and the rates cross-match
    rep = pt_symmetry_check(pt_config(SystemConfig(), delta=-2.0, gamma=0.01, alpha=1.0, beta1=0.7, beta2=0.7))
    assert rep.is_pt_symmetric
    assert rep.occupation_sum == pytest.approx(1.0, rel=1e-14)
    rep = pt_symmetry_check(pt_config(SystemConfig(), delta=-2.0, gamma=0.01, alpha=1.0, beta1=0.7, beta2=0.3))
    assert not rep.is_pt_symmetric
