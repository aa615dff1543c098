import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionshuttle import constants
from ionshuttle.core_model import (equilibrium_distance, equilibrium_positions, make_ion_pair,
                                   make_trap, normal_modes, potential_gradient)
from ionshuttle.errors import ConfigurationError

W1 = 2 * math.pi * 2e6


def modes_for(mu, lam=0.0):
    pair = make_ion_pair("A", "B", mass1=9.0, mass2=9.0 * mu)
    trap = make_trap(pair, W1, 370e-6, 5e-6, lam)
    return pair, trap, normal_modes(pair, trap)


def test_coulomb_constant_from_codata():
    expected = constants.ELEMENTARY_CHARGE**2 / (4 * math.pi * constants.VACUUM_PERMITTIVITY)
    assert constants.COULOMB_CONSTANT == pytest.approx(expected, rel=1e-12)
    assert min(constants.COULOMB_CONSTANT, constants.HBAR, constants.ATOMIC_MASS_UNIT) > 0


def test_isotope_lookup():
    assert make_ion_pair("Be9", "Be9").mu == 1.0
    pair = make_ion_pair("Be9", "Mg24")
    assert pair.mu == pytest.approx(23.985041697 / 9.0121831, rel=1e-12)
    assert pair.mu == pytest.approx(2.6614, abs=1e-4)
    assert make_ion_pair("9Be", "ca-40").m2 == make_ion_pair("Be9", "Ca40").m2


def test_unknown_species_named():
    with pytest.raises(ConfigurationError, match="Xx99"):
        make_ion_pair("Be9", "Xx99")


def test_explicit_mass_overrides_table():
    pair = make_ion_pair("Be9", "custom", mass2=30.0)
    assert pair.m2 == 30.0 * constants.ATOMIC_MASS_UNIT
    with pytest.raises(ConfigurationError):
        make_ion_pair("Be9", "x", mass2=-1.0)


def test_input_order_preserved():
    a, b = make_ion_pair("Mg24", "Be9"), make_ion_pair("Be9", "Mg24")
    assert a.m1 == b.m2 and a.mu == pytest.approx(1 / b.mu)


@pytest.mark.parametrize("kw", [{"omega1": 0.0}, {"d": -1.0}, {"T": 0.0}, {"lam": -0.99}])
def test_trap_validation(kw):
    pair = make_ion_pair("Be9", "Mg24")
    args = {"omega1": W1, "d": 1e-4, "T": 1e-5, "lam": 0.0, **kw}
    with pytest.raises(ConfigurationError):
        make_trap(pair, **args)


def test_u0_consistent_for_both_ions():
    pair = make_ion_pair("Be9", "Mg24")
    trap = make_trap(pair, W1, 1e-4, 1e-5)
    omega2 = W1 / math.sqrt(pair.mu)
    assert trap.u0 == pytest.approx(pair.m2 * omega2**2, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1.0, max_value=100.0))
def test_mode_identities(mu):
    _, trap, m = modes_for(mu)
    assert abs(m.a_plus**2 + m.b_plus**2 - 1) < 1e-12
    assert abs(m.a_minus**2 + m.b_minus**2 - 1) < 1e-12
    assert abs(m.a_plus * m.a_minus + m.b_plus * m.b_minus) < 1e-12
    assert abs(m.a_plus * m.b_minus - m.a_minus * m.b_plus - 1) < 1e-12
    assert m.Omega_plus > m.Omega_minus > 0


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1.0, max_value=100.0), st.floats(min_value=-0.5, max_value=0.5))
def test_perturbed_frequencies(mu, lam):
    _, _, m = modes_for(mu, lam)
    assert m.Omega_plus_p**2 == pytest.approx(m.Omega_plus**2 * (1 + lam), rel=1e-14)
    assert m.Omega_minus_p**2 == pytest.approx(m.Omega_minus**2 * (1 + lam), rel=1e-14)
    assert m.l_p == pytest.approx(m.l * (1 + lam) ** (-1 / 3), rel=1e-14)


def test_equal_mass_values(equal_mass):
    _, trap, m = equal_mass
    s = 1 / math.sqrt(2)
    assert (m.a_plus, m.b_plus) == (pytest.approx(s, abs=1e-15), pytest.approx(-s, abs=1e-15))
    assert (m.a_minus, m.b_minus) == (pytest.approx(s, abs=1e-15), pytest.approx(s, abs=1e-15))
    assert m.c_plus == 0.0


def test_mu_continuity_at_one():
    pair, _, lo = modes_for(1 - 1e-9)
    _, _, hi = modes_for(1 + 1e-9)
    # c_plus is zero at mu = 1, so every field is compared on its natural scale
    scales = {"a_plus": 1.0, "a_minus": 1.0, "b_plus": 1.0, "b_minus": 1.0,
              "Omega_plus": W1, "Omega_minus": W1, "l": lo.l,
              "c_plus": math.sqrt(pair.m1), "c_minus": math.sqrt(pair.m1)}
    for name, scale in scales.items():
        assert abs(getattr(lo, name) - getattr(hi, name)) < 1e-6 * scale, name


def test_equilibrium_distance_reference_value():
    pair = make_ion_pair("Be9", "Mg24")
    trap = make_trap(pair, W1, 370e-6, 5e-6)
    # hand evaluation of 2 (C_c / 4 u0)^(1/3)
    u0 = 9.0121831 * 1.66053906660e-27 * W1**2
    cc = 1.602176634e-19**2 / (4 * math.pi * 8.8541878128e-12)
    assert normal_modes(pair, trap).l == pytest.approx(2 * (cc / (4 * u0)) ** (1 / 3), rel=1e-12)
    assert normal_modes(pair, trap).l == pytest.approx(5.79e-6, rel=2e-3)
    assert equilibrium_distance(trap.u0, 0.1) == pytest.approx(
        normal_modes(pair, trap).l * 1.1 ** (-1 / 3), rel=1e-14)


@pytest.mark.parametrize("lam", [0.0, 0.1, -0.3])
@pytest.mark.parametrize("Q0", [0.0, 370e-6])
def test_equilibrium_force_vanishes(lam, Q0):
    pair = make_ion_pair("Be9", "Mg24")
    trap = make_trap(pair, W1, 370e-6, 5e-6, lam)
    m = normal_modes(pair, trap)
    q1, q2 = equilibrium_positions(trap, m, Q0)
    assert q1 - q2 == pytest.approx(m.l_p, rel=1e-12)
    if lam == 0.0 and Q0 == 0.0:
        assert (q1, q2) == (m.l / 2, -m.l / 2)
    f1, f2 = potential_gradient(pair, trap, q1, q2, Q0)
    assert max(abs(f1), abs(f2)) < 1e-10 * trap.u0 * m.l


def test_trap_with_revalidates():
    pair = make_ion_pair("Be9", "Mg24")
    trap = make_trap(pair, W1, 1e-4, 1e-5)
    assert trap.with_(T=2e-5).T == 2e-5
    with pytest.raises(ConfigurationError):
        trap.with_(lam=-2.0)
    with pytest.raises(ConfigurationError):
        trap.with_(omega1=1.0)
