import io
import json
import math
import warnings

import numpy as np
import pytest

from ionshuttle import mode_dynamics as md
from ionshuttle import protocols as pr
from ionshuttle.core_model import make_ion_pair, make_trap, normal_modes
from ionshuttle.errors import DesignError, DomainError

DESIGNED = ("cosine", "poly14", "naive_quintic", "cm_only", "cm_cosine")


@pytest.fixture(scope="module")
def designed(base):
    return {k: pr.design(k, base.pair, base.trap, base.modes) for k in DESIGNED}


@pytest.mark.parametrize("kind", DESIGNED)
def test_endpoint_conditions(designed, kind):
    p = designed[kind]
    T, d = p.trap.T, p.d
    Q, Qd, Qdd = p.evaluate(np.array([0.0, T]))
    assert abs(Q[0]) < 1e-9 * d and abs(Q[1] - d) < 1e-9 * d
    assert np.all(np.abs(Qd) < 1e-9 * d / T)
    assert np.all(np.abs(Qdd) < 1e-9 * d / T**2)


@pytest.mark.parametrize("kind", DESIGNED)
def test_derivatives_match_finite_differences(designed, kind):
    p = designed[kind]
    T = p.trap.T
    t = np.linspace(0.0, T, 1001)[1:-1]
    h = 1e-5 * T
    Q0 = lambda x: p.evaluate(x)[0]  # noqa: E731
    _, Qd, Qdd = p.evaluate(t)
    fd1 = (Q0(t + h) - Q0(t - h)) / (2 * h)
    assert np.abs(fd1 - Qd).max() < 1e-6 * np.abs(Qd).max()
    fd_acc = (p.evaluate(t + h)[1] - p.evaluate(t - h)[1]) / (2 * h)
    assert np.abs(fd_acc - Qdd).max() < 1e-6 * np.abs(Qdd).max()


def test_cosine_midpoint_and_limits(base, designed):
    p = designed["cosine"]
    assert p(p.trap.T / 2) == pytest.approx(base.trap.d / 2, rel=1e-14)
    assert p.evaluate(0.0) == (pytest.approx(0.0, abs=1e-18), pytest.approx(0.0, abs=1e-18),
                               pytest.approx(0.0, abs=1e-3))
    b = pr.cosine_coefficients(1e6, base.modes.Omega_plus, base.modes.Omega_minus)
    assert b[3] == pytest.approx(-49 / 2048, rel=1e-9)
    assert b[4] == pytest.approx(5 / 2048, rel=1e-9)


def test_naive_values(base, designed):
    p = designed["naive_quintic"]
    T, d = p.trap.T, p.d
    assert p(T / 2) == pytest.approx(d / 2, rel=1e-14)
    Q, Qd, Qdd = p.evaluate(T)
    assert (Q, Qd, Qdd) == (pytest.approx(d), pytest.approx(0.0, abs=1e-18),
                            pytest.approx(0.0, abs=1e-6))
    assert p.evaluate(0.0)[2] == 0.0


def test_poly14_differs_from_cosine(designed, base):
    # Overshoot beyond [0, d] is allowed but not required; the design here stays
    # inside the interval and differs from the cosine trajectory at the 1e-2 d level.
    a = designed["poly14"].sample(2001)["Q0"]
    b = designed["cosine"].sample(2001)["Q0"]
    assert np.abs(a - b).max() > 1e-3 * base.trap.d


def test_poly14_residual_integrals(base, designed):
    p = designed["poly14"]
    unit = math.sqrt(base.pair.m1) * p.d * p.trap.T
    for f in md.forcing(p, base.modes, 0.0):
        t = md.time_grid(p.trap.T, p.design_intervals)
        v = md.endpoint_conditions(f.q0(t), t, f.omega)
        assert np.abs(v[2:]).max() < 1e-8 * unit


def test_poly14_condition_number_reported(designed):
    p = designed["poly14"]
    assert p.condition_number is not None and 1.0 < p.condition_number < pr.CONDITION_WARN
    assert len(p.coefficients) == 14


def test_poly14_is_deterministic(base, designed):
    again = pr.design_poly14(base.trap, base.modes)
    assert again.coefficients == designed["poly14"].coefficients


def test_rows_are_linear_in_coefficients(base, designed):
    """Monomial rows summed with the solved coefficients equal direct evaluation."""
    p = designed["poly14"]
    T, d = p.trap.T, p.d
    sqrt_m = math.sqrt(base.pair.m1)
    modes = [(base.modes.Omega_plus, base.modes.c_plus),
             (base.modes.Omega_minus, base.modes.c_minus)]
    rows = pr.condition_rows(T, d, modes, 13, p.design_intervals, sqrt_m)
    combined = rows @ np.array(p.coefficients)
    direct = []
    for f in md.forcing(p, base.modes, 0.0):
        t = md.time_grid(T, p.design_intervals)
        direct.append(md.endpoint_conditions(f.q0(t), t, f.omega)
                      / (np.array([1.0, f.omega, T, T]) * sqrt_m * d))
    direct = np.concatenate(direct)
    assert np.abs(combined - direct).max() < 1e-10 * np.abs(rows).max()


def test_ill_conditioned_design_warns(base):
    # a very long duration makes the monomial rows nearly dependent
    trap = base.trap_at(400.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            pr.design_poly14(trap, base.modes)
        except DesignError as exc:
            assert exc.condition_number is None or exc.condition_number > 0
    assert any("ill-conditioned" in str(w.message) for w in caught)


def test_cm_cosine_equal_mass_matches_cosine(equal_mass):
    pair, trap, m = equal_mass
    assert pr.omega_cm(pair, trap) == pytest.approx(trap.omega1, rel=1e-14)
    cm = pr.design_cm_cosine(trap, pair)
    ref = pr.Protocol("cosine", pr.cosine_coefficients(trap.T, trap.omega1, trap.omega1), trap,
                      m, trap.d)
    t = np.linspace(0, trap.T, 101)
    assert np.allclose(cm.evaluate(t)[0], ref.evaluate(t)[0], rtol=1e-12, atol=0)


def test_omega_cm_definition(base):
    w = pr.omega_cm(base.pair, base.trap)
    expected = 2 * base.trap.omega1**2 * base.pair.m1 / base.pair.total_mass
    assert w**2 == pytest.approx(expected, rel=1e-14)


def test_cm_only_equal_mass_matches_poly14(equal_mass):
    pair, trap, m = equal_mass
    a = pr.design_cm_only(trap, pair)
    b = pr.design_poly14(trap, m)
    assert np.allclose(a.coefficients, b.coefficients, rtol=1e-8, atol=1e-8)


def test_evaluate_domain(designed):
    p = designed["cosine"]
    with pytest.raises(DomainError):
        p.evaluate(-1e-9)
    with pytest.raises(DomainError):
        p.evaluate(2 * p.trap.T)


def test_static_protocol_is_zero(base):
    p = pr.design("static", base.pair, base.trap)
    assert p.d == 0.0
    assert np.all(np.array(p.evaluate(np.linspace(0, p.trap.T, 5))) == 0.0)


def test_unknown_kind(base):
    with pytest.raises(ValueError, match="unknown protocol"):
        pr.design("bogus", base.pair, base.trap)


def test_csv_and_record(designed, base):
    p = designed["cosine"]
    buf = io.StringIO()
    pr.write_csv(p, buf, n=11)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,Q0,Q0dot,Q0ddot" and len(lines) == 12
    assert float(lines[-1].split(",")[1]) == pytest.approx(base.trap.d, rel=1e-12)
    rec = json.loads(pr.dumps_record(p))
    assert rec["kind"] == "cosine" and len(rec["coefficients"]) == 5


def test_other_ion_pairs_design():
    pair = make_ion_pair("Ca40", "Be9")
    trap = make_trap(pair, 2 * math.pi * 1e6, 200e-6, 12 * 1e-6)
    m = normal_modes(pair, trap)
    for kind in ("cosine", "poly14"):
        pr.check_endpoints(pr.design(kind, pair, trap, m))
