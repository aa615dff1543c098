"""Fast embedded invariant checks, run by ``ionshuttle selftest``.

Each check returns ``(name, passed, detail)``. The whole suite takes a few
seconds and needs nothing beyond the installed package.
"""

from __future__ import annotations

import math

import numpy as np

from . import excitation as ex
from . import mode_dynamics as md
from .constants import HBAR
from .core_model import make_ion_pair, make_trap, normal_modes
from .experiments import preset_config
from .protocols import design


def _identities():
    rng = np.random.default_rng(0)
    worst = 0.0
    for mu in rng.uniform(1.0, 100.0, 20):
        pair = make_ion_pair("a", "b", mass1=9.0, mass2=9.0 * mu)
        trap = make_trap(pair, 2 * math.pi * 2e6, 1e-4, 1e-5)
        m = normal_modes(pair, trap)
        mu = pair.mu
        w2 = trap.omega1**2
        worst = max(worst,
                    abs(m.a_plus**2 + m.b_plus**2 - 1), abs(m.a_minus**2 + m.b_minus**2 - 1),
                    abs(m.a_plus * m.a_minus + m.b_plus * m.b_minus),
                    abs(m.a_plus * m.b_minus - m.a_minus * m.b_plus - 1),
                    abs((m.Omega_plus**2 + m.Omega_minus**2) / (w2 * 2 * (1 + 1 / mu)) - 1),
                    abs(m.Omega_plus**2 * m.Omega_minus**2 / (w2**2 * 3 / mu) - 1))
    return "normal-mode identities", worst < 1e-12, f"worst deviation {worst:.2e}"


def _equal_mass():
    pair = make_ion_pair("Be9", "Be9")
    trap = make_trap(pair, 2 * math.pi * 2e6, 370e-6, 10.5 / 2e6)
    m = normal_modes(pair, trap)
    worst = max(abs(m.a_plus - 1 / math.sqrt(2)), abs(m.b_plus + 1 / math.sqrt(2)),
                abs(m.Omega_plus**2 / trap.omega1**2 - 3), abs(m.Omega_minus**2 / trap.omega1**2 - 1),
                abs(m.c_plus) / math.sqrt(pair.m1))
    return "equal-mass limit", worst < 1e-12, f"worst deviation {worst:.2e}"


def _zero_error():
    pair, trap = preset_config("paper2014")
    m = normal_modes(pair, trap)
    worst = 0.0
    for kind in ("cosine", "poly14"):
        p = design(kind, pair, trap, m)
        if ex.excitation_perturbative(p, m, 0.0).E_total != 0.0:
            return "zero-error exactness", False, f"{kind}: perturbative E(0) != 0"
        worst = max(worst, ex.excitation_oracle(p, m, 0.0).E_total / (HBAR * m.Omega_minus))
    return "zero-error exactness", worst < 1e-9, f"oracle E(0) up to {worst:.2e} hbar Omega-"


def _poly14_conditions():
    pair, trap = preset_config("paper2014")
    m = normal_modes(pair, trap)
    p = design("poly14", pair, trap, m)
    scale = math.sqrt(pair.m1) * trap.d
    worst = 0.0
    for f in md.forcing(p, m, 0.0):
        t = md.time_grid(trap.T, p.design_intervals)
        v = md.endpoint_conditions(f.q0(t), t, f.omega)
        worst = max(worst, abs(v[0]) / scale, abs(v[1]) / (scale * f.omega),
                    abs(v[2]) / (scale * trap.T), abs(v[3]) / (scale * trap.T))
    return "poly14 design conditions", worst < 1e-8, f"worst residual {worst:.2e}"


def _methods_agree():
    pair, trap = preset_config("paper2014")
    m = normal_modes(pair, trap)
    p = design("cosine", pair, trap, m)
    worst = 0.0
    for lam in (-0.2, -0.05, 0.05, 0.2):
        a = ex.excitation_perturbative(p, m, lam).E_total
        b = ex.excitation_oracle(p, m, lam).E_total
        worst = max(worst, abs(a - b) / (HBAR * m.Omega_minus))
    return "perturbative vs oracle (cosine)", worst < 1e-6, f"max difference {worst:.2e} hbar Omega-"


CHECKS = (_identities, _equal_mass, _zero_error, _poly14_conditions, _methods_agree)


def run_all():
    results = []
    for check in CHECKS:
        name, passed, detail = check()
        results.append((name, bool(passed), detail))
    return results
