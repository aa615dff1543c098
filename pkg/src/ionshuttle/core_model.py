"""Ion pair and trap configuration, and the static normal-mode decomposition.

Ion 1 is always the right-hand ion. Both ions carry charge +e. Coordinates are
SI throughout; ``m`` below always means ``m1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import constants
from .errors import ConfigurationError

LAMBDA_MIN = -0.99


@dataclass(frozen=True)
class IonPair:
    name1: str
    name2: str
    m1: float
    m2: float

    @property
    def mu(self) -> float:
        return self.m2 / self.m1

    @property
    def total_mass(self) -> float:
        return self.m1 + self.m2


@dataclass(frozen=True)
class TrapSpec:
    """Trap parameters; build with :func:`make_trap` so that ``u0`` is consistent."""

    omega1: float
    d: float
    T: float
    lam: float
    u0: float

    @property
    def T0(self) -> float:
        return 2.0 * math.pi / self.omega1

    def with_(self, **changes) -> "TrapSpec":
        # u0 only depends on m1 and omega1, so T, d and lam can be swapped freely
        if "omega1" in changes or "u0" in changes:
            raise ConfigurationError("omega1/u0 cannot be replaced; use make_trap")
        trap = replace(self, **changes)
        _validate_trap(trap)
        return trap


@dataclass(frozen=True)
class ModeData:
    a_plus: float
    a_minus: float
    b_plus: float
    b_minus: float
    Omega_plus: float
    Omega_minus: float
    Omega_plus_p: float
    Omega_minus_p: float
    l: float
    l_p: float
    c_plus: float
    c_minus: float
    lam: float

    def omega(self, mode: str, perturbed: bool = False) -> float:
        if mode == "plus":
            return self.Omega_plus_p if perturbed else self.Omega_plus
        if mode == "minus":
            return self.Omega_minus_p if perturbed else self.Omega_minus
        raise ValueError(f"unknown mode {mode!r}")

    def coupling(self, mode: str) -> float:
        if mode == "plus":
            return self.c_plus
        if mode == "minus":
            return self.c_minus
        raise ValueError(f"unknown mode {mode!r}")


MODES = ("plus", "minus")


def make_ion_pair(name1: str, name2: str, mass1: float | None = None,
                  mass2: float | None = None) -> IonPair:
    """Resolve two species to an :class:`IonPair`.

    ``mass1``/``mass2`` are optional explicit masses in u; when given, the
    corresponding name is only a label.
    """
    masses = []
    for name, amu in ((name1, mass1), (name2, mass2)):
        if amu is not None:
            if not amu > 0:
                raise ConfigurationError(f"mass of {name!r} must be positive, got {amu}")
            masses.append(amu * constants.ATOMIC_MASS_UNIT)
            continue
        m = constants.isotope_mass(name)
        if m is None:
            raise ConfigurationError(
                f"unknown species {name!r}; known: {', '.join(constants.ISOTOPE_MASSES_AMU)}"
                " (or give an explicit mass in u)")
        masses.append(m)
    return IonPair(name1, name2, masses[0], masses[1])


def _validate_trap(trap: TrapSpec) -> None:
    if not trap.omega1 > 0:
        raise ConfigurationError(f"omega1 must be positive, got {trap.omega1}")
    if not trap.d > 0:
        raise ConfigurationError(f"d must be positive, got {trap.d}")
    if not trap.T > 0:
        raise ConfigurationError(f"T must be positive, got {trap.T}")
    if not trap.lam > LAMBDA_MIN:
        raise ConfigurationError(f"lambda must be > {LAMBDA_MIN}, got {trap.lam}")


def make_trap(pair: IonPair, omega1: float, d: float, T: float, lam: float = 0.0) -> TrapSpec:
    """Trap with angular frequency ``omega1`` (rad/s) for ion 1, distance ``d`` and
    duration ``T`` in SI units."""
    trap = TrapSpec(float(omega1), float(d), float(T), float(lam), pair.m1 * omega1**2)
    _validate_trap(trap)
    return trap


def equilibrium_distance(u0: float, lam: float = 0.0) -> float:
    l = 2.0 * (constants.COULOMB_CONSTANT / (4.0 * u0)) ** (1.0 / 3.0)
    return l * (1.0 + lam) ** (-1.0 / 3.0)


def normal_modes(pair: IonPair, trap: TrapSpec) -> ModeData:
    """Mass-weighted normal-mode coefficients, frequencies and coupling factors."""
    mu = pair.mu
    root = math.sqrt(1.0 - 1.0 / mu + 1.0 / mu**2)
    x_plus = 1.0 - 1.0 / mu - root
    x_minus = 1.0 - 1.0 / mu + root
    a_plus = math.sqrt(1.0 / (1.0 + x_plus**2 * mu))
    a_minus = math.sqrt(1.0 / (1.0 + x_minus**2 * mu))
    b_plus = x_plus * math.sqrt(mu) * a_plus
    b_minus = x_minus * math.sqrt(mu) * a_minus

    w1 = trap.omega1
    Omega_plus = w1 * math.sqrt(1.0 + 1.0 / mu + root)
    Omega_minus = w1 * math.sqrt(1.0 + 1.0 / mu - root)
    scale = math.sqrt(1.0 + trap.lam)

    sqrt_m = math.sqrt(pair.m1)
    l = equilibrium_distance(trap.u0)
    return ModeData(
        a_plus=a_plus, a_minus=a_minus, b_plus=b_plus, b_minus=b_minus,
        Omega_plus=Omega_plus, Omega_minus=Omega_minus,
        Omega_plus_p=Omega_plus * scale, Omega_minus_p=Omega_minus * scale,
        l=l, l_p=l * (1.0 + trap.lam) ** (-1.0 / 3.0),
        c_plus=sqrt_m * (a_plus + b_plus * math.sqrt(mu)),
        c_minus=sqrt_m * (a_minus + b_minus * math.sqrt(mu)),
        lam=trap.lam,
    )


def equilibrium_positions(trap: TrapSpec, modes: ModeData, Q0: float) -> tuple[float, float]:
    """Positions (q1, q2) of the two ions at rest in a trap centred at ``Q0``."""
    return Q0 + 0.5 * modes.l_p, Q0 - 0.5 * modes.l_p


def potential(pair: IonPair, trap: TrapSpec, q1, q2, Q0):
    """Laboratory potential energy with spring constant ``u0 (1 + lam)``."""
    u = trap.u0 * (1.0 + trap.lam)
    return 0.5 * u * ((q1 - Q0) ** 2 + (q2 - Q0) ** 2) + constants.COULOMB_CONSTANT / (q1 - q2)


def potential_gradient(pair: IonPair, trap: TrapSpec, q1, q2, Q0):
    u = trap.u0 * (1.0 + trap.lam)
    coulomb = constants.COULOMB_CONSTANT / (q1 - q2) ** 2
    return u * (q1 - Q0) - coulomb, u * (q2 - Q0) + coulomb
