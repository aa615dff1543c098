"""Physical constants (CODATA 2018) and the built-in isotope mass table.

All code reads these values from here so that results do not depend on the
installed version of scipy.constants.
"""

import math

ELEMENTARY_CHARGE = 1.602176634e-19  # C (exact)
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m
HBAR = 1.054571817e-34  # J s
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg

COULOMB_CONSTANT = ELEMENTARY_CHARGE**2 / (4.0 * math.pi * VACUUM_PERMITTIVITY)  # N m^2

# Neutral atomic masses in u (AME2020 / CIAAW values).
ISOTOPE_MASSES_AMU = {
    "Be9": 9.0121831,
    "Mg24": 23.985041697,
    "Mg25": 24.985836976,
    "Mg26": 25.982592968,
    "Ca40": 39.962590863,
}


def _canonical(name):
    # accept "Be9", "be9", "9Be", "Be-9"
    s = name.strip().replace("-", "").replace("_", "")
    digits = "".join(ch for ch in s if ch.isdigit())
    letters = "".join(ch for ch in s if ch.isalpha())
    return letters.capitalize() + digits


def isotope_mass(name):
    """Mass in kg of a species from the built-in table, or None if unknown."""
    amu = ISOTOPE_MASSES_AMU.get(_canonical(name))
    if amu is None:
        return None
    return amu * ATOMIC_MASS_UNIT
