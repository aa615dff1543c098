"""Final motional excitation under a constant spring-constant error.

Two independent routes are provided:

* :func:`excitation_perturbative` integrates the error source
  ``lam * alpha'' - B * W'^2`` against ``cos/sin(W' t)``. It is exact within the
  harmonic approximation provided the unperturbed trajectories return to rest
  (``alpha(T) = alpha'(T) = 0``), which holds for the designed protocols only.
* :func:`excitation_oracle` propagates the perturbed mode trajectory ``F`` and
  takes the coherent displacement energy ``F'(T)^2 / 2 + W'^2 F(T)^2 / 2``. It
  works for any protocol.

Zero-point energy is never included.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import mode_dynamics as md
from .constants import HBAR
from .core_model import LAMBDA_MIN, MODES, ModeData, TrapSpec
from .errors import ConfigurationError, ContractError, NumericalError
from .protocols import design_cosine

log = logging.getLogger(__name__)

# Kinds accepted by the perturbative formula. The formula is exact only when
# both unperturbed modes return to rest; that holds by construction for cosine,
# poly14 and static, and only approximately for the two centre-of-mass designs.
RETURN_TO_REST_KINDS = ("cosine", "poly14", "static", "cm_only", "cm_cosine")

RESIDUAL_RTOL = 1e-9


@dataclass(frozen=True)
class ExcitationReport:
    E_plus: float
    E_minus: float
    E_total: float
    E_total_hbarOmega_minus: float
    E_total_hbarOmega1: float
    method: str
    lam: float
    protocol_kind: str

    def row(self) -> dict:
        return {
            "lambda": self.lam,
            "E_plus_J": self.E_plus,
            "E_minus_J": self.E_minus,
            "E_total_J": self.E_total,
            "E_total_hbarOmega_minus": self.E_total_hbarOmega_minus,
            "method": self.method,
        }


@dataclass(frozen=True)
class ResidualIntegrals:
    mode: str
    I_cos: float
    I_sin: float
    D_plus: float
    D_minus: float

    @property
    def combination(self) -> float:
        """``I_cos + I_sin``, the sum that has a closed form for the cosine ansatz."""
        return self.I_cos + self.I_sin

    @property
    def magnitude(self) -> float:
        return math.hypot(self.I_cos, self.I_sin)


def _check_lambda(lam):
    if not lam > LAMBDA_MIN:
        raise ConfigurationError(f"lambda must be > {LAMBDA_MIN}, got {lam}")


def _report(p, modes, lam, energies, method) -> ExcitationReport:
    E_plus, E_minus = energies
    E_total = E_plus + E_minus
    omega1 = p.trap.omega1
    return ExcitationReport(
        E_plus=E_plus, E_minus=E_minus, E_total=E_total,
        E_total_hbarOmega_minus=E_total / (HBAR * modes.Omega_minus * math.sqrt(1.0 + lam)),
        E_total_hbarOmega1=E_total / (HBAR * omega1),
        method=method, lam=lam, protocol_kind=p.kind,
    )


def unperturbed_trajectories(p, modes: ModeData) -> tuple[md.ModeTrajectory, ...]:
    return tuple(md.alpha(p, f) for f in md.forcing(p, modes, 0.0))


def excitation_perturbative(p, modes: ModeData, lam: float,
                            alphas: tuple[md.ModeTrajectory, ...] | None = None) -> ExcitationReport:
    """Excitation from the error-source integrals.

    ``alphas`` may carry precomputed unperturbed trajectories (they do not
    depend on ``lam``), which makes lambda sweeps cheap.
    """
    if p.kind not in RETURN_TO_REST_KINDS:
        raise ContractError(
            f"{p.kind} protocol does not bring the unperturbed modes to rest; "
            "use the displacement oracle (method='oracle') instead")
    _check_lambda(lam)
    fs = md.forcing(p, modes, lam)
    if alphas is None:
        alphas = tuple(md.alpha(p, f) for f in fs)
    energies = []
    for f, a in zip(fs, alphas):
        source = lam * a.second_derivative() - f.B(a.t) * f.omega_p**2
        i_cos, i_sin = md.weighted_integrals(source, a.t, f.omega_p)
        energies.append(0.5 * i_cos**2 + 0.5 * i_sin**2)
    return _report(p, modes, lam, energies, "perturbative")


def excitation_oracle(p, modes: ModeData, lam: float) -> ExcitationReport:
    """Excitation from the endpoint of the perturbed mode trajectories."""
    _check_lambda(lam)
    energies = []
    for f in md.forcing(p, modes, lam):
        F = md.perturbed_trajectory(p, f)
        value, derivative = F.final
        energies.append(0.5 * derivative**2 + 0.5 * f.omega_p**2 * value**2)
    return _report(p, modes, lam, energies, "displacement_oracle")


def excitation(p, modes: ModeData, lam: float, method: str = "perturbative",
               alphas=None) -> ExcitationReport:
    if method == "perturbative":
        return excitation_perturbative(p, modes, lam, alphas)
    if method in ("oracle", "displacement_oracle"):
        return excitation_oracle(p, modes, lam)
    raise ConfigurationError(f"unknown method {method!r}; expected perturbative or oracle")


def sweep_lambda(p, modes: ModeData, lams, method: str = "perturbative") -> list[ExcitationReport]:
    alphas = unperturbed_trajectories(p, modes) if method == "perturbative" else None
    return [excitation(p, modes, float(lam), method, alphas) for lam in lams]


def residual_denominators(T: float, modes: ModeData) -> tuple[float, float]:
    """``(D_plus, D_minus)`` for the cosine residual-integral closed form."""
    pi = math.pi

    def poly(x):
        return (11025 * pi**8 - 12916 * pi**6 * x**2 + 1974 * pi**4 * x**4
                - 84 * pi**2 * x**6 + x**8)

    Wp, Wm = modes.Omega_plus, modes.Omega_minus
    return poly(T * Wp) * Wm**2, poly(T * Wm) * Wp**2


def elimination_residuals(p, modes: ModeData) -> tuple[ResidualIntegrals, ResidualIntegrals]:
    """``int alpha cos(W t)`` and ``int alpha sin(W t)`` for both modes.

    Starts on the unperturbed trajectory's grid and keeps doubling until the
    two integrals themselves have converged.
    """
    T = p.trap.T
    D_plus, D_minus = residual_denominators(T, modes)
    floor = 1e-13 * math.sqrt(p.trap.u0) / p.trap.omega1 * p.trap.d * T
    out = []
    for f in md.forcing(p, modes, 0.0):
        n = md.alpha(p, f).grid_size
        t = md.time_grid(T, n)
        prev = md.endpoint_conditions(f.q0(t), t, f.omega)[2:]
        last_change = math.inf
        while True:
            n *= 2
            if n > md.MAX_INTERVALS:
                raise NumericalError("residual integrals did not converge",
                                     estimate=last_change)
            t = md.time_grid(T, n)
            cur = md.endpoint_conditions(f.q0(t), t, f.omega)[2:]
            change = float(np.abs(cur - prev).max())
            if change <= RESIDUAL_RTOL * max(np.hypot(*cur), floor):
                break
            if change >= last_change:
                # refinement no longer helps: summation roundoff dominates
                log.info("%s-mode residual integrals at roundoff plateau (%.1e) with %d intervals",
                         f.mode, last_change, n // 2)
                cur = prev
                break
            prev, last_change = cur, change
        out.append(ResidualIntegrals(f.mode, float(cur[0]), float(cur[1]), D_plus, D_minus))
    return tuple(out)


def cosine_residual_closed_form(modes: ModeData, trap: TrapSpec,
                           calibration: dict | None = None) -> dict[str, float]:
    """Closed form of ``W^2 (I_cos + I_sin)`` per mode for the cosine ansatz.

    ``calibration`` maps mode -> multiplicative constant (default 1).
    """
    T, d = trap.T, trap.d
    D = dict(zip(MODES, residual_denominators(T, modes)))
    out = {}
    for mode, other in (("plus", "minus"), ("minus", "plus")):
        W, Wo, c = modes.omega(mode), modes.omega(other), modes.coupling(mode)
        osc = 1.0 + math.cos(W * T) - math.sin(W * T)
        value = 11025 * d * math.pi**8 * c * W * (Wo**2 - W**2) / (2.0 * D[mode]) * osc
        out[mode] = value * (1.0 if calibration is None else calibration[mode])
    return out


def quadrature_combination(p, modes: ModeData) -> dict[str, float]:
    """Quadrature counterpart of :func:`cosine_residual_closed_form`."""
    return {r.mode: modes.omega(r.mode) ** 2 * r.combination
            for r in elimination_residuals(p, modes)}


def calibrate_closed_form(modes: ModeData, trap: TrapSpec) -> dict[str, float]:
    """One-point calibration of the closed form against quadrature at ``trap.T``."""
    numeric = quadrature_combination(design_cosine(trap, modes), modes)
    closed = cosine_residual_closed_form(modes, trap)
    return {m: (numeric[m] / closed[m] if closed[m] != 0.0 else 1.0) for m in MODES}


def report_dict(r: ExcitationReport) -> dict:
    return asdict(r)
