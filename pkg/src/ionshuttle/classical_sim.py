"""Anharmonic classical dynamics of the two ions in the moving trap.

No harmonic approximation is made: the full Coulomb interaction is kept. The
equations are integrated in dimensionless trap-frame coordinates (length ``l``,
time ``1/omega1``, mass ``m1``), which turns the Coulomb factor into 1/2 and the
spring constant into 1. Coordinates are deviations from the equilibrium
positions,

    q1 = Q0 + l'/2 + y1 * l,     q2 = Q0 - l'/2 + y2 * l,

and the trap acceleration enters as a uniform inertial force. The excitation
energy at rest of the trap is then

    E_exc = v1^2/2 + mu v2^2/2 + (1+lam)(y1^2 + y2^2)/2 + rho^2 / (2 l'^2 (l' + rho))

with ``rho = y1 - y2``. The last term is the exact Coulomb remainder beyond
linear order, so the expression never subtracts two large energies.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import constants
from .constants import HBAR
from .core_model import IonPair, TrapSpec, normal_modes
from .errors import DomainError, IntegrationError

RTOL = 1e-11
METHOD = "DOP853"
DRIFT_RTOL_FACTOR = 10.0


@dataclass(frozen=True)
class ClassicalState:
    q1: float
    q2: float
    p1: float
    p2: float
    t: float


@dataclass(frozen=True)
class ClassicalRun:
    final_state: ClassicalState
    E_exc: float
    energy_drift_estimate: float
    steps: int
    E_exc_hbarOmega1: float


@dataclass(frozen=True)
class _Scales:
    """Dimensionless system parameters for one (pair, trap) combination."""

    mu: float
    lam: float
    l_p: float          # perturbed equilibrium distance in units of l
    length: float       # l in m
    omega1: float
    energy: float       # m1 omega1^2 l^2 in J

    @classmethod
    def from_config(cls, pair: IonPair, trap: TrapSpec) -> "_Scales":
        l = normal_modes(pair, trap).l
        return cls(pair.mu, trap.lam, (1.0 + trap.lam) ** (-1.0 / 3.0), l, trap.omega1,
                   pair.m1 * trap.omega1**2 * l**2)


def _rhs(sc: _Scales, accel):
    k = 1.0 + sc.lam
    inv_l2 = 1.0 / sc.l_p**2
    mu = sc.mu

    def f(tau, y):
        y1, y2, v1, v2 = y
        r = sc.l_p + y1 - y2
        coul = 0.5 * (1.0 / (r * r) - inv_l2)
        a0 = accel(tau)
        return (v1, v2, -a0 - k * y1 + coul, -a0 - (k * y2 + coul) / mu)

    return f


def _excitation(sc: _Scales, y) -> float:
    y1, y2, v1, v2 = y
    rho = y1 - y2
    return (0.5 * v1**2 + 0.5 * sc.mu * v2**2 + 0.5 * (1.0 + sc.lam) * (y1**2 + y2**2)
            + 0.5 * rho**2 / (sc.l_p**2 * (sc.l_p + rho)))


def _order_event(sc: _Scales):
    def event(tau, y):
        return sc.l_p + y[0] - y[1]
    event.terminal = True
    event.direction = -1
    return event


def _accel(p, sc: _Scales):
    """Dimensionless trap acceleration as a function of dimensionless time."""
    if p is None or p.d == 0.0:
        return lambda tau: 0.0
    T = p.trap.T
    factor = 1.0 / (sc.omega1**2 * sc.length)

    def accel(tau):
        t = min(max(tau / sc.omega1, 0.0), T)
        return float(p.evaluate(t)[2]) * factor

    return accel


def _integrate(sc: _Scales, accel, y0, tau_span, rtol, method):
    atol = rtol * 1e-3  # coordinates are O(1e-3..1) in units of l
    sol = solve_ivp(_rhs(sc, accel), tau_span, np.asarray(y0, dtype=float), method=method,
                    rtol=rtol, atol=atol, events=_order_event(sc))
    if sol.status == 1:
        raise IntegrationError("ion ordering violated (q1 <= q2) during integration",
                               state=sol.y[:, -1].copy())
    if sol.status != 0:
        raise IntegrationError(f"integrator failed: {sol.message}", state=sol.y[:, -1].copy())
    return sol


def _to_state(sc: _Scales, y, Q0: float, Q0dot: float, t: float, pair: IonPair) -> ClassicalState:
    y1, y2, v1, v2 = y
    l, w = sc.length, sc.omega1
    half = 0.5 * sc.l_p * l
    return ClassicalState(
        q1=Q0 + half + y1 * l, q2=Q0 - half + y2 * l,
        p1=pair.m1 * (Q0dot + v1 * l * w), p2=pair.m2 * (Q0dot + v2 * l * w), t=t)


def equilibrium_energy(pair: IonPair, trap: TrapSpec, Q0: float = 0.0) -> float:
    """Potential energy at the equilibrium configuration, ``3 C_c / (2 l')``.

    The trap is rigid, so ``Q0`` does not enter; it is accepted for symmetry
    with the laboratory-frame potential.
    """
    l_p = normal_modes(pair, trap).l_p
    return 1.5 * constants.COULOMB_CONSTANT / l_p


def simulate(p, pair: IonPair, trap: TrapSpec | None = None, rtol: float = RTOL,
             method: str = METHOD, estimate_drift: bool = True) -> ClassicalRun:
    """Transport the pair from rest with the full Hamiltonian and report the excitation.

    ``trap`` defaults to the protocol's own trap. Its ``lam`` is applied to the
    spring terms, while the protocol keeps whatever design it was built with.
    ``energy_drift_estimate`` is the change in ``E_exc`` when the tolerance is
    loosened tenfold.
    """
    trap = p.trap if trap is None else trap
    if not math.isclose(trap.T, p.trap.T, rel_tol=1e-12):
        raise DomainError("trap duration differs from the protocol duration")
    sc = _Scales.from_config(pair, trap)
    accel = _accel(p, sc)
    span = (0.0, trap.omega1 * trap.T)
    sol = _integrate(sc, accel, (0.0, 0.0, 0.0, 0.0), span, rtol, method)
    y_end = sol.y[:, -1]
    E = _excitation(sc, y_end) * sc.energy
    drift = float("nan")
    if estimate_drift:
        loose = _integrate(sc, accel, (0.0, 0.0, 0.0, 0.0), span,
                           rtol * DRIFT_RTOL_FACTOR, method)
        drift = abs(_excitation(sc, loose.y[:, -1]) * sc.energy - E)
    Q0, Q0dot, _ = p.evaluate(trap.T)
    state = _to_state(sc, y_end, float(Q0), float(Q0dot), trap.T, pair)
    return ClassicalRun(state, E, drift, len(sol.t) - 1, E / (HBAR * trap.omega1))


def propagate(pair: IonPair, trap: TrapSpec, y0, duration: float, rtol: float = RTOL,
              method: str = METHOD):
    """Free evolution in a static trap from dimensionless state ``y0``.

    ``duration`` is in seconds and may be negative (backward in time). Returns
    the dimensionless final state.
    """
    sc = _Scales.from_config(pair, trap)
    sol = _integrate(sc, _accel(None, sc), y0, (0.0, trap.omega1 * duration), rtol, method)
    return sol.y[:, -1].copy()


def static_energy_drift(pair: IonPair, trap: TrapSpec, periods: float = 20.0,
                        amplitude: float = 1e-2, rtol: float = RTOL,
                        method: str = METHOD) -> float:
    """Relative total-energy drift per trap period with the trap frozen.

    The pair starts displaced by ``amplitude * l`` (both modes excited), and the
    drift of the total energy (equilibrium plus excitation) is divided by the
    number of periods.
    """
    sc = _Scales.from_config(pair, trap)
    y0 = np.array([amplitude, -0.3 * amplitude, 0.0, 0.0])
    y1 = propagate(pair, trap, y0, periods * trap.T0, rtol, method)
    E_eq = equilibrium_energy(pair, trap)
    E0 = E_eq + _excitation(sc, y0) * sc.energy
    E1 = E_eq + _excitation(sc, y1) * sc.energy
    return abs(E1 - E0) / E0 / periods


def _scan_point(args):
    kind, pair, trap, T_over_T0, design, rtol, method = args
    row = {"T_over_T0": T_over_T0, "protocol": kind, "E_exc_J": math.nan,
           "E_exc_hbarOmega1": math.nan, "steps": 0, "drift": math.nan, "error": ""}
    try:
        t = trap.with_(T=T_over_T0 * trap.T0)
        p = design(kind, pair, t)
        run = simulate(p, pair, t, rtol=rtol, method=method)
    except (IntegrationError, ArithmeticError, ValueError, RuntimeError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(E_exc_J=run.E_exc, E_exc_hbarOmega1=run.E_exc_hbarOmega1, steps=run.steps,
               drift=run.energy_drift_estimate)
    return row


def harmonic_breakdown_scan(protocols, pair: IonPair, trap_base: TrapSpec, T_grid,
                            workers: int | None = None, rtol: float = RTOL,
                            method: str = METHOD) -> list[dict]:
    """Classical excitation over a grid of durations, one row per (T, protocol).

    ``T_grid`` is in units of T0 and must be strictly increasing. Points whose
    integration fails are kept with NaN energies and the error message. Rows
    come out ordered by grid index, then protocol, regardless of ``workers``.
    """
    from .protocols import design

    T_grid = [float(x) for x in T_grid]
    if not T_grid or any(b <= a for a, b in zip(T_grid, T_grid[1:])):
        raise DomainError("T_grid must be non-empty and strictly increasing")
    tasks = [(kind, pair, trap_base, T, design, rtol, method)
             for T in T_grid for kind in protocols]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) == 1:
        return [_scan_point(a) for a in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(_scan_point, tasks, chunksize=1))


def collapse_T(rows: list[dict], protocol: str, threshold: float) -> float:
    """Smallest grid T from which ``protocol`` stays below ``threshold`` (J).

    Returns NaN if even the last point is above the threshold.
    """
    pts = [(r["T_over_T0"], r["E_exc_J"]) for r in rows if r["protocol"] == protocol]
    result = math.nan
    for T, E in reversed(pts):
        if not E < threshold:
            break
        result = T
    return result
