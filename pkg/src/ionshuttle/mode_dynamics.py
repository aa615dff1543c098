"""Normal-mode "trajectories" driven by a trap protocol.

Each mode obeys ``v'' + W^2 (v - q0(t)) = 0`` with ``v(0) = v'(0) = 0``. The
solution is the Green's-function convolution

    v(t)  = W   * int_0^t q0(t') sin(W (t - t')) dt'
    v'(t) = W^2 * int_0^t q0(t') cos(W (t - t')) dt'

evaluated with composite Simpson sums on a uniform grid. The grid is doubled
until successive results agree, so outputs are deterministic for a given
protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .core_model import MODES, ModeData
from .errors import NumericalError

START_INTERVALS = 2048
MAX_INTERVALS = 2**20
CONVERGENCE_RTOL = 1e-9


def time_grid(T: float, intervals: int) -> np.ndarray:
    return np.linspace(0.0, T, intervals + 1)


def convolve(q: np.ndarray, t: np.ndarray, omega: float) -> tuple[np.ndarray, np.ndarray]:
    """Value and derivative of the driven-oscillator response to samples ``q``."""
    if omega == 0.0 or not np.any(q):
        return np.zeros_like(t), np.zeros_like(t)
    wt = omega * t
    cos_wt, sin_wt = np.cos(wt), np.sin(wt)
    C = cumulative_simpson(q * cos_wt, x=t, initial=0.0)
    S = cumulative_simpson(q * sin_wt, x=t, initial=0.0)
    return omega * (sin_wt * C - cos_wt * S), omega**2 * (cos_wt * C + sin_wt * S)


def weighted_integrals(v: np.ndarray, t: np.ndarray, omega: float) -> tuple[float, float]:
    """``(int v cos(omega t) dt, int v sin(omega t) dt)`` over the whole grid."""
    wt = omega * t
    return float(simpson(v * np.cos(wt), x=t)), float(simpson(v * np.sin(wt), x=t))


def endpoint_conditions(q: np.ndarray, t: np.ndarray, omega: float) -> np.ndarray:
    """``[v(T), v'(T), int v cos, int v sin]`` for forcing samples ``q``.

    This is the single code path used both to design polynomial protocols and
    to evaluate their residual integrals.
    """
    v, dv = convolve(q, t, omega)
    i_cos, i_sin = weighted_integrals(v, t, omega)
    return np.array([v[-1], dv[-1], i_cos, i_sin])


def refine(sample, T: float, rtol: float = CONVERGENCE_RTOL,
           start: int = START_INTERVALS, cap: int = MAX_INTERVALS):
    """Double a uniform grid until ``sample(t)`` converges.

    ``sample`` returns an array whose last axis runs over the grid; each leading
    row is checked against its own maximum magnitude. Returns
    ``(t, values, error_estimate)`` on the finest grid evaluated.
    """
    n = start
    t = time_grid(T, n)
    prev = np.atleast_2d(sample(t))
    err = float("inf")
    while True:
        n *= 2
        if n > cap:
            raise NumericalError(
                f"grid refinement did not converge with {cap} intervals", estimate=err)
        t = time_grid(T, n)
        cur = np.atleast_2d(sample(t))
        diff = np.abs(cur[:, ::2] - prev).max(axis=1)
        scale = np.abs(cur).max(axis=1)
        err = float(diff.max())
        if np.all(diff <= rtol * scale):
            return t, cur, err
        prev = cur


@dataclass(frozen=True)
class ModeForcing:
    """Forcing terms of one mode, as closures over the protocol's exact derivatives."""

    mode: str
    protocol: object
    omega: float
    coupling: float
    lam: float

    @property
    def omega_p(self) -> float:
        return self.omega * np.sqrt(1.0 + self.lam)

    def P0(self, t):
        return self.coupling * self.protocol.evaluate(t)[1]

    def P0dot(self, t):
        return self.coupling * self.protocol.evaluate(t)[2]

    def q0(self, t):
        return -self.P0dot(t) / self.omega**2

    def q0_p(self, t):
        return self.q0(t) / (1.0 + self.lam)

    def B(self, t):
        return self.q0(t) * (1.0 - 1.0 / (1.0 + self.lam))


@dataclass(frozen=True, eq=False)
class ModeTrajectory:
    mode: str
    omega: float
    t: np.ndarray
    value: np.ndarray
    derivative: np.ndarray
    forcing: np.ndarray = field(repr=False)
    quadrature_error_estimate: float = 0.0

    @property
    def grid_size(self) -> int:
        return len(self.t) - 1

    @property
    def final(self) -> tuple[float, float]:
        return float(self.value[-1]), float(self.derivative[-1])

    def second_derivative(self) -> np.ndarray:
        # from the equation of motion, not by differencing samples
        return -self.omega**2 * (self.value - self.forcing)


def forcing(p, modes: ModeData, lam: float | None = None) -> tuple[ModeForcing, ModeForcing]:
    """(plus, minus) forcing for protocol ``p``; ``lam`` defaults to ``modes.lam``."""
    lam = modes.lam if lam is None else lam
    return tuple(ModeForcing(m, p, modes.omega(m), modes.coupling(m), lam) for m in MODES)


def _trajectory(f: ModeForcing, T: float, omega: float, drive, rtol: float) -> ModeTrajectory:
    def sample(t):
        v, dv = convolve(drive(t), t, omega)
        return np.vstack([v, dv])

    t, (v, dv), err = refine(sample, T, rtol=rtol)
    return ModeTrajectory(f.mode, omega, t, v, dv, drive(t), err)


def alpha(p, f: ModeForcing, rtol: float = CONVERGENCE_RTOL) -> ModeTrajectory:
    """Unperturbed mode trajectory (spring constant exactly u0)."""
    return _trajectory(f, p.trap.T, f.omega, f.q0, rtol)


def perturbed_trajectory(p, f: ModeForcing, lam: float | None = None,
                         rtol: float = CONVERGENCE_RTOL) -> ModeTrajectory:
    """Mode trajectory with spring constant ``u0 (1 + lam)``, starting from rest."""
    if lam is not None and lam != f.lam:
        f = ModeForcing(f.mode, f.protocol, f.omega, f.coupling, lam)
    return _trajectory(f, p.trap.T, f.omega_p, f.q0_p, rtol)


def trajectories_table(p, modes: ModeData, lam: float | None = None,
                       intervals: int | None = None) -> dict[str, np.ndarray]:
    """Columns t, alpha_plus, alpha_minus, F_plus, F_minus on one common grid."""
    fp, fm = forcing(p, modes, lam)
    if intervals is None:
        intervals = max(alpha(p, f).grid_size for f in (fp, fm))
    t = time_grid(p.trap.T, intervals)
    out = {"t": t}
    for f, tag in ((fp, "plus"), (fm, "minus")):
        out[f"alpha_{tag}"] = convolve(f.q0(t), t, f.omega)[0]
        out[f"F_{tag}"] = convolve(f.q0_p(t), t, f.omega_p)[0]
    return out
