"""Analytic trap trajectories Q0(t) with exact first and second derivatives.

Two families are supported:

* trigonometric: ``Q0 = d [b0 + sum_j b_j cos((2j - 1) pi t / T)]``, j = 1..4
* polynomial: ``Q0 = d sum_j b_j s^j`` with ``s = t / T``

Every designer checks the endpoint conditions before returning.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from . import mode_dynamics as md
from .core_model import IonPair, ModeData, TrapSpec, normal_modes
from .errors import DesignError, DomainError

KINDS = ("cosine", "poly14", "naive_quintic", "cm_only", "cm_cosine", "static")
TRIG_KINDS = ("cosine", "cm_cosine")
POLY_KINDS = ("poly14", "naive_quintic", "cm_only", "static")

CONDITION_WARN = 1e12
DESIGN_RTOL = 1e-10
ENDPOINT_TOL = 1e-9


@dataclass(frozen=True)
class Protocol:
    kind: str
    coefficients: tuple
    trap: TrapSpec
    modes: ModeData | None
    d: float
    design_frequencies: tuple = ()
    condition_number: float | None = field(default=None, compare=False)
    design_intervals: int | None = field(default=None, compare=False)

    @property
    def T(self) -> float:
        return self.trap.T

    def evaluate(self, t):
        """``(Q0, Q0dot, Q0ddot)`` at time(s) ``t`` in [0, T]."""
        t = np.asarray(t, dtype=float)
        T = self.trap.T
        if np.any(t < 0.0) or np.any(t > T * (1.0 + 1e-12)):
            raise DomainError(f"t must lie in [0, T={T:g}] s")
        c = np.asarray(self.coefficients, dtype=float)
        if self.kind in TRIG_KINDS:
            k = (2 * np.arange(1, 5) - 1) * math.pi / T
            arg = np.multiply.outer(t, k)
            cos, sin = np.cos(arg), np.sin(arg)
            b = c[1:]
            return (self.d * (c[0] + cos @ b),
                    -self.d * (sin @ (b * k)),
                    -self.d * (cos @ (b * k**2)))
        s = t / T
        c1 = P.polyder(c)
        c2 = P.polyder(c1)
        return (self.d * P.polyval(s, c),
                self.d * P.polyval(s, c1) / T,
                self.d * P.polyval(s, c2) / T**2)

    def __call__(self, t):
        return self.evaluate(t)[0]

    def sample(self, n: int = 1001) -> dict[str, np.ndarray]:
        t = np.linspace(0.0, self.trap.T, n)
        Q0, Q0dot, Q0ddot = self.evaluate(t)
        return {"t": t, "Q0": Q0, "Q0dot": Q0dot, "Q0ddot": Q0ddot}

    def record(self) -> dict:
        """JSON-compatible coefficient record."""
        return {
            "kind": self.kind,
            "basis": "cos((2j-1)pi t/T)" if self.kind in TRIG_KINDS else "(t/T)^j",
            "coefficients": [float(x) for x in self.coefficients],
            "d": self.d,
            "T": self.trap.T,
            "omega1": self.trap.omega1,
            "design_frequencies": [float(w) for w in self.design_frequencies],
            "condition_number": self.condition_number,
        }


def check_endpoints(p: Protocol) -> None:
    T, d = p.trap.T, p.d
    Q, Qd, Qdd = p.evaluate(np.array([0.0, T]))
    scale = p.trap.d
    errors = [abs(Q[0]), abs(Q[1] - d), *(abs(Qd) * T), *(abs(Qdd) * T**2)]
    if max(errors) > ENDPOINT_TOL * scale:
        raise DesignError(f"{p.kind} protocol violates endpoint conditions "
                          f"(worst residual {max(errors) / scale:.3g} d)")


def cosine_coefficients(T: float, w_a: float, w_b: float) -> tuple[float, ...]:
    """(b0..b4) of the trigonometric ansatz nulling the response at ``w_a`` and ``w_b``."""
    pi2 = math.pi**2
    den = 2048.0 * T**4 * w_a**2 * w_b**2
    b3 = -49.0 * (T**2 * w_a**2 - 25 * pi2) * (T**2 * w_b**2 - 25 * pi2) / den
    b4 = 5.0 * (T**2 * w_a**2 - 49 * pi2) * (T**2 * w_b**2 - 49 * pi2) / den
    b1 = -9.0 / 16.0 + 2.0 * b3 + 5.0 * b4
    b2 = (1.0 - 48.0 * b3 - 96.0 * b4) / 16.0
    return (0.5, b1, b2, b3, b4)


def design_cosine(trap: TrapSpec, modes: ModeData) -> Protocol:
    w = (modes.Omega_plus, modes.Omega_minus)
    p = Protocol("cosine", cosine_coefficients(trap.T, *w), trap, modes, trap.d, w)
    check_endpoints(p)
    return p


def omega_cm(pair: IonPair, trap: TrapSpec) -> float:
    return math.sqrt(2.0 * trap.u0 / pair.total_mass)


def design_cm_cosine(trap: TrapSpec, pair: IonPair) -> Protocol:
    """Cosine ansatz with both design frequencies set to ``omega_cm``."""
    w = omega_cm(pair, trap)
    p = Protocol("cm_cosine", cosine_coefficients(trap.T, w, w), trap,
                 normal_modes(pair, trap), trap.d, (w, w))
    check_endpoints(p)
    return p


def design_naive(trap: TrapSpec) -> Protocol:
    """Minimum-jerk quintic ``d (10 s^3 - 15 s^4 + 6 s^5)``."""
    p = Protocol("naive_quintic", (0.0, 0.0, 0.0, 10.0, -15.0, 6.0), trap, None, trap.d)
    check_endpoints(p)
    return p


def design_static(trap: TrapSpec) -> Protocol:
    """A trap that never moves (``Q0 = 0``)."""
    return Protocol("static", (0.0,), trap, None, 0.0)


def _boundary_rows(degree: int) -> tuple[np.ndarray, np.ndarray]:
    j = np.arange(degree + 1, dtype=float)
    rows = np.array([
        j == 0,            # Q0(0) = 0
        np.ones_like(j),   # Q0(T) = d
        j == 1,            # Q0'(0) = 0
        j,                 # Q0'(T) = 0
        j == 2,            # Q0''(0) = 0
        j * (j - 1),       # Q0''(T) = 0
    ], dtype=float)
    return rows, np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])


def condition_rows(T: float, d: float, mode_list, degree: int, intervals: int,
                   sqrt_mass: float) -> np.ndarray:
    """Mode-condition rows ``[v(T), v'(T), int v cos, int v sin]`` per monomial.

    Rows are in natural units: ``sqrt_mass * d`` for values, times ``W`` for
    derivatives, times ``T`` for the integrals.
    """
    t = md.time_grid(T, intervals)
    s = t / T
    rows = np.zeros((4 * len(mode_list), degree + 1))
    for i, (omega, coupling) in enumerate(mode_list):
        scale = np.array([1.0, omega, T, T]) * sqrt_mass * d
        for j in range(2, degree + 1):
            q = -coupling * d * j * (j - 1) * s ** (j - 2) / (T**2 * omega**2)
            rows[4 * i:4 * i + 4, j] = md.endpoint_conditions(q, t, omega) / scale
    return rows


def design_polynomial(kind: str, trap: TrapSpec, modes: ModeData | None, mode_list,
                      sqrt_mass: float) -> Protocol:
    """Solve the boundary + mode conditions for a polynomial in ``s = t/T``.

    ``mode_list`` holds ``(omega, coupling)`` pairs; each contributes four
    conditions, so the degree is ``5 + 4 * len(mode_list)``.
    """
    degree = 5 + 4 * len(mode_list)
    T, d = trap.T, trap.d

    n = md.START_INTERVALS
    prev = condition_rows(T, d, mode_list, degree, n, sqrt_mass)
    while True:
        n *= 2
        if n > md.MAX_INTERVALS:
            raise DesignError(f"{kind}: condition rows did not converge")
        cur = condition_rows(T, d, mode_list, degree, n, sqrt_mass)
        diff = np.abs(cur - prev).max(axis=1)
        if np.all(diff <= DESIGN_RTOL * np.abs(cur).max(axis=1)):
            break
        prev = cur

    bc_rows, bc_rhs = _boundary_rows(degree)
    A = np.vstack([bc_rows, cur])
    b = np.concatenate([bc_rhs, np.zeros(len(cur))])
    row_scale = 1.0 / np.abs(A).max(axis=1)
    As = A * row_scale[:, None]
    cond = float(np.linalg.cond(As))
    try:
        beta = np.linalg.solve(As, b * row_scale)
    except np.linalg.LinAlgError as exc:
        raise DesignError(f"{kind}: singular design system", condition_number=cond) from exc
    if not np.all(np.isfinite(beta)):
        raise DesignError(f"{kind}: singular design system", condition_number=cond)
    if cond > CONDITION_WARN:
        warnings.warn(f"{kind} design system is ill-conditioned (cond={cond:.3g})",
                      RuntimeWarning, stacklevel=3)
    residual = float(np.abs(A @ beta - b).max())
    if residual > 1e-8:
        raise DesignError(f"{kind}: conditions not met (residual {residual:.3g})",
                          condition_number=cond)
    p = Protocol(kind, tuple(float(x) for x in beta), trap, modes, d,
                 tuple(w for w, _ in mode_list), cond, n)
    check_endpoints(p)
    return p


DECOUPLED_RTOL = 1e-12


def design_poly14(trap: TrapSpec, modes: ModeData) -> Protocol:
    """Degree-13 polynomial nulling both modes' final state and residual integrals.

    A mode the trap cannot drive (coupling zero, as for the relative mode of
    equal masses) satisfies its four conditions for any trajectory; its rows
    would make the system singular, so it is left out and the degree drops to 9.
    """
    sqrt_mass = math.sqrt(trap.u0) / trap.omega1  # sqrt(m1)
    mode_list = [(w, c) for w, c in ((modes.Omega_plus, modes.c_plus),
                                     (modes.Omega_minus, modes.c_minus))
                 if abs(c) > DECOUPLED_RTOL * sqrt_mass]
    return design_polynomial("poly14", trap, modes, mode_list, sqrt_mass)


def design_cm_only(trap: TrapSpec, pair: IonPair) -> Protocol:
    """Robust single-particle design that ignores the mode coupling.

    The ion pair is treated as one uncoupled centre of mass, of mass ``m1 + m2``
    oscillating at ``omega_cm``. The conditions are those of
    :func:`design_poly14` restricted to that one oscillator (final rest plus
    vanishing first-order error integrals), which gives a degree-9 polynomial.
    """
    w = omega_cm(pair, trap)
    sqrt_M = math.sqrt(pair.total_mass)
    return design_polynomial("cm_only", trap, normal_modes(pair, trap), [(w, sqrt_M)], sqrt_M)


def design(kind: str, pair: IonPair, trap: TrapSpec, modes: ModeData | None = None) -> Protocol:
    """Dispatch by protocol kind."""
    if modes is None:
        modes = normal_modes(pair, trap)
    if kind == "cosine":
        return design_cosine(trap, modes)
    if kind == "poly14":
        return design_poly14(trap, modes)
    if kind == "naive_quintic":
        return design_naive(trap)
    if kind == "cm_only":
        return design_cm_only(trap, pair)
    if kind == "cm_cosine":
        return design_cm_cosine(trap, pair)
    if kind == "static":
        return design_static(trap)
    raise ValueError(f"unknown protocol kind {kind!r}; expected one of {KINDS}")


def write_csv(p: Protocol, path_or_file, n: int = 1001) -> None:
    cols = p.sample(n)
    lines = ["t,Q0,Q0dot,Q0ddot"]
    for row in zip(cols["t"], cols["Q0"], cols["Q0dot"], cols["Q0ddot"]):
        lines.append(",".join(repr(float(x)) for x in row))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


def dumps_record(p: Protocol) -> str:
    return json.dumps(p.record(), indent=2)
