"""Named experiment recipes that regenerate the figure data as tables.

Every recipe is a pure function of its :class:`ExperimentSpec`; running the
same spec twice gives byte-identical CSV bodies. CSV output opens with
``# ``-prefixed metadata lines (a JSON echo of the spec and the numerical
settings), followed by a header row and one line per record.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from . import classical_sim as cs
from . import excitation as ex
from . import mode_dynamics as md
from .core_model import IonPair, TrapSpec, make_ion_pair, make_trap, normal_modes
from .errors import ConfigurationError, NumericalError
from .protocols import KINDS, design

FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "scaling_law")
AXES = ("t", "lambda", "T")


@dataclass(frozen=True)
class Grid:
    """One sampling axis.

    ``axis`` is ``t`` (in units of T), ``lambda`` or ``T`` (in units of T0).
    ``spacing`` is ``linear`` or ``log``.
    """

    axis: str
    start: float
    stop: float
    steps: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigurationError(f"grid axis must be one of {AXES}, got {self.axis!r}")
        if self.spacing not in ("linear", "log"):
            raise ConfigurationError(f"grid spacing must be linear or log, got {self.spacing!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError(f"grid steps must be a positive integer, got {self.steps}")
        if self.steps > 1 and not self.stop > self.start:
            raise ConfigurationError("grid must be strictly increasing (stop > start)")
        if self.spacing == "log" and not self.start > 0:
            raise ConfigurationError("log grid needs a positive start")

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([float(self.start)])
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.steps)
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class ExperimentSpec:
    figure: str
    pair: IonPair
    trap: TrapSpec
    protocols: tuple[str, ...]
    grid: Grid
    method: str = "auto"
    output_path: str | None = None
    preset: str | None = None

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ConfigurationError(f"unknown figure {self.figure!r}; expected one of {FIGURES}")
        for k in self.protocols:
            if k not in KINDS:
                raise ConfigurationError(f"unknown protocol {k!r}; expected one of {KINDS}")
        if not self.protocols:
            raise ConfigurationError("at least one protocol is required")
        if self.method not in ("auto", "perturbative", "oracle"):
            raise ConfigurationError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        return {
            "figure": self.figure,
            "preset": self.preset,
            "ions": [self.pair.name1, self.pair.name2],
            "masses_kg": [self.pair.m1, self.pair.m2],
            "omega1_rad_s": self.trap.omega1,
            "d_m": self.trap.d,
            "T_s": self.trap.T,
            "T_over_T0": self.trap.T / self.trap.T0,
            "lambda": self.trap.lam,
            "protocols": list(self.protocols),
            "grid": {"axis": self.grid.axis, "start": self.grid.start, "stop": self.grid.stop,
                     "steps": self.grid.steps, "spacing": self.grid.spacing},
            "method": self.method,
        }


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    columns: tuple[str, ...]
    rows: list[dict]
    metadata: dict
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        meta = dict(self.metadata)
        if self.summary:
            meta["summary"] = self.summary
        for key, value in meta.items():
            buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        buf.write(",".join(self.columns) + "\n")
        buf.write(self.csv_body())
        return buf.getvalue()

    def csv_body(self) -> str:
        return "".join(",".join(_fmt(r[c]) for c in self.columns) + "\n" for r in self.rows)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"metadata": self.metadata, "summary": self.summary}, sort_keys=True)]
        lines += [json.dumps({c: r[c] for c in self.columns}) for r in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, path: str | None = None, fmt: str = "csv") -> None:
        path = path or self.spec.output_path
        if path is None:
            raise ConfigurationError("no output path given")
        text = self.to_csv() if fmt == "csv" else self.to_jsonl()
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    return str(value)


# -- presets -----------------------------------------------------------------

PRESETS = {
    "paper2014": {"ions": ("Be9", "Mg24"), "omega1_hz": 2e6, "d": 370e-6,
                  "T_over_T0": 10.5, "lam": 0.0},
}

DEFAULTS = {
    "fig1": (("cosine", "poly14"), Grid("t", 0.0, 1.0, 501)),
    "fig2": (("cosine", "poly14"), Grid("lambda", -0.1, 0.1, 201)),
    "fig3": (("cosine",), Grid("t", 0.0, 1.0, 1001)),
    "fig4": (("cosine", "poly14"), Grid("T", 5.0, 14.0, 37)),
    "fig5": (("cosine", "cm_only"), Grid("lambda", -0.1, 0.1, 201)),
    "scaling_law": (("poly14", "naive_quintic", "cosine"), Grid("lambda", 1e-3, 1e-1, 21, "log")),
}


def preset_config(name: str = "paper2014"):
    """``(pair, trap)`` of a named parameter set."""
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None
    pair = make_ion_pair(*cfg["ions"])
    omega1 = 2.0 * math.pi * cfg["omega1_hz"]
    trap = make_trap(pair, omega1, cfg["d"], cfg["T_over_T0"] * 2.0 * math.pi / omega1, cfg["lam"])
    return pair, trap


def default_spec(figure: str, preset: str = "paper2014", **changes) -> ExperimentSpec:
    """Spec for ``figure`` with the preset's parameters and the recipe defaults."""
    if figure not in DEFAULTS:
        raise ConfigurationError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    pair, trap = preset_config(preset)
    protocols, grid = DEFAULTS[figure]
    spec = ExperimentSpec(figure, pair, trap, protocols, grid, preset=preset)
    return replace(spec, **changes) if changes else spec


# -- recipes -----------------------------------------------------------------

def _settings() -> dict:
    return {
        "quadrature": {"rule": "composite Simpson", "start_intervals": md.START_INTERVALS,
                       "max_intervals": md.MAX_INTERVALS, "rtol": md.CONVERGENCE_RTOL},
        "integrator": {"method": cs.METHOD, "rtol": cs.RTOL},
    }


def _lambda_method(kind: str, requested: str) -> str:
    if requested != "auto":
        return requested
    return "perturbative" if kind in ex.RETURN_TO_REST_KINDS else "oracle"


def _trajectories(spec: ExperimentSpec):
    modes = normal_modes(spec.pair, spec.trap)
    T = spec.trap.T
    s = spec.grid.values()
    rows = []
    for kind in spec.protocols:
        p = design(kind, spec.pair, spec.trap, modes)
        Q0, Q0dot, Q0ddot = p.evaluate(np.clip(s * T, 0.0, T))
        for si, a, b, c in zip(s, Q0, Q0dot, Q0ddot):
            rows.append({"protocol": kind, "T_over_T0": T / spec.trap.T0, "t_over_T": float(si),
                         "t_s": float(si * T), "Q0_m": float(a), "Q0dot_m_s": float(b),
                         "Q0ddot_m_s2": float(c)})
    cols = ("protocol", "T_over_T0", "t_over_T", "t_s", "Q0_m", "Q0dot_m_s", "Q0ddot_m_s2")
    return cols, rows, {}


def _lambda_sweep(spec: ExperimentSpec):
    modes = normal_modes(spec.pair, spec.trap)
    lams = spec.grid.values()
    rows = []
    for kind in spec.protocols:
        p = design(kind, spec.pair, spec.trap, modes)
        method = _lambda_method(kind, spec.method)
        for r in ex.sweep_lambda(p, modes, lams, method):
            rows.append({"protocol": kind, "T_over_T0": spec.trap.T / spec.trap.T0, **r.row()})
    cols = ("protocol", "T_over_T0", "lambda", "E_plus_J", "E_minus_J", "E_total_J",
            "E_total_hbarOmega_minus", "method")
    return cols, rows, {}


def _overlay(spec: ExperimentSpec):
    modes = normal_modes(spec.pair, spec.trap)
    T = spec.trap.T
    t = spec.grid.values() * T
    rows = []
    for kind in spec.protocols:
        p = design(kind, spec.pair, spec.trap, modes)
        cols_by_mode = {}
        for f in md.forcing(p, modes, 0.0):
            a = md.alpha(p, f)
            value = np.interp(t, a.t, a.value)
            peak = np.abs(a.value).max()
            cols_by_mode[f.mode] = (value / peak if peak > 0 else value,
                                    np.sin(f.omega * t))
        for i, ti in enumerate(t):
            rows.append({"protocol": kind, "T_over_T0": T / spec.trap.T0,
                         "t_over_T": float(ti / T), "t_s": float(ti),
                         "alpha_plus_norm": float(cols_by_mode["plus"][0][i]),
                         "alpha_minus_norm": float(cols_by_mode["minus"][0][i]),
                         "sin_Omega_plus_t": float(cols_by_mode["plus"][1][i]),
                         "sin_Omega_minus_t": float(cols_by_mode["minus"][1][i])})
    cols = ("protocol", "T_over_T0", "t_over_T", "t_s", "alpha_plus_norm", "alpha_minus_norm",
            "sin_Omega_plus_t", "sin_Omega_minus_t")
    summary = {"oscillations_plus": modes.Omega_plus * T / (2 * math.pi),
               "oscillations_minus": modes.Omega_minus * T / (2 * math.pi)}
    return cols, rows, summary


def _breakdown(spec: ExperimentSpec, workers):
    rows = cs.harmonic_breakdown_scan(spec.protocols, spec.pair, spec.trap, spec.grid.values(),
                                      workers=workers)
    for r in rows:
        r["lambda"] = spec.trap.lam
    cols = ("T_over_T0", "protocol", "lambda", "E_exc_J", "E_exc_hbarOmega1", "steps", "drift",
            "error")
    finite = [r["E_exc_J"] for r in rows if math.isfinite(r["E_exc_J"])]
    summary = {}
    if finite:
        threshold = 1e-3 * max(finite)
        summary = {"threshold_J": threshold,
                   "collapse_T_over_T0": {k: cs.collapse_T(rows, k, threshold)
                                          for k in spec.protocols}}
    return cols, rows, summary


def fit_slope(lams, energies) -> float:
    """Least-squares slope of ``log E`` against ``log lam``; NaN if degenerate."""
    lams, energies = np.asarray(lams, float), np.asarray(energies, float)
    ok = (lams > 0) & (energies > 0) & np.isfinite(energies)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(lams[ok]), np.log(energies[ok]), 1)[0])


def _scaling(spec: ExperimentSpec):
    modes = normal_modes(spec.pair, spec.trap)
    lams = spec.grid.values()
    method = "oracle" if spec.method == "auto" else spec.method
    rows, slopes = [], {}
    for kind in spec.protocols:
        p = design(kind, spec.pair, spec.trap, modes)
        reports = ex.sweep_lambda(p, modes, lams, method)
        for r in reports:
            rows.append({"protocol": kind, "T_over_T0": spec.trap.T / spec.trap.T0, **r.row()})
        E = [r.E_total for r in reports]
        slopes[kind] = fit_slope(lams, E) if any(e > 0 for e in E) else "degenerate (all zero)"
    cols = ("protocol", "T_over_T0", "lambda", "E_plus_J", "E_minus_J", "E_total_J",
            "E_total_hbarOmega_minus", "method")
    return cols, rows, {"slopes": slopes}


def run(spec: ExperimentSpec, workers: int | None = 1) -> ExperimentResult:
    """Evaluate a recipe. ``workers`` only affects the classical scan (fig4)."""
    if spec.figure == "fig4" and spec.grid.axis != "T":
        raise ConfigurationError("fig4 needs a T grid")
    if spec.figure in ("fig2", "fig5", "scaling_law") and spec.grid.axis != "lambda":
        raise ConfigurationError(f"{spec.figure} needs a lambda grid")
    if spec.figure in ("fig1", "fig3") and spec.grid.axis != "t":
        raise ConfigurationError(f"{spec.figure} needs a t grid")
    try:
        if spec.figure == "fig1":
            cols, rows, summary = _trajectories(spec)
        elif spec.figure in ("fig2", "fig5"):
            cols, rows, summary = _lambda_sweep(spec)
        elif spec.figure == "fig3":
            cols, rows, summary = _overlay(spec)
        elif spec.figure == "fig4":
            cols, rows, summary = _breakdown(spec, workers)
        else:
            cols, rows, summary = _scaling(spec)
    except NumericalError as exc:
        raise type(exc)(f"{spec.figure}: {exc}") from exc
    metadata = {"spec": spec.to_dict(), "version": __version__, "settings": _settings()}
    return ExperimentResult(spec, cols, rows, metadata, summary)


def scaling_law(spec: ExperimentSpec | None = None) -> dict:
    """Fitted log-log exponents of E_total versus lambda, per protocol."""
    spec = default_spec("scaling_law") if spec is None else replace(spec, figure="scaling_law")
    if spec.grid.spacing != "log" or spec.grid.start < 1e-3 * (1 - 1e-12) \
            or spec.grid.stop > 1e-1 * (1 + 1e-12):
        raise ConfigurationError("scaling_law needs a log lambda grid inside [1e-3, 1e-1]")
    return run(spec).summary["slopes"]
