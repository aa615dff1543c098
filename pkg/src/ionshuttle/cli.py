"""Design, analyse and validate transport trajectories for a two-ion crystal.

Times given with ``--T``, ``--T-min`` and ``--T-max`` are multiples of the
period ``T0 = 2 pi / omega1``; ``--omega1`` is a linear frequency in Hz.
Settings are resolved in the order: built-in paper2014 values, ``--preset``,
``--config`` file, then explicit flags. Exit status is 0 on success, 1 on
invalid input and 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import classical_sim as cs
from . import excitation as ex
from . import experiments as xp
from . import selftest
from .constants import HBAR
from .core_model import make_ion_pair, make_trap, normal_modes
from .errors import ConfigurationError, NumericalError
from .protocols import design, write_csv

log = logging.getLogger("ionshuttle")

COMMANDS = ("design", "excite", "sweep-lambda", "sweep-time", "classical", "compare",
            "figure", "selftest")

PROTOCOL_NAMES = {"cosine": "cosine", "poly14": "poly14", "naive": "naive_quintic",
                  "cm-only": "cm_only", "cm-cosine": "cm_cosine"}

# flag name -> (dest, type); these are also the keys of a config file
OPTIONS = {
    "ions": ("ions", str), "mass1": ("mass1", float), "mass2": ("mass2", float),
    "omega1": ("omega1", float), "d": ("d", float), "T": ("T", float),
    "lambda": ("lam", float),
    "lambda-min": ("lambda_min", float), "lambda-max": ("lambda_max", float),
    "lambda-steps": ("lambda_steps", int),
    "T-min": ("T_min", float), "T-max": ("T_max", float), "T-steps": ("T_steps", int),
    "protocol": ("protocol", str), "method": ("method", str), "format": ("format", str),
    "preset": ("preset", str), "samples": ("samples", int), "threads": ("threads", int),
}

BUILTIN = {
    "ions": "Be9,Mg24", "mass1": None, "mass2": None, "omega1": 2e6, "d": 370e-6, "T": 10.5,
    "lambda": 0.0, "lambda-min": -0.1, "lambda-max": 0.1, "lambda-steps": 201,
    "T-min": 5.0, "T-max": 14.0, "T-steps": 37, "protocol": "cosine", "method": "perturbative",
    "format": "csv", "preset": None, "samples": 1001, "threads": None,
}

PRESET_VALUES = {
    "paper2014": {"ions": "Be9,Mg24", "mass1": None, "mass2": None, "omega1": 2e6,
                  "d": 370e-6, "T": 10.5, "lambda": 0.0},
}


class UsageError(ConfigurationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_options(p: argparse.ArgumentParser):
    for name, (dest, typ) in OPTIONS.items():
        p.add_argument(f"--{name}", dest=dest, type=typ, default=None)
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")
    p.add_argument("--config", default=None, help="JSON file with flag values")
    p.add_argument("--dump-config", action="store_true",
                   help="print the resolved configuration and exit")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ionshuttle", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        if cmd == "figure":
            p.add_argument("figure", choices=xp.FIGURES)
        _add_options(p)
    return parser


# -- configuration -------------------------------------------------------------

def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"--config: cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("--config: file must hold a JSON object")
    data = dict(data)
    data.pop("command", None)
    data.pop("figure", None)
    unknown = sorted(set(data) - set(OPTIONS))
    if unknown:
        raise ConfigurationError(f"--config: unknown keys {unknown}")
    for key, value in data.items():
        typ = OPTIONS[key][1]
        if value is None:
            continue
        try:
            if typ is int and (isinstance(value, bool) or float(value) != int(value)):
                raise ValueError
            data[key] = typ(value)
        except (TypeError, ValueError):
            raise ConfigurationError(
                f"--config: {key} must be {typ.__name__}, got {value!r}") from None
    return data


PHYSICS_KEYS = ("ions", "mass1", "mass2", "omega1", "d", "T", "lambda")


def resolve(args) -> tuple[dict, set]:
    """Merged settings keyed by flag name, and the keys set by a file or flag."""
    explicit = {name: getattr(args, dest) for name, (dest, _) in OPTIONS.items()
                if getattr(args, dest) is not None}
    file_cfg = _load_config(args.config) if args.config else {}
    preset = explicit.get("preset", file_cfg.get("preset"))
    cfg = dict(BUILTIN)
    if preset is not None:
        if preset not in PRESET_VALUES:
            raise ConfigurationError(f"--preset: unknown preset {preset!r}; known: "
                                     f"{', '.join(PRESET_VALUES)}")
        cfg.update(PRESET_VALUES[preset])
    cfg.update(file_cfg)
    cfg.update(explicit)
    _validate(cfg)
    return cfg, set(file_cfg) | set(explicit)


def _validate(cfg: dict):
    def need(ok, flag, constraint):
        if not ok:
            raise ConfigurationError(f"--{flag}: {constraint}, got {cfg[flag]!r}")

    need(isinstance(cfg["ions"], str) and len(cfg["ions"].split(",")) == 2, "ions",
         "expected two species separated by a comma")
    for flag in ("omega1", "d", "T", "T-min", "T-max"):
        need(cfg[flag] > 0, flag, "must be positive")
    for flag in ("lambda", "lambda-min", "lambda-max"):
        need(cfg[flag] > -0.99, flag, "must be > -0.99")
    for flag in ("lambda-steps", "T-steps", "samples"):
        need(cfg[flag] >= 1, flag, "must be at least 1")
    if cfg["lambda-steps"] > 1:
        need(cfg["lambda-max"] > cfg["lambda-min"], "lambda-max", "must exceed --lambda-min")
    if cfg["T-steps"] > 1:
        need(cfg["T-max"] > cfg["T-min"], "T-max", "must exceed --T-min")
    for name in cfg["protocol"].split(","):
        need(name in PROTOCOL_NAMES, "protocol", f"expected one of {'|'.join(PROTOCOL_NAMES)}")
    need(cfg["method"] in ("perturbative", "oracle"), "method", "expected perturbative|oracle")
    need(cfg["format"] in ("csv", "json"), "format", "expected csv|json")
    if cfg["threads"] is not None:
        need(cfg["threads"] >= 1, "threads", "must be at least 1")
    for flag in ("mass1", "mass2"):
        if cfg[flag] is not None:
            need(cfg[flag] > 0, flag, "must be positive")


def _physics(cfg: dict, T_over_T0: float | None = None, lam: float | None = None):
    name1, name2 = (s.strip() for s in cfg["ions"].split(","))
    pair = make_ion_pair(name1, name2, cfg["mass1"], cfg["mass2"])
    omega1 = 2.0 * math.pi * cfg["omega1"]
    T0 = 2.0 * math.pi / omega1
    T = (cfg["T"] if T_over_T0 is None else T_over_T0) * T0
    trap = make_trap(pair, omega1, cfg["d"], T, cfg["lambda"] if lam is None else lam)
    return pair, trap


def _protocols(cfg: dict) -> list[str]:
    return [PROTOCOL_NAMES[n] for n in cfg["protocol"].split(",")]


def _lambda_grid(cfg):
    return xp.Grid("lambda", cfg["lambda-min"], cfg["lambda-max"], cfg["lambda-steps"]).values()


def _T_grid(cfg):
    return xp.Grid("T", cfg["T-min"], cfg["T-max"], cfg["T-steps"]).values()


# -- output --------------------------------------------------------------------

def _table_text(columns, rows, fmt: str) -> str:
    if fmt == "json":
        return "".join(json.dumps({c: _plain(r[c]) for c in columns}) + "\n" for r in rows)
    lines = [",".join(columns)]
    lines += [",".join(xp._fmt(_plain(r[c])) for c in columns) for r in rows]
    return "\n".join(lines) + "\n"


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", out)


# -- commands ------------------------------------------------------------------

EXCITE_COLUMNS = ("protocol", "T_over_T0", "lambda", "E_plus_J", "E_minus_J", "E_total_J",
                  "E_total_hbarOmega_minus", "method")


def cmd_design(cfg, given):
    pair, trap = _physics(cfg)
    kinds = _protocols(cfg)
    if len(kinds) != 1:
        raise ConfigurationError("--protocol: design takes a single protocol")
    p = design(kinds[0], pair, trap)
    if cfg["format"] == "json":
        s = p.sample(cfg["samples"])
        rows = [dict(zip(("t", "Q0", "Q0dot", "Q0ddot"), map(float, r)))
                for r in zip(s["t"], s["Q0"], s["Q0dot"], s["Q0ddot"])]
        return json.dumps({"record": p.record(), "rows": rows}) + "\n"
    buf = io.StringIO()
    write_csv(p, buf, cfg["samples"])
    return buf.getvalue()


def _excite_rows(cfg, kinds, pair, trap, lams, method):
    modes = normal_modes(pair, trap)
    rows = []
    for kind in kinds:
        p = design(kind, pair, trap, modes)
        for r in ex.sweep_lambda(p, modes, lams, method):
            rows.append({"protocol": kind, "T_over_T0": trap.T / trap.T0, **r.row()})
    return rows


def cmd_excite(cfg, given):
    pair, trap = _physics(cfg)
    rows = _excite_rows(cfg, _protocols(cfg), pair, trap, [cfg["lambda"]], cfg["method"])
    return _table_text(EXCITE_COLUMNS, rows, cfg["format"])


def cmd_sweep_lambda(cfg, given):
    pair, trap = _physics(cfg)
    rows = _excite_rows(cfg, _protocols(cfg), pair, trap, _lambda_grid(cfg), cfg["method"])
    return _table_text(EXCITE_COLUMNS, rows, cfg["format"])


def cmd_sweep_time(cfg, given):
    rows = []
    for T in _T_grid(cfg):
        pair, trap = _physics(cfg, T_over_T0=float(T))
        rows += _excite_rows(cfg, _protocols(cfg), pair, trap, [cfg["lambda"]], cfg["method"])
    return _table_text(EXCITE_COLUMNS, rows, cfg["format"])


CLASSICAL_COLUMNS = ("T_over_T0", "protocol", "lambda", "E_exc_J", "E_exc_hbarOmega1", "steps",
                     "drift", "error")


def cmd_classical(cfg, given):
    """Single run at --T, or a scan when any of --T-min/--T-max/--T-steps is given."""
    pair, trap = _physics(cfg)
    scan = bool(given & {"T-min", "T-max", "T-steps"})
    grid = _T_grid(cfg) if scan else [cfg["T"]]
    rows = cs.harmonic_breakdown_scan(_protocols(cfg), pair, trap, grid, workers=cfg["threads"])
    for r in rows:
        r["lambda"] = trap.lam
    failures = [r for r in rows if r["error"]]
    for r in failures:
        log.warning("T=%s T0 %s: %s", r["T_over_T0"], r["protocol"], r["error"])
    if not scan and failures:
        raise NumericalError(failures[0]["error"])
    return _table_text(CLASSICAL_COLUMNS, rows, cfg["format"])


COMPARE_COLUMNS = ("protocol", "T_over_T0", "lambda", "E_total_perturbative_J",
                   "E_total_oracle_J", "difference_hbarOmega_minus")


def cmd_compare(cfg, given):
    """Perturbative formula against the displacement oracle over the lambda grid."""
    pair, trap = _physics(cfg)
    modes = normal_modes(pair, trap)
    lams = _lambda_grid(cfg)
    rows = []
    for kind in _protocols(cfg):
        p = design(kind, pair, trap, modes)
        pert = ex.sweep_lambda(p, modes, lams, "perturbative")
        orac = ex.sweep_lambda(p, modes, lams, "oracle")
        for a, b in zip(pert, orac):
            quantum = HBAR * modes.Omega_minus * math.sqrt(1.0 + a.lam)
            rows.append({"protocol": kind, "T_over_T0": trap.T / trap.T0, "lambda": a.lam,
                         "E_total_perturbative_J": a.E_total, "E_total_oracle_J": b.E_total,
                         "difference_hbarOmega_minus": (a.E_total - b.E_total) / quantum})
    return _table_text(COMPARE_COLUMNS, rows, cfg["format"])


def cmd_figure(cfg, given, figure):
    """Run a recipe; flags that were not given keep the recipe defaults."""
    base = xp.default_spec(figure)
    pair, trap = _physics(cfg)
    changes = {"pair": pair, "trap": trap, "preset": cfg["preset"]}
    if "protocol" in given:
        changes["protocols"] = tuple(_protocols(cfg))
    axis = base.grid.axis
    if axis == "lambda" and given & {"lambda-min", "lambda-max", "lambda-steps"}:
        changes["grid"] = xp.Grid("lambda", cfg["lambda-min"], cfg["lambda-max"],
                                  cfg["lambda-steps"], base.grid.spacing)
    elif axis == "T" and given & {"T-min", "T-max", "T-steps"}:
        changes["grid"] = xp.Grid("T", cfg["T-min"], cfg["T-max"], cfg["T-steps"])
    elif axis == "t" and "samples" in given:
        changes["grid"] = xp.Grid("t", 0.0, 1.0, cfg["samples"])
    if "method" in given:
        changes["method"] = cfg["method"]
    spec = replace(base, **changes)
    result = xp.run(spec, workers=cfg["threads"])
    if result.summary:
        log.info("summary: %s", json.dumps(result.summary, sort_keys=True))
    return result.to_jsonl() if cfg["format"] == "json" else result.to_csv()


def cmd_selftest(cfg, given):
    results = selftest.run_all()
    lines = [f"{'PASS' if ok else 'FAIL'}  {name}: {detail}" for name, ok, detail in results]
    text = "\n".join(lines) + "\n"
    if not all(ok for _, ok, _ in results):
        sys.stderr.write(text)
        raise SelfTestFailure("selftest failed")
    return text


class SelfTestFailure(RuntimeError):
    pass


HANDLERS = {"design": cmd_design, "excite": cmd_excite, "sweep-lambda": cmd_sweep_lambda,
            "sweep-time": cmd_sweep_time, "classical": cmd_classical, "compare": cmd_compare,
            "selftest": cmd_selftest}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="ionshuttle: %(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.INFO)
        cfg, given = resolve(args)
        if args.dump_config:
            # physical parameters are always written out; other settings only
            # when given, so that recipe defaults survive the round trip
            keys = set(PHYSICS_KEYS) | given | ({"preset"} if cfg["preset"] else set())
            dumped = {k: cfg[k] for k in sorted(keys)}
            dumped["command"] = args.command
            if args.command == "figure":
                dumped["figure"] = args.figure
            _emit(json.dumps(dumped, indent=2, sort_keys=True) + "\n", args.out)
            return 0
        if cfg["threads"] is None:
            cfg["threads"] = os.cpu_count() or 1
        if args.command == "figure":
            text = cmd_figure(cfg, given, args.figure)
        else:
            text = HANDLERS[args.command](cfg, given)
        _emit(text, args.out)
    except SelfTestFailure as exc:
        print(f"ionshuttle: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"ionshuttle: error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ArithmeticError) as exc:
        print(f"ionshuttle: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
