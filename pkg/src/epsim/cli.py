"""Command-line front end: ``epsim COMMAND [--config PATH] [--set K=V ...]``.

Configuration is a flat JSON object. Sources are merged in order: preset,
config file, positional command, ``--set`` overrides, then the dedicated
flags (``--seed``, ``--out``, ``--format``). The merged object is validated
as a whole before anything runs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction

import numpy as np

from .dissipation import (
    Polarization,
    constraint_residual,
    gamma_from_rates,
    pump_rates,
    solve_polarization,
)
from .eplocate import BRANCHES, DegenerateFamilyError, locate_ep_on_scan, trace_ep2_curve
from .expsim import TimeSeriesDataset, default_times, synthesize_dataset
from .fitting import BootstrapError, FitError, bootstrap_ci
from .model import AXES, HamiltonianSpec, g_from_khz
from .spectra import classify_pt_phase, sweep_bands

__all__ = ["COMMANDS", "PRESETS", "KEYS", "RunConfig", "ConfigError", "validate_config", "execute", "expand_grid", "write_atomic", "load_schema", "main"]

COMMANDS = ("bands", "ep-scan", "ep-curve", "rates", "solve-pol", "simulate", "fit", "pipeline")
SEEDED = ("simulate", "fit", "pipeline")
EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

_SPEC_CMDS = ("bands", "ep-scan", "simulate", "fit", "pipeline")
_ALL = COMMANDS


@dataclass(frozen=True)
class Key:
    kind: str
    default: object
    unit: str
    doc: str
    commands: tuple


# default may be a dict keyed by command when it differs between commands
KEYS: dict[str, Key] = {
    "command": Key("command", None, "-", "one of " + ", ".join(COMMANDS), _ALL),
    "g_khz": Key("pos_float", 2.3, "kHz", "coupling g; cyclic frequency g/2pi unless angular=true", _SPEC_CMDS + ("rates",)),
    "angular": Key("bool", False, "-", "treat g_khz as angular frequency (1e3 rad/s)", _SPEC_CMDS + ("rates",)),
    "J": Key("list3", [1.0, 1.0, 1.0], "g", "couplings (J1, J2, J3) in units of g", _SPEC_CMDS),
    "gamma": Key("float", {"ep-curve": 1.0, "simulate": 1.0, "pipeline": 1.0, "_": 0.0}, "g",
                 "scalar gamma of the pattern gamma*(1, 1/3, -1/3, -1); the true value for simulate/pipeline",
                 _SPEC_CMDS + ("ep-curve",)),
    "gamma_pattern": Key("list4_or_null", None, "g",
                         "explicit 4-vector of gamma_k (general form; bands/ep-scan along J axes only)", ("bands", "ep-scan")),
    "alpha": Key("float", {"simulate": 1.0, "fit": 1.0, "pipeline": 1.0, "_": 0.0}, "-",
                 "global loss coefficient in -i*alpha*g*gamma*I", _SPEC_CMDS),
    "cluster_tol": Key("pos_float", 1e-6, "relative", "eigenvalue clustering tolerance", ("bands", "ep-scan", "ep-curve")),
    "axis": Key("axis", "gamma", "-", "sweep axis, one of " + ", ".join(AXES), ("bands", "ep-scan")),
    "grid": Key("grid", "0:2.6:0.01", "axis units", "sweep grid 'start:stop:step' (inclusive) or a JSON list", ("bands",)),
    "interval": Key("interval", [0.5, 1.5], "axis units", "scan interval [lo, hi] or 'lo:hi'", ("ep-scan",)),
    "tol": Key("pos_float", {"ep-curve": 1e-9, "_": 1e-8}, "axis units", "location tolerance", ("ep-scan", "ep-curve")),
    "n_scan": Key("int_ge3", 401, "-", "coarse scan points", ("ep-scan",)),
    "branch": Key("branch", "Q0", "-", "EP2 branch, one of " + ", ".join(BRANCHES), ("ep-curve",)),
    "J1_grid": Key("grid", "0:1:0.01", "g", "J1 values 'start:stop:step' or a JSON list", ("ep-curve",)),
    "polarization": Key("list3_frac", ["2/3", "0", "1/3"], "-",
                        "(sigma+, sigma-, pi) intensity fractions; rational strings allowed", ("rates",)),
    "measured_rates_khz": Key("list4_or_null", None, "1e3 s^-1",
                              "optional measured pump rates; adds a gamma estimate", ("rates",)),
    "measured_sigma_khz": Key("list4_or_null", None, "1e3 s^-1", "optional uncertainties for measured_rates_khz", ("rates",)),
    "target_rates": Key("list4_frac", [0, 1, 2, 3], "relative", "target relative pump rates", ("solve-pol",)),
    "t_us_stop": Key("pos_float", 600.0, "us", "last time point", ("simulate", "pipeline")),
    "n_times": Key("int_ge3", 20, "-", "number of time points from 0 to t_us_stop", ("simulate", "pipeline")),
    "shots": Key("pos_int", 500, "-", "shots per time point", ("simulate", "pipeline")),
    "detection_error": Key("prob", 0.0, "-", "symmetric per-shot detection flip probability", ("simulate", "pipeline")),
    "data": Key("path", None, "-", "dataset CSV (t_us, p2, sigma, shots) to fit; required", ("fit",)),
    "bounds": Key("interval", [0.0, 3.0], "g", "gamma search interval", ("fit", "pipeline")),
    "weighted": Key("bool", True, "-", "weight residuals by 1/sigma^2", ("fit", "pipeline")),
    "n_resamples": Key("pos_int", 200, "-", "bootstrap resamples", ("fit", "pipeline")),
    "ci_level": Key("prob_open", 0.68, "-", "confidence level of the percentile interval", ("fit", "pipeline")),
    "seed": Key("seed", 0, "-", "master random seed", SEEDED),
    "format": Key("format", {"bands": "csv", "ep-curve": "csv", "simulate": "csv", "ep-scan": "csv", "_": "json"}, "-",
                  "output format csv|json", _ALL),
    "out": Key("path_or_null", None, "-", "output file; stdout when absent", _ALL),
}

_JSON_ONLY = ("rates", "solve-pol", "fit", "pipeline")

PRESETS = {
    "fig1-bands": {"command": "bands", "J": [1, 1, 1], "gamma": 0.0, "alpha": 0.0, "axis": "gamma", "grid": "0:2.6:0.01"},
    "fig3-pipeline": {"command": "pipeline", "g_khz": 2.3, "J": [1, 1, 1], "gamma": 1.0, "alpha": 1.0,
                      "t_us_stop": 600.0, "n_times": 20, "shots": 500, "n_resamples": 200, "seed": 0},
    "fig4-coalescence": {"command": "ep-curve", "branch": "Q0", "gamma": 1.0, "J1_grid": "0:1:0.01"},
}


class ConfigError(ValueError):
    def __init__(self, errors):
        super().__init__("; ".join(f"{e['path']}: {e['expected']} (found {e['found']!r})" for e in errors))
        self.errors = errors


@dataclass
class RunConfig:
    command: str
    params: dict
    warnings: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.params[key]

    def to_json(self) -> str:
        # the output path is where results go, not what they depend on
        params = {k: v for k, v in self.params.items() if k != "out"}
        return json.dumps({"command": self.command, **params}, sort_keys=True, separators=(",", ":"))

    def spec(self) -> HamiltonianSpec:
        p = self.params
        g = g_from_khz(p["g_khz"], angular=p["angular"])
        if p.get("gamma_pattern") is not None:
            return HamiltonianSpec(g=g, J=tuple(p["J"]), gamma=tuple(p["gamma_pattern"]), alpha=p["alpha"])
        return HamiltonianSpec(g=g, J=tuple(p["J"]), gamma_scale=p["gamma"], alpha=p["alpha"])


# value coercion ------------------------------------------------------------

def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(float(x))


def _split(x):
    if isinstance(x, str) and ("," in x):
        return [s.strip() for s in x.strip("[]()").split(",")]
    return x


def _num(x):
    if _is_num(x):
        return float(x)
    if isinstance(x, str):
        try:
            v = float(Fraction(x.strip()))
        except (ValueError, ZeroDivisionError):
            return None
        return v if math.isfinite(v) else None
    return None


def _frac_str(x):
    if isinstance(x, bool):
        return None
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float) and math.isfinite(x):
        return repr(x)
    if isinstance(x, str):
        try:
            Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            return None
        return x.strip()
    return None


def _decimal_grid(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        return None
    try:
        a, b, s = (Decimal(p.strip()) for p in parts)
    except InvalidOperation:
        return None
    if s == 0 or (b - a) / s < 0:
        return None
    n = (b - a) / s
    k = int(n.to_integral_value())
    if abs(n - k) > Decimal("1e-9") or k < 1 or k > 10**6:
        return None
    return [float(a + i * s) for i in range(k + 1)]


def _coerce(name: str, kind: str, v):
    """Return (value, expected) where value is None on failure."""
    if kind == "pos_float":
        x = _num(v)
        return (x, "a positive finite number") if x is None or x <= 0 else (x, None)
    if kind == "float":
        x = _num(v)
        return (x, "a finite number") if x is None else (x, None)
    if kind == "prob":
        x = _num(v)
        return (None, "a number in [0, 1]") if x is None or not 0 <= x <= 1 else (x, None)
    if kind == "prob_open":
        x = _num(v)
        return (None, "a number in (0, 1)") if x is None or not 0 < x < 1 else (x, None)
    if kind == "bool":
        if isinstance(v, bool):
            return v, None
        if isinstance(v, str) and v.lower() in ("true", "false"):
            return v.lower() == "true", None
        return None, "true or false"
    if kind in ("pos_int", "int_ge3", "seed"):
        lo = {"pos_int": 1, "int_ge3": 3, "seed": 0}[kind]
        if isinstance(v, str):
            try:
                v = int(v)
            except ValueError:
                return None, f"an integer >= {lo}"
        if isinstance(v, bool) or not isinstance(v, int) or v < lo:
            return None, f"an integer >= {lo}"
        return v, None
    if kind in ("list3", "list4_or_null", "list3_frac", "list4_frac"):
        if kind == "list4_or_null" and (v is None or v == "null"):
            return None, None
        n = 3 if kind.startswith("list3") else 4
        v = _split(v)
        conv = _frac_str if kind.endswith("frac") else _num
        what = "numbers or rational strings" if kind.endswith("frac") else "finite numbers"
        if not isinstance(v, (list, tuple)) or len(v) != n:
            return None, f"a list of {n} {what}"
        out = [conv(x) for x in v]
        if any(x is None for x in out):
            return None, f"a list of {n} {what}"
        return out, None
    if kind == "axis":
        return (v, None) if v in AXES else (None, f"one of {list(AXES)}")
    if kind == "branch":
        return (v, None) if v in BRANCHES else (None, f"one of {list(BRANCHES)}")
    if kind == "format":
        return (v, None) if v in ("csv", "json") else (None, "one of ['csv', 'json']")
    if kind == "grid":
        if isinstance(v, str):
            g = _decimal_grid(v)
            return (g, None) if g else (None, "'start:stop:step' with a whole number of steps, or a list")
        if isinstance(v, (list, tuple)) and len(v) >= 2 and all(_is_num(x) for x in v):
            return [float(x) for x in v], None
        return None, "'start:stop:step' with a whole number of steps, or a list of >= 2 numbers"
    if kind == "interval":
        if isinstance(v, str):
            v = v.split(":") if ":" in v else _split(v)
        if isinstance(v, (list, tuple)) and len(v) == 2:
            lo, hi = _num(v[0]), _num(v[1])
            if lo is not None and hi is not None and lo < hi:
                return [lo, hi], None
        return None, "two finite numbers [lo, hi] with lo < hi"
    if kind in ("path", "path_or_null"):
        if v is None and kind == "path_or_null":
            return None, None
        return (v, None) if isinstance(v, str) and v else (None, "a non-empty path string")
    raise AssertionError(kind)


def _default(key: Key, command: str):
    d = key.default
    if isinstance(d, dict):
        return d.get(command, d["_"])
    return d


def validate_config(raw) -> RunConfig:
    """Validate a raw config (dict or JSON text) into a fully defaulted RunConfig.

    Raises ConfigError carrying every problem found as
    ``{"path", "found", "expected"}`` entries.
    """
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError([{"path": "$", "found": str(exc), "expected": "a JSON object"}]) from None
    if not isinstance(raw, dict):
        raise ConfigError([{"path": "$", "found": type(raw).__name__, "expected": "a JSON object"}])
    errors = []
    command = raw.get("command")
    if command not in COMMANDS:
        errors.append({"path": "command", "found": command, "expected": f"one of {list(COMMANDS)}"})
        raise ConfigError(errors)
    params, warnings = {}, []
    for name in raw:
        if name == "command":
            continue
        if name not in KEYS:
            errors.append({"path": name, "found": raw[name], "expected": "a known key (see --help)"})
        elif command not in KEYS[name].commands:
            errors.append({"path": name, "found": raw[name], "expected": f"a key used by '{command}'"})
    for name, key in KEYS.items():
        if name == "command" or command not in key.commands:
            continue
        if name in raw:
            val, expected = _coerce(name, key.kind, raw[name])
            if expected is not None:
                errors.append({"path": name, "found": raw[name], "expected": expected})
                continue
            if key.kind == "grid":
                # keep the compact form for provenance headers; expanded on use
                val = raw[name] if isinstance(raw[name], str) else val
        else:
            if key.kind == "path":
                errors.append({"path": name, "found": None, "expected": "a value (required)"})
                continue
            val = _default(key, command)
            if val is not None and key.kind not in ("grid", "path", "path_or_null"):
                val, _ = _coerce(name, key.kind, val)
            if name not in ("out",):
                warnings.append(f"{name} defaulted to {json.dumps(_default(key, command))}")
        params[name] = val

    # cross-field checks
    if not errors:
        fmt = params.get("format")
        if command in _JSON_ONLY and fmt != "json":
            errors.append({"path": "format", "found": fmt, "expected": f"'json' (the only format of '{command}')"})
        if params.get("gamma_pattern") is not None and params.get("axis") == "gamma":
            errors.append({"path": "gamma_pattern", "found": params["gamma_pattern"],
                           "expected": "null when axis is 'gamma' (the gamma axis scales the pattern)"})
        if params.get("gamma_pattern") is not None and params.get("alpha"):
            errors.append({"path": "alpha", "found": params["alpha"],
                           "expected": "0 when gamma_pattern is given (the loss shift needs the scalar pattern)"})
        if command == "rates":
            try:
                Polarization.from_sequence(params["polarization"])
            except ValueError as exc:
                errors.append({"path": "polarization", "found": raw.get("polarization", params["polarization"]),
                               "expected": f"non-negative fractions summing to 1 ({exc})"})
            if params.get("measured_sigma_khz") is not None and params.get("measured_rates_khz") is None:
                errors.append({"path": "measured_sigma_khz", "found": params["measured_sigma_khz"],
                               "expected": "null unless measured_rates_khz is given"})
            if params.get("measured_sigma_khz") is not None and min(params["measured_sigma_khz"]) <= 0:
                errors.append({"path": "measured_sigma_khz", "found": params["measured_sigma_khz"],
                               "expected": "positive uncertainties"})
        if command == "solve-pol" and any(float(Fraction(x)) < 0 for x in params["target_rates"]):
            errors.append({"path": "target_rates", "found": params["target_rates"], "expected": "non-negative rates"})
        if command == "ep-curve" and not params["gamma"] > 0:
            errors.append({"path": "gamma", "found": params["gamma"], "expected": "a positive number for ep-curve"})
        if command in ("bands", "ep-curve"):
            gname = "grid" if command == "bands" else "J1_grid"
            d = np.diff(expand_grid(params[gname]))
            if command == "bands" and not (np.all(d > 0) or np.all(d < 0)):
                errors.append({"path": gname, "found": raw.get(gname), "expected": "a strictly monotone grid"})
    if errors:
        raise ConfigError(errors)
    return RunConfig(command, params, warnings)


def expand_grid(value) -> list:
    """Grid values from a validated ``'start:stop:step'`` string or list."""
    if isinstance(value, str):
        return _decimal_grid(value)
    return [float(x) for x in value]


def load_schema(name: str) -> dict:
    """Published JSON schema for a command's JSON output (or ``ep_record``, ``fit_report``, ``error``)."""
    from importlib.resources import files

    return json.loads((files("epsim") / "schemas" / f"{name}.json").read_text(encoding="utf-8"))


# output helpers ------------------------------------------------------------

def _clean(x):
    """JSON-ready copy: numpy scalars to Python, -0.0 to 0.0, non-finite to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x + 0.0 if math.isfinite(x) else None
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _clean(x.real), "im": _clean(x.imag)}
    if isinstance(x, Fraction):
        return str(x)
    return x


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _header(cfg: RunConfig) -> str:
    return f"epsim {cfg.command}\nconfig: {cfg.to_json()}"


def _csv(header: str, columns, rows) -> str:
    buf = io.StringIO()
    for line in header.splitlines():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(_clean(v)) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory and a rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".epsim-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# commands ------------------------------------------------------------------

def _run_bands(cfg: RunConfig) -> str:
    spec = cfg.spec()
    sw = sweep_bands(spec, cfg["axis"], expand_grid(cfg["grid"]), cluster_tol=cfg["cluster_tol"])
    phases = [classify_pt_phase(sw.bands[:, k], shift=sw.shifts[k]) for k in range(len(sw.axis_values))]
    if cfg["format"] == "csv":
        return sw.to_csv(_header(cfg))
    points = [
        {"axis_value": x, "eigenvalues": [{"re": z.real, "im": z.imag} for z in sw.bands[:, k]],
         "gap": sw.gaps[k], "gram_cond": sw.gram_conds[k], "flagged": sw.flagged[k], "pt_phase": phases[k]}
        for k, x in enumerate(sw.axis_values)
    ]
    return _dump_json({"command": "bands", "config": json.loads(cfg.to_json()), "axis": cfg["axis"], "points": points})


_EP_COLUMNS = ("axis_value", "eig_re", "eig_im", "algebraic_mult", "geometric_mult", "kind",
               "discriminant", "min_gap", "gram_cond", "bracket_width")


def _run_ep_scan(cfg: RunConfig) -> str:
    recs = locate_ep_on_scan(cfg.spec(), cfg["axis"], tuple(cfg["interval"]), tol=cfg["tol"],
                             n_grid=cfg["n_scan"], cluster_tol=cfg["cluster_tol"])
    if cfg["format"] == "csv":
        rows = [(r.params[cfg["axis"]], r.eigenvalue.real, r.eigenvalue.imag, r.algebraic_mult, r.geometric_mult,
                 r.kind, r.discriminant, r.min_gap, r.gram_cond, r.bracket_width) for r in recs]
        return _csv(_header(cfg), _EP_COLUMNS, rows)
    return _dump_json({"command": "ep-scan", "config": json.loads(cfg.to_json()), "axis": cfg["axis"],
                       "records": [r.to_dict() for r in recs]})


def _run_ep_curve(cfg: RunConfig) -> str:
    cur = trace_ep2_curve(cfg["branch"], cfg["gamma"], expand_grid(cfg["J1_grid"]), tol=cfg["tol"],
                          cluster_tol=cfg["cluster_tol"])
    if cfg["format"] == "csv":
        return cur.to_csv(_header(cfg))
    return _dump_json({
        "command": "ep-curve", "config": json.loads(cfg.to_json()), "branch": cur.branch, "gamma": cur.gamma,
        "points": [{"J1": a, "J2": b} for a, b in cur.points], "omitted_J1": cur.omitted,
        "terminal": None if cur.terminal is None else cur.terminal.to_dict(),
    })


def _run_rates(cfg: RunConfig) -> str:
    eps = Polarization.from_sequence(cfg["polarization"])
    rv = pump_rates(eps)
    out = {
        "command": "rates",
        "config": json.loads(cfg.to_json()),
        "polarization": {k: float(v) for k, v in zip(("sigma_plus", "sigma_minus", "pi"), eps.as_tuple())},
        "polarization_exact": {k: str(v) for k, v in zip(("sigma_plus", "sigma_minus", "pi"), eps.as_tuple())},
        "rates": [float(r) for r in rv.rates],
        "rates_exact": [str(r) for r in rv.rates],
        "ratio": rv.ratio_string(),
        "constraint_residual": float(constraint_residual(rv)),
        "constraint_residual_exact": str(constraint_residual(rv)),
        "gamma_estimate": None,
    }
    if cfg["measured_rates_khz"] is not None:
        g = g_from_khz(cfg["g_khz"], angular=cfg["angular"])
        est = gamma_from_rates(cfg["measured_rates_khz"], g, cfg["measured_sigma_khz"])
        out["gamma_estimate"] = {"gamma": est.gamma, "residuals_khz": list(est.residuals),
                                 "model_khz": list(est.model), "g_rad_per_s": g}
    return _dump_json(out)


def _run_solve_pol(cfg: RunConfig) -> str:
    target = [str(x) if isinstance(x, str) else x for x in cfg["target_rates"]]
    target = [Fraction(x) if "." not in x and "e" not in x.lower() else float(x) for x in target]
    sol = solve_polarization(target)
    pol = None if sol.polarization is None else sol.polarization
    return _dump_json({
        "command": "solve-pol",
        "config": json.loads(cfg.to_json()),
        "feasible": sol.feasible,
        "polarization": None if pol is None else dict(zip(("sigma_plus", "sigma_minus", "pi"), pol.as_floats())),
        "polarization_exact": None if pol is None else {
            k: str(v.limit_denominator(10**12)) for k, v in zip(("sigma_plus", "sigma_minus", "pi"), pol.as_tuple())},
        "scale": sol.scale,
        "residual": sol.residual,
        "constraint_residual": sol.constraint_residual,
        "message": sol.message,
    })


def _times(cfg: RunConfig) -> np.ndarray:
    return default_times(cfg["t_us_stop"], cfg["n_times"])


def _dataset_rows(d: TimeSeriesDataset):
    return [{"t_us": t * 1e6, "p2": p, "sigma": s, "shots": n} for t, p, s, n in zip(d.times, d.p2, d.sigma, d.shots)]


def _run_simulate(cfg: RunConfig) -> str:
    d = synthesize_dataset(cfg.spec(), _times(cfg), cfg["shots"], cfg["seed"], cfg["detection_error"])
    if cfg["format"] == "csv":
        body = d.to_csv()
        return "".join(f"# {line}\n" for line in _header(cfg).splitlines()) + body
    return _dump_json({"command": "simulate", "config": json.loads(cfg.to_json()), "seed": cfg["seed"],
                       "spec": d.spec.to_dict(), "points": _dataset_rows(d)})


def _fit_report(cfg: RunConfig, data: TimeSeriesDataset, template: HamiltonianSpec) -> dict:
    res = bootstrap_ci(data, template, tuple(cfg["bounds"]), n_resamples=cfg["n_resamples"],
                       ci_level=cfg["ci_level"], seed=cfg["seed"], weighted=cfg["weighted"])
    rep = res.to_report()
    rep["n_evaluations"] = res.n_evaluations
    rep["ci_level"] = cfg["ci_level"]
    rep["weighted"] = cfg["weighted"]
    return rep


def _run_fit(cfg: RunConfig) -> str:
    try:
        with open(cfg["data"], encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _IOFailure(f"cannot read data file {cfg['data']!r}: {exc}") from exc
    try:
        data = TimeSeriesDataset.from_csv(text)
    except (ValueError, KeyError) as exc:
        raise ConfigError([{"path": "data", "found": cfg["data"], "expected": f"a dataset CSV ({exc})"}]) from exc
    template = cfg.spec()
    rep = _fit_report(cfg, data, template)
    return _dump_json({"command": "fit", "config": json.loads(cfg.to_json()), **rep})


def _run_pipeline(cfg: RunConfig) -> str:
    spec = cfg.spec()
    d = synthesize_dataset(spec, _times(cfg), cfg["shots"], cfg["seed"], cfg["detection_error"])
    rep = _fit_report(cfg, d, spec.with_axis("gamma", 0.0))
    return _dump_json({"command": "pipeline", "config": json.loads(cfg.to_json()), "gamma_true": cfg["gamma"],
                       "dataset": _dataset_rows(d), "fit": rep})


_RUNNERS = {
    "bands": _run_bands,
    "ep-scan": _run_ep_scan,
    "ep-curve": _run_ep_curve,
    "rates": _run_rates,
    "solve-pol": _run_solve_pol,
    "simulate": _run_simulate,
    "fit": _run_fit,
    "pipeline": _run_pipeline,
}


class _IOFailure(Exception):
    pass


def _emit_error(kind: str, payload: dict, stream) -> None:
    stream.write(json.dumps({"error": kind, **_clean(payload)}, sort_keys=True) + "\n")


def execute(config: RunConfig, stdout=None, stderr=None) -> int:
    """Run a validated config; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        text = _RUNNERS[config.command](config)
    except ConfigError as exc:
        _emit_error("config", {"errors": exc.errors}, stderr)
        return EXIT_CONFIG
    except _IOFailure as exc:
        _emit_error("io", {"message": str(exc)}, stderr)
        return EXIT_IO
    except (FitError, BootstrapError, DegenerateFamilyError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _emit_error("numerical", {"type": type(exc).__name__, "message": str(exc), "command": config.command}, stderr)
        return EXIT_NUMERIC
    out = config.params.get("out")
    if out is None:
        stdout.write(text)
        return EXIT_OK
    try:
        write_atomic(out, text)
    except OSError as exc:
        _emit_error("io", {"message": f"cannot write {out!r}: {exc}"}, stderr)
        return EXIT_IO
    return EXIT_OK


def _help_epilog() -> str:
    lines = ["config keys (JSON object or --set key=value):"]
    for name, key in KEYS.items():
        d = key.default
        if isinstance(d, dict):
            d = ", ".join(f"{k}: {json.dumps(v)}" for k, v in d.items() if k != "_") + f", else {json.dumps(d['_'])}"
        else:
            d = json.dumps(d)
        lines.append(f"  {name} [{key.unit}]  {key.doc}; default {d}; commands: {', '.join(key.commands)}")
    lines.append("presets: " + ", ".join(PRESETS))
    lines.append("exit codes: 0 ok, 2 invalid config, 3 I/O failure, 4 numerical failure")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="epsim",
        description="Spectra, exceptional points, pump-rate design and gamma extraction for the four-level model.",
        epilog=_help_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("command", nargs="?", choices=COMMANDS, help="what to run (may come from --config or --preset)")
    p.add_argument("--config", metavar="PATH", help="JSON config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named parameter set")
    p.add_argument("--set", metavar="K=V", action="append", default=[], help="override one key (repeatable)")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--quiet", action="store_true", help="suppress warnings on stderr")
    return p


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    raw: dict = {}
    if args.preset:
        raw.update(PRESETS[args.preset])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            _emit_error("io", {"message": f"cannot read config {args.config!r}: {exc}"}, sys.stderr)
            return EXIT_IO
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as exc:
            _emit_error("config", {"errors": [{"path": "$", "found": str(exc), "expected": "a JSON object"}]}, sys.stderr)
            return EXIT_CONFIG
        if not isinstance(loaded, dict):
            _emit_error("config", {"errors": [{"path": "$", "found": type(loaded).__name__,
                                               "expected": "a JSON object"}]}, sys.stderr)
            return EXIT_CONFIG
        raw.update(loaded)
    if args.command:
        raw["command"] = args.command
    bad = []
    for item in args.set:
        k, sep, v = item.partition("=")
        if not sep or not k.strip():
            bad.append({"path": "--set", "found": item, "expected": "KEY=VALUE"})
            continue
        raw[k.strip()] = _parse_value(v)
    if bad:
        _emit_error("config", {"errors": bad}, sys.stderr)
        return EXIT_CONFIG
    for name in ("seed", "out", "format"):
        val = getattr(args, name)
        if val is not None:
            raw[name] = val
    try:
        cfg = validate_config(raw)
    except ConfigError as exc:
        _emit_error("config", {"errors": exc.errors}, sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        for w in cfg.warnings:
            sys.stderr.write(f"warning: {w}\n")
    try:
        return execute(cfg)
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
