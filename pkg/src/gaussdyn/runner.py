"""Single runs, parameter sweeps and the preset scenarios, written as CSV."""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import RunConfig
from .dynamics import CovarianceFlow
from .entanglement import log_negativity, simon_s
from .errors import (ConfigError, EnvironmentConstraintError, NumericalError,
                     UnphysicalStateError)
from .events import detect_events, trace
from .model import check_physical, validate_environment

SCENARIOS = ("fig1", "fig2", "fig3")
TRACE_HEADER = ("t", "d", "S", "E", "nu_tilde_minus", "entangled")
EVENTS_HEADER = ("d", "completely_positive", "classification", "n_crossings",
                 "crossing_times", "asymptotic_verdict", "S_infinity")
FIG1_HEADER = ("D", "d", "E_infinity", "S_infinity", "physical")

_BASE = {
    "oscillator.m": "1",
    "oscillator.omega": "1",
    "validation.complete_positivity": "false",
}
# preset axis ranges and grid sizes
PRESETS = {
    "fig1": {**_BASE,
             "environment.kind": "gibbs", "environment.lambda": "0.2",
             "environment.d_xx": "0.1", "environment.d_xy": "0", "environment.d_xpy": "0",
             "sweep.param": "environment.d_xx", "sweep.lo": "0.1", "sweep.hi": "0.6",
             "sweep.n_points": "51",
             "sweep.param2": "environment.d_xpy", "sweep.lo2": "0", "sweep.hi2": "0.6",
             "sweep.n_points2": "61"},
    "fig2": {**_BASE,
             "environment.kind": "symmetric", "environment.lambda": "0.5",
             "environment.d_xx": "0.4", "environment.d_pxpx": "0.4",
             "initial.preset": "separable",
             "sweep.param": "environment.d_xpy", "sweep.n_points": "33"},
    "fig3": {**_BASE,
             "environment.kind": "symmetric", "environment.lambda": "0.5",
             "environment.d_xx": "0.4", "environment.d_pxpx": "0.4",
             "initial.preset": "entangled", "allow_unphysical": "true",
             "sweep.param": "environment.d_xpy", "sweep.n_points": "33"},
}


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    return format(float(value), ".12g")


def write_csv(path_or_stream, header, rows):
    """UTF-8, LF-terminated CSV with a mandatory header row."""
    def _write(stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])

    if hasattr(path_or_stream, "write"):
        _write(path_or_stream)
    else:
        with open(path_or_stream, "w", encoding="utf-8", newline="") as fh:
            _write(fh)


def _parallel_map(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# --- per-point evaluation (top level so worker processes can unpickle it) ---

def _steady_outputs(flow):
    s_inf = simon_s(flow.sigma_inf).s
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            e_inf = log_negativity(flow.sigma_inf).e
        except NumericalError:
            e_inf = math.nan
    return s_inf, e_inf


def evaluate_point(job):
    """One sweep row: ``{"valid", "S_infinity", "E_infinity", ...}``.

    Values are computed even when the environment fails validation, so an
    invalid row is flagged rather than dropped; NaN marks quantities that
    cannot be evaluated at all.
    """
    cfg, coords = job
    row = {"valid": False, "S_infinity": math.nan, "E_infinity": math.nan,
           "classification": "", "n_crossings": "", "crossing_times": ""}
    try:
        for key, value in coords:
            cfg = cfg.with_param(key, float(value))
        osc, env = cfg.oscillator, cfg.environment()
    except ValueError:
        return row
    row["valid"] = validate_environment(
        env, cfg.tol, complete_positivity=cfg.complete_positivity).ok
    try:
        flow = CovarianceFlow.from_specs(osc, env)
    except NumericalError:
        return row
    row["S_infinity"], row["E_infinity"] = _steady_outputs(flow)
    if {"classification", "crossings"} & set(cfg.outputs):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tr = trace(cfg.initial, osc, env, cfg.t_max, cfg.n_samples, flow=flow)
            report = detect_events(tr, osc, env, cfg.initial, flow=flow)
        row["classification"] = report.classification
        row["n_crossings"] = str(len(report.crossings))
        row["crossing_times"] = ";".join(fmt(c.t) for c in report.crossings)
    return row


def _grid(cfg: RunConfig):
    axes = [[(axis.param, float(v)) for v in axis.values()] for axis in cfg.sweep]
    return [tuple(point) for point in itertools.product(*axes)]


def _check_initial(cfg: RunConfig, stderr=None):
    report = check_physical(cfg.initial, cfg.tol)
    if report.is_physical:
        return report
    if not cfg.allow_unphysical:
        raise UnphysicalStateError(report)
    if stderr is not None:
        print(f"warning: initial state is unphysical (nu_- = "
              f"{report.symplectic_eigenvalues[0]:.6g} < 1/2); proceeding because "
              f"allow_unphysical is set", file=stderr)
    return report


def sweep_rows(cfg: RunConfig, jobs: int = 1):
    """Grid points in lexicographic order with their evaluated rows."""
    if not cfg.sweep:
        raise ConfigError("config has no sweep block")
    points = _grid(cfg)
    rows = _parallel_map(evaluate_point, [(cfg, p) for p in points], jobs)
    return points, rows


def sweep_header(cfg: RunConfig):
    header = [axis.param for axis in cfg.sweep] + ["valid"]
    for out in cfg.outputs:
        header += ["n_crossings", "crossing_times"] if out == "crossings" else [out]
    return header


def run_sweep(cfg: RunConfig, jobs: int = 1, out=None, stderr=None):
    """Evaluate every grid point and write one CSV row per point."""
    if {"classification", "crossings"} & set(cfg.outputs):
        _check_initial(cfg, stderr)
    points, rows = sweep_rows(cfg, jobs)
    header = sweep_header(cfg)
    body = []
    for point, row in zip(points, rows):
        line = [v for _, v in point] + [row["valid"]]
        for o in cfg.outputs:
            line += [row["n_crossings"], row["crossing_times"]] if o == "crossings" else [row[o]]
        body.append(line)
    target = out if out is not None else cfg.output_path
    if target is None:
        raise ConfigError("no output path: set output.path or pass --out")
    write_csv(target, header, body)
    return body


def run_single(cfg: RunConfig, out, stderr=None, trace_path=None) -> dict:
    """Validate, solve the steady state, optionally trace; print a text report."""
    if cfg.sweep:
        raise ConfigError("config has a sweep block; use the sweep command")
    osc, env = cfg.oscillator, cfg.environment()
    validation = validate_environment(env, cfg.tol,
                                      complete_positivity=cfg.complete_positivity)
    if not validation.ok:
        raise EnvironmentConstraintError(validation)
    physical = _check_initial(cfg, stderr)
    flow = CovarianceFlow.from_specs(osc, env)
    s0 = simon_s(cfg.initial)
    s_inf, e_inf = _steady_outputs(flow)

    mode = "complete positivity" if cfg.complete_positivity else "pairwise constraints only"
    print(f"environment: ok [{mode}] (coefficient-matrix min eigenvalue "
          f"{validation.min_eigenvalue:.6g})", file=out)
    nu = physical.symplectic_eigenvalues
    print(f"initial state ({cfg.initial_label}): nu_- = {nu[0]:.6g}, nu_+ = {nu[1]:.6g}",
          file=out)
    print("sigma(inf) =", file=out)
    for row in flow.sigma_inf.entries:
        print("  " + "  ".join(f"{v: .12g}" for v in row), file=out)
    print(f"S(0) = {fmt(s0.s)} ({s0.verdict})", file=out)
    print(f"S(inf) = {fmt(s_inf)}", file=out)
    print(f"E(inf) = {fmt(e_inf)}", file=out)
    result = {"validation": validation, "sigma_inf": flow.sigma_inf, "S0": s0.s,
              "S_infinity": s_inf, "E_infinity": e_inf}

    if cfg.has_time:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            tr = trace(cfg.initial, osc, env, cfg.t_max, cfg.n_samples, flow=flow)
            report = detect_events(tr, osc, env, cfg.initial, flow=flow)
        for w in caught:
            if stderr is not None:
                print(f"warning: {w.message}", file=stderr)
        print(f"classification: {report.classification}", file=out)
        for c in report.crossings:
            print(f"  crossing at t = {fmt(c.t)} ({c.direction})", file=out)
        result.update(trace=tr, events=report)
        path = trace_path or cfg.output_path
        if path is not None:
            write_csv(path, ("t", "S", "E", "nu_tilde_minus", "entangled"),
                      zip(tr.times, tr.s_values, tr.e_values, tr.nu_tilde_minus,
                          tr.entangled))
    return result


# --- preset scenarios ----------------------------------------------------------

def scenario_mapping(name: str, overrides: dict[str, str] | None = None) -> dict[str, str]:
    """Preset keys merged with overrides.

    For fig2/fig3 the shorthand ``D`` sets both d_xx and d_pxpx and ``d``
    pins a single d_xpy value. Unless overridden, d_xpy runs over [-D, D]
    and t_max is 20 / lambda.
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    mapping = dict(PRESETS[name])
    overrides = dict(overrides or {})
    if name == "fig1":
        if "D" in overrides or "d" in overrides:
            raise ConfigError("fig1 sweeps D and d; set sweep.* ranges instead")
        mapping.update(overrides)
        return mapping

    if "D" in overrides:
        big_d = overrides.pop("D")
        overrides.setdefault("environment.d_xx", big_d)
        overrides.setdefault("environment.d_pxpx", big_d)
    if "d" in overrides:
        little = overrides.pop("d")
        overrides.update({"sweep.lo": little, "sweep.hi": little, "sweep.n_points": "1"})
    mapping.update(overrides)
    try:
        big = float(mapping["environment.d_xx"])
        lam = float(mapping["environment.lambda"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    mapping.setdefault("sweep.lo", repr(-big))
    mapping.setdefault("sweep.hi", repr(big))
    if lam > 0:
        mapping.setdefault("time.t_max", repr(20.0 / lam))
    mapping.setdefault("time.n_samples", "2000")
    return mapping


def _trace_job(job):
    cfg, d = job
    cfg = cfg.with_param("environment.d_xpy", d)
    osc, env = cfg.oscillator, cfg.environment()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        flow = CovarianceFlow.from_specs(osc, env)
        tr = trace(cfg.initial, osc, env, cfg.t_max, cfg.n_samples, flow=flow)
        report = detect_events(tr, osc, env, cfg.initial, flow=flow)
    cp = validate_environment(env, cfg.tol, complete_positivity=True).ok
    return tr, report, cp, [str(w.message) for w in caught]


def events_path_for(path) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}_events{p.suffix or '.csv'}")


def run_scenario(name: str, overrides: dict[str, str] | None, out_path, jobs: int = 1,
                 stderr=None):
    """Write the CSV for one preset scenario.

    ``fig1`` writes the (D, d) surface of E(inf) and S(inf). ``fig2`` and
    ``fig3`` write S(t), E(t) traces over a d grid to ``out_path`` and a
    per-d event summary to ``<stem>_events.csv`` next to it.
    """
    cfg = cfgmod.from_mapping(scenario_mapping(name, overrides))
    if name == "fig1":
        points, rows = sweep_rows(cfg, jobs)
        body = [[p[0][1], p[1][1], r["E_infinity"], r["S_infinity"], r["valid"]]
                for p, r in zip(points, rows)]
        write_csv(out_path, FIG1_HEADER, body)
        return body

    d_values = cfg.sweep[0].values()
    for d in d_values:
        env = cfg.with_param("environment.d_xpy", d).environment()
        validation = validate_environment(env, cfg.tol,
                                          complete_positivity=cfg.complete_positivity)
        if not validation.ok:
            raise EnvironmentConstraintError(
                validation, f"at d = {fmt(d)}: {validation.describe()}")
    _check_initial(cfg, stderr)

    results = _parallel_map(_trace_job, [(cfg, d) for d in d_values], jobs)
    trace_rows, event_rows = [], []
    for d, (tr, report, cp, notes) in zip(d_values, results):
        for note in notes:
            if stderr is not None:
                print(f"warning (d = {fmt(d)}): {note}", file=stderr)
        for t, s, e, nu, ent in zip(tr.times, tr.s_values, tr.e_values, tr.nu_tilde_minus,
                                    tr.entangled):
            trace_rows.append([t, d, s, e, nu, ent])
        event_rows.append([d, cp, report.classification, len(report.crossings),
                           ";".join(fmt(c.t) for c in report.crossings),
                           report.asymptotic_verdict, report.s_infinity])
    write_csv(out_path, TRACE_HEADER, trace_rows)
    write_csv(events_path_for(out_path), EVENTS_HEADER, event_rows)
    return event_rows

