"""Experiment runner: ``hyprel --config run.json [--out DIR] [--verbose]``.

A run config is a JSON object with exactly the keys ``command``,
``parameters``, ``output_dir`` and ``seed``. Each command writes one or more
CSV files, ``manifest.json`` (resolved config, version, wall time) and
``summary.json`` (one pass/fail entry per checked invariant).

Exit codes: 0 pass, 2 invariant failure, 3 numerical error, 4 config error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._io import write_csv, write_json
from .exceptions import ConfigError, HyprelError
from .halfspace import DefiningFunction, MobiusMap

log = logging.getLogger("hyprel")

EXIT_PASS, EXIT_FAIL, EXIT_NUMERIC, EXIT_CONFIG = 0, 2, 3, 4
TOP_LEVEL_KEYS = ("command", "parameters", "output_dir", "seed")

_STANDARD_R = [{"kind": "height"}, {"kind": "scaled", "center": 0.0, "alpha": 1.0}, {"kind": "tilted", "beta": 0.3}]

DEFAULTS = {
    "geodesic-entropy": {
        "c1": [[0, 1], [2, 4]], "c2": [[0, 2], [1, 4]],
        "defining_function": {"kind": "height"},
        "eps_max": None, "eps_min": None, "ratio": 0.8, "tol": 1e-11, "threshold": 1e-6,
    },
    "invariance": {
        "c1": [[0, 1], [2, 4]], "c2": [[0, 2], [1, 4]],
        "defining_functions": _STANDARD_R,
        "tol": 1e-11, "threshold": 1e-4,
        "mobius_samples": 10, "mobius_threshold": 1e-6,
    },
    "hemisphere": {
        "radius": 1.0, "eps_max": 0.3, "eps_min": 1e-3, "ratio": 0.8, "tol": 1e-10,
        "c0_rtol": 1e-6, "area_atol": 1e-3,
    },
    "catenoid": {
        "r1": 1.0, "r2": 2.0, "n_grid": 512, "y_start": 1e-3, "rtol": 1e-13,
        "eps_min": 1e-3, "tol": 1e-9, "defining_functions": _STANDARD_R,
        "area_rtol": 1e-2,
    },
    "separation": {
        "r1": 1.0, "r2": 2.0, "n_grid": 512, "y_min": 1e-3, "y_max": 1e-1, "samples": 25,
        "slope_range": [2.7, 3.3],
    },
    "mcf": {
        "R0": 1.0, "amplitude": 0.1, "N": 400, "t_end": 2.0, "dt": None, "n_snapshots": 40,
        "step_tol": 1e-8, "identity_rtol": 1e-2, "stationary_steps": 1000, "stationary_tol": 1e-12,
    },
    "scaling-test": {
        "a": 0.3, "c": 0.5, "lam": 0.5, "Y": 1.0, "J": 200, "t_end": 0.5, "dt": 1e-3,
        "threshold": 1e-6,
    },
    "weighted": {
        "c1": [[0, 1], [2, 4]], "c2": [[0, 2], [1, 4]],
        "alpha": 2.0, "beta": -3.0, "reduction_eps": 0.2, "tol": 1e-11,
        "linearity_tol": 1e-8, "reduction_tol": 1e-10, "min_tail_slope": 1.0,
    },
}


# --- config -------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return raw


def resolve_config(raw, out_override=None) -> dict:
    """Validate ``raw`` against the strict schema and fill in parameter defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = sorted(set(raw) - set(TOP_LEVEL_KEYS))
    if unknown:
        raise ConfigError(f"config: unknown key(s) {unknown}; allowed {list(TOP_LEVEL_KEYS)}")
    cmd = raw.get("command")
    if cmd not in DEFAULTS:
        raise ConfigError(f"command: expected one of {sorted(DEFAULTS)}, got {cmd!r}")
    params = raw.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters: must be an object")
    bad = sorted(set(params) - set(DEFAULTS[cmd]))
    if bad:
        raise ConfigError(f"parameters: unknown key(s) {bad} for {cmd}; allowed {sorted(DEFAULTS[cmd])}")
    out = out_override if out_override is not None else raw.get("output_dir")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir: required string (or pass --out)")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed: must be an integer, got {seed!r}")
    resolved = copy.deepcopy(DEFAULTS[cmd])
    resolved.update(copy.deepcopy(params))
    for key, val in resolved.items():
        default = DEFAULTS[cmd][key]
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"parameters.{key}: expected a number, got {val!r}")
    return {"command": cmd, "parameters": resolved, "output_dir": out, "seed": seed}


def _threads() -> int:
    raw = os.environ.get("HYPREL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"HYPREL_THREADS: expected an integer, got {raw!r}") from None


def _defining(d, where) -> DefiningFunction:
    try:
        return DefiningFunction.from_dict(d)
    except (HyprelError, TypeError, KeyError) as exc:
        raise ConfigError(f"parameters.{where}: {exc}") from exc


def _config_pair(p, key1="c1", key2="c2"):
    from .geodesics import GeodesicConfig
    try:
        return GeodesicConfig(p[key1]), GeodesicConfig(p[key2])
    except (HyprelError, TypeError, ValueError) as exc:
        raise ConfigError(f"parameters.{key1}/{key2}: {exc}") from exc


def _check(value, threshold, ok) -> dict:
    return {"value": value, "threshold": threshold, "pass": bool(ok)}


def _finite(x):
    return x if isinstance(x, (int, str, bool)) or x is None or math.isfinite(x) else str(x)


# --- commands -----------------------------------------------------------------

def _cmd_geodesic_entropy(p, out, seed, threads):
    from .expansion import geometric_eps_grid, relative_entropy_numeric
    from .geodesics import relative_entropy_exact
    from .quadrature import geodesic_immersion

    c1, c2 = _config_pair(p)
    r = _defining(p["defining_function"], "defining_function")
    grid = None
    if p["eps_max"] is not None or p["eps_min"] is not None:
        grid = geometric_eps_grid(p["eps_max"] or 0.3, p["eps_min"] or 1e-3, p["ratio"])
    exact = relative_entropy_exact(c1, c2)
    est = relative_entropy_numeric(geodesic_immersion(c1), geodesic_immersion(c2), r, grid, p["tol"])
    write_csv(out / "samples.csv", ("eps", "difference", "error_bound"), est.diagnostics["samples"])
    err = abs(est.value - exact)
    return {"exact": exact, "numeric": est.value, "error_bar": est.error_bar,
            "checks": {"matches_exact": _check(err, p["threshold"], err <= p["threshold"])}}


def _sample_maps(n, seed, lo, hi):
    rng = np.random.default_rng(seed)
    maps = []
    while len(maps) < n:
        a, b, c, d = rng.uniform(-2.0, 2.0, 4)
        if a * d - b * c <= 0.2:
            continue
        m = MobiusMap(a, b, c, d)
        pole = m.pole()
        if np.isfinite(pole) and lo - 0.5 <= pole <= hi + 0.5:
            continue
        maps.append(m)
    return maps


def _cmd_invariance(p, out, seed, threads):
    from .expansion import relative_entropy_numeric
    from .geodesics import relative_entropy_exact
    from .quadrature import geodesic_immersion

    c1, c2 = _config_pair(p)
    s1, s2 = geodesic_immersion(c1), geodesic_immersion(c2)
    exact = relative_entropy_exact(c1, c2)
    rows, values = [], []
    for i, d in enumerate(p["defining_functions"]):
        r = _defining(d, f"defining_functions[{i}]")
        est = relative_entropy_numeric(s1, s2, r, None, p["tol"])
        values.append(est.value)
        rows.append((json.dumps(r.to_dict(), sort_keys=True), est.value, est.error_bar))
    write_csv(out / "defining_functions.csv", ("defining_function", "entropy", "error_bar"), rows)
    spread = float(max(values) - min(values)) if values else 0.0
    vs_exact = float(max(abs(v - exact) for v in values)) if values else 0.0
    checks = {
        "pairwise": _check(spread, p["threshold"], spread <= p["threshold"]),
        "vs_exact": _check(vs_exact, p["threshold"], vs_exact <= p["threshold"]),
    }
    if p["mobius_samples"] > 0:
        base = values[0] if values else relative_entropy_numeric(s1, s2, None, None, p["tol"]).value
        mrows = []
        for m in _sample_maps(int(p["mobius_samples"]), seed, c1.endpoints[0], c1.endpoints[-1]):
            t1, t2 = c1.transform(m), c2.transform(m)
            v = relative_entropy_numeric(geodesic_immersion(t1), geodesic_immersion(t2), None, None, p["tol"])
            mrows.append((m.a, m.b, m.c, m.d, v.value, v.value - base))
        write_csv(out / "mobius.csv", ("a", "b", "c", "d", "entropy", "deviation"), mrows)
        worst = float(max(abs(r[-1]) for r in mrows))
        checks["mobius"] = _check(worst, p["mobius_threshold"], worst <= p["mobius_threshold"])
    return {"exact": exact, "values": values, "checks": checks}


def _cmd_hemisphere(p, out, seed, threads):
    from .expansion import fit_expansion, geometric_eps_grid
    from .quadrature import hemisphere_immersion, vol_eps

    R = float(p["radius"])
    grid = geometric_eps_grid(p["eps_max"] * R, p["eps_min"] * R, p["ratio"])
    s = hemisphere_immersion(R)
    rows = [(e, *vol_eps(s, None, e, p["tol"] * R, rtol=1e-13)) for e in grid]
    write_csv(out / "samples.csv", ("eps", "area", "error_bound"), rows)
    fit = fit_expansion(rows, 2)
    write_csv(out / "fit.csv", ("term", "coefficient"), sorted(fit.coefficients.items()))
    c0_rel = abs(fit.leading_coefficient - 2 * math.pi * R) / (2 * math.pi * R)
    area_err = abs(fit.constant_term + 2 * math.pi)
    return {"c0": fit.leading_coefficient, "renormalized_area": fit.constant_term,
            "constant_error": fit.constant_error,
            "checks": {"c0": _check(c0_rel, p["c0_rtol"], c0_rel <= p["c0_rtol"]),
                       "renormalized_area": _check(area_err, p["area_atol"], area_err <= p["area_atol"])}}


def _shoot(p, threads):
    from .minimal import ShootingControls, shoot_catenoid

    ctrl = {"n_grid": int(p["n_grid"])}
    if "y_start" in p:
        ctrl.update(y_start=p["y_start"], rtol=p["rtol"])
    return shoot_catenoid(p["r1"], p["r2"], ShootingControls(**ctrl), workers=threads)


def _cmd_catenoid(p, out, seed, threads):
    from .expansion import fit_expansion, geometric_eps_grid, relative_entropy_numeric
    from .minimal import alexakis_mazzeo_area
    from .quadrature import vol_eps

    res = _shoot(p, threads)
    res.write_trace_csv(out / "trace.csv")
    checks, surfaces = {}, []
    for k, s in enumerate(res.surfaces):
        s.write_profile_csv(out / f"profile_{k}.csv")
        am = alexakis_mazzeo_area(s)
        grid = geometric_eps_grid(0.1 * s.max_height(), p["eps_min"])
        rows = [(e, *vol_eps(s.immersion(), None, e, p["tol"], rtol=1e-13)) for e in grid]
        write_csv(out / f"samples_{k}.csv", ("eps", "area", "error_bound"), rows)
        fit = fit_expansion(rows, 2)
        rel = abs(fit.constant_term - am["area"]) / abs(am["area"])
        checks[f"area_{k}"] = _check(rel, p["area_rtol"], rel <= p["area_rtol"])
        surfaces.append({"a3": s.a3, "max_height": s.max_height(), "landing": s.landing,
                         "am_area": am["area"], "fit_constant": fit.constant_term,
                         "fit_error": fit.constant_error, "ode_residual": s.ode_residual()})
    pair = None
    if len(res.surfaces) == 2:
        s1, s2 = res.surfaces
        grid = geometric_eps_grid(0.1 * min(s1.max_height(), s2.max_height()), p["eps_min"])
        target = surfaces[0]["fit_constant"] - surfaces[1]["fit_constant"]
        bar_fit = surfaces[0]["fit_error"] + surfaces[1]["fit_error"]
        pair, prow = [], []
        for i, d in enumerate(p["defining_functions"]):
            r = _defining(d, f"defining_functions[{i}]")
            est = relative_entropy_numeric(s1.immersion(), s2.immersion(), r, grid, p["tol"])
            pair.append(est.value)
            prow.append((json.dumps(r.to_dict(), sort_keys=True), est.value, est.error_bar))
            gap = abs(est.value - target)
            bar = est.error_bar + bar_fit
            checks[f"pair_identity_{i}"] = _check(gap, bar, gap <= bar)
        write_csv(out / "pair_entropy.csv", ("defining_function", "entropy", "error_bar"), prow)
    if not res.surfaces:
        checks["found"] = _check(0, 1, False)
    return {"surfaces": surfaces, "pair_entropy": pair, "scan_half_width": res.scan_half_width,
            "checks": checks}


def _cmd_separation(p, out, seed, threads):
    from .minimal import separation_rate

    res = _shoot(p, threads)
    if len(res.surfaces) != 2:
        return {"surfaces": len(res.surfaces), "checks": {"pair_found": _check(len(res.surfaces), 2, False)}}
    s1, s2 = res.surfaces
    lo, hi = p["slope_range"]
    checks, rows = {}, []
    for side in (0, 1):
        sep = separation_rate(s1, s2, (p["y_min"], p["y_max"]), int(p["samples"]), side)
        rows += [(side, y, g) for y, g in zip(sep.heights, sep.gaps)]
        checks[f"slope_side_{side}"] = _check(sep.slope, [lo, hi], lo <= sep.slope <= hi)
    write_csv(out / "separation.csv", ("side", "y", "gap"), rows)
    return {"checks": checks}


def _cmd_mcf(p, out, seed, threads):
    from .flow import RadialCurveState, max_stable_dt, monotonicity_check, run, step

    state = RadialCurveState.perturbed(p["R0"], p["amplitude"], int(p["N"]))
    traj = run(state, p["t_end"], p["dt"], int(p["n_snapshots"]))
    traj.write_csv(out / "trajectory.csv")
    mono = monotonicity_check(traj, 0.0, traj.times[-1])
    inc = max(traj.max_step_increase(), traj.max_snapshot_increase())
    checks = {
        "monotone": _check(inc, p["step_tol"], inc <= p["step_tol"]),
        "identity": _check(mono["relative"], p["identity_rtol"], mono["relative"] <= p["identity_rtol"]),
    }
    if p["stationary_steps"] > 0:
        st = RadialCurveState.from_function(0.0, p["R0"], int(p["N"]), lambda th: np.full_like(th, p["R0"]))
        dt = 0.9 * max_stable_dt(st)
        for _ in range(int(p["stationary_steps"])):
            st = step(st, dt)
        drift = float(np.max(np.abs(st.R - p["R0"])))
        checks["stationary"] = _check(drift, p["stationary_tol"], drift <= p["stationary_tol"])
    return {"steps": traj.metadata.get("steps"), "identity": mono, "checks": checks}


def _cmd_scaling(p, out, seed, threads):
    from .flow import NearBoundaryGraph, evolve_graph, graph_scaling_test

    g = NearBoundaryGraph.quadratic(p["a"], p["c"], p["Y"], int(p["J"]))
    res = graph_scaling_test(g, p["lam"], p["t_end"], p["dt"])
    fin, fin_s = res["final"], res["final_scaled"]
    write_csv(out / "graphs.csv", ("y", "u", "y_scaled", "u_scaled"),
              zip(fin.y, fin.u, fin_s.y, fin_s.u))
    # the barrier constant may not exceed its initial value by more than round-off
    grow = res["barrier_max"] - res["barrier_initial"]
    return {"sup_difference": res["sup_difference"], "barrier_initial": res["barrier_initial"],
            "barrier_max": res["barrier_max"],
            "checks": {"scaling": _check(res["sup_difference"], p["threshold"], res["sup_difference"] <= p["threshold"]),
                       "barrier": _check(grow, 1e-9 * res["barrier_initial"], grow <= 1e-9 * res["barrier_initial"])}}


def _cmd_weighted(p, out, seed, threads):
    from .expansion import relative_entropy_numeric
    from .halfspace import NormalField
    from .quadrature import geodesic_immersion
    from .weights import Weight, quadratic_reduction, reduction_invariant, weighted_entropy, weighted_tail_slope

    c1, c2 = _config_pair(p)
    s1, s2 = geodesic_immersion(c1), geodesic_immersion(c2)
    tol = p["tol"]
    plain = relative_entropy_numeric(s1, s2, None, None, tol).value
    w1, w2 = Weight.vertical_square(), Weight.product([1.0, 0.0], [0.0, 1.0])
    one = weighted_entropy(s1, s2, Weight.constant(1.0), tol=tol).value
    e1 = weighted_entropy(s1, s2, w1, tol=tol)
    e2 = weighted_entropy(s1, s2, w2, tol=tol)
    mix = weighted_entropy(s1, s2, p["alpha"] * w1 + p["beta"] * w2, tol=tol).value
    lin = abs(mix - (p["alpha"] * e1.value + p["beta"] * e2.value))
    worst = 0.0
    for g in c1.geodesics + c2.geodesics:
        bg = NormalField(g.center, g.radius)
        for w in (w1, w2):
            worst = max(worst, reduction_invariant(quadratic_reduction(w, bg, p["reduction_eps"]), bg))
    tail = weighted_tail_slope(s1, s2, w1)
    write_csv(out / "tail.csv", ("eps", "weighted_difference"), zip(tail["eps"], tail["values"]))
    write_csv(out / "weights.csv", ("weight", "entropy", "error_bar", "x_norm", "ratio"),
              [("vertical_square", e1.value, e1.error_bar, e1.diagnostics["x_norm"], e1.diagnostics["ratio"]),
               ("product_x_y", e2.value, e2.error_bar, e2.diagnostics["x_norm"], e2.diagnostics["ratio"])])
    return {"unweighted": plain, "constant_weight": one,
            "checks": {"constant_reduces": _check(abs(one - plain), 0.0, one == plain),
                       "linearity": _check(lin, p["linearity_tol"], lin <= p["linearity_tol"]),
                       "reduction_invariant": _check(worst, p["reduction_tol"], worst <= p["reduction_tol"]),
                       "tail_slope": _check(tail["slope"], p["min_tail_slope"], tail["slope"] >= p["min_tail_slope"])}}


COMMANDS = {
    "geodesic-entropy": _cmd_geodesic_entropy,
    "invariance": _cmd_invariance,
    "hemisphere": _cmd_hemisphere,
    "catenoid": _cmd_catenoid,
    "separation": _cmd_separation,
    "mcf": _cmd_mcf,
    "scaling-test": _cmd_scaling,
    "weighted": _cmd_weighted,
}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        return _finite(obj)
    return obj


def run_config(config: dict) -> int:
    """Execute a resolved config; returns the exit status."""
    out = Path(config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    threads = _threads()
    t0 = time.perf_counter()
    status = EXIT_PASS
    try:
        summary = COMMANDS[config["command"]](config["parameters"], out, config["seed"], threads)
        passed = all(c["pass"] for c in summary["checks"].values())
        summary["pass"] = passed
        status = EXIT_PASS if passed else EXIT_FAIL
    except ConfigError:
        raise
    except HyprelError as exc:
        summary = {"pass": False, "error": f"{type(exc).__name__}: {exc}", "checks": {}}
        status = EXIT_NUMERIC
    wall = time.perf_counter() - t0
    summary["command"] = config["command"]
    write_json(out / "summary.json", _clean(summary))
    write_json(out / "manifest.json", _clean({
        "config": config, "version": __version__, "wall_time_s": wall, "threads": threads,
        "python": platform.python_version(), "numpy": np.__version__, "exit_status": status,
    }))
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hyprel", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="path to the JSON run config")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = resolve_config(load_config(args.config), args.out)
        log.info("running %s into %s", config["command"], config["output_dir"])
        status = run_config(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if status == EXIT_NUMERIC:
        print(json.loads(Path(config["output_dir"], "summary.json").read_text())["error"], file=sys.stderr)
    log.info("exit status %d", status)
    return status


if __name__ == "__main__":
    sys.exit(main())
