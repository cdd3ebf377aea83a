"""Batch experiment runner.

    frostman-lab <command> --config <path> [--out <dir>] [--threads N]

The config is a JSON object or flat ``key=value`` lines (values are read as
JSON when possible, otherwise as strings; ``a,b,c`` becomes a list).  Each
command writes one CSV table and prints ``PASS|FAIL <command> max_ratio=<v>``.
Exit status: 0 when every verdict passes, 1 on a violated bound, 2 on a bad
config.

Randomness: instance ``i`` of sweep point ``p`` uses
``numpy.random.SeedSequence(seed, spawn_key=(p, i))``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import constructions, incidence, measures, spectral
from ._common import DomainError, PreconditionError, loglog_slope
from .curve import BUILTINS, curve_from_record

COMMANDS = ("sharpness", "incidence-sweep", "fourier-decay", "l6-decay", "energy-xcheck",
            "regularize", "measure-incidence", "conjecture-probe")


class ConfigError(ValueError):
    pass


class Result:
    def __init__(self, header, rows, passed, max_ratio, notes=None):
        self.header = list(header)
        self.rows = rows
        self.passed = bool(passed)
        self.max_ratio = float(max_ratio)
        self.notes = notes or {}

    def csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# config


def _parse_value(text):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [_parse_value(p) for p in text.split(",") if p.strip()]
    return text


def parse_config(text):
    text = text.strip()
    if not text:
        return {}
    if text.startswith("{"):
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"bad JSON config: {e}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be an object")
        return cfg
    cfg = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value")
        k, v = line.split("=", 1)
        cfg[k.strip()] = _parse_value(v)
    return cfg


class Params:
    """Typed access to config values with defaults; unknown keys are errors."""

    def __init__(self, cfg, allowed):
        extra = set(cfg) - set(allowed) - {"command", "out", "threads", "budget"}
        if extra:
            raise ConfigError(f"unknown keys: {sorted(extra)}")
        self.cfg = cfg

    def num(self, key, default):
        v = self.cfg.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(v)

    def int(self, key, default):
        v = self.num(key, default)
        if v != int(v):
            raise ConfigError(f"{key} must be an integer")
        return int(v)

    def ints(self, key, default):
        v = self.cfg.get(key, default)
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            v = [v]
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) or x != int(x) for x in v):
            raise ConfigError(f"{key} must be a list of integers")
        return [int(x) for x in v]

    def nums(self, key, default):
        v = self.cfg.get(key, default)
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            v = [v]
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            raise ConfigError(f"{key} must be a list of numbers")
        return [float(x) for x in v]

    def str(self, key, default, choices=None):
        v = self.cfg.get(key, default)
        if not isinstance(v, str) or (choices and v not in choices):
            raise ConfigError(f"{key} must be one of {choices}" if choices else f"{key} must be a string")
        return v


def _curve(p):
    v = p.cfg.get("curve", "parabola")
    if isinstance(v, dict):
        return curve_from_record(v)
    if v not in BUILTINS:
        raise ConfigError(f"unknown curve {v!r}")
    return BUILTINS[v]()


def _seq(seed, *key):
    return np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# commands


def run_sharpness(p, threads=1):
    tau, s = p.num("tau", 1.2), p.num("s", 0.3)
    levels = p.ints("levels", list(range(8, 15)))
    factor = p.num("factor", 8.0)
    tol = p.num("slope_tol", 0.1)
    insts = _map(lambda k: constructions.build_sharpness_instance(2.0**-k, tau, s, energy_level=min(k, 8)), levels, threads)
    keys = ("A+A", "psi(A)+B", "AxB+G(D)")
    header = ["delta", "cover_AA", "cover_psiA_B", "cover_AxB_GD", "ratio_AA", "ratio_psiA_B", "ratio_AxB_GD",
              "frostman_sigma", "energy_mu"]
    rows, worst = [], 1.0
    for k, inst in zip(levels, insts):
        cov, rat = inst.diagnostics["covers"], inst.diagnostics["ratios"]
        rows.append([2.0**-k] + [cov[x] for x in keys] + [rat[x] for x in keys] + [inst.c, inst.c1])
        worst = max([worst] + [max(rat[x], 1 / rat[x]) for x in keys])
    slope = loglog_slope([2.0**k for k in levels], [r[3] for r in rows]) if len(levels) > 1 else float("nan")
    ok = worst <= factor and abs(slope - tau) <= tol
    return Result(header, rows, ok, worst, {"slope": slope, "target": tau})


def _incidence_point(args):
    s, t, k, seed, pidx, n, n_tubes, kind, c_accept, eps = args
    out = []
    for i in range(n):
        inst = constructions.random_incidence_instance(k, s, t, _seq(seed, pidx, k, i), n_tubes=n_tubes)
        if kind == "main":
            r = incidence.check_bound_main(inst.T, inst.F_of_q, s, t, c_accept=c_accept)
        elif kind == "easy":
            r = incidence.check_bound_easy(inst.T, inst.F_of_q, s, t, c_accept=c_accept)
        else:
            r = incidence.check_bound_gamma(inst.T, inst.F_of_q, s, t, eps, c_accept=c_accept)
        q = r.params
        out.append([q["s"], q["t"], q["delta"], q["A"], q["B"], q["sizeP"], q["sizeF"],
                    r.measured, r.envelope, r.ratio, r.verdict, i])
    return out


def run_incidence_sweep(p, threads=1):
    pairs = p.cfg.get("pairs")
    if pairs is None:
        pairs = [[p.num("s", 0.3), p.num("t", 0.5)]]
    if not isinstance(pairs, list) or any(not isinstance(x, list) or len(x) != 2 for x in pairs):
        raise ConfigError("pairs must be a list of [s, t]")
    levels = p.ints("levels", [8, 9, 10, 11, 12])
    n = p.int("instances", 100)
    n_tubes = p.int("tubes", 16)
    kind = p.str("bound", "main", ("main", "easy", "gamma"))
    c_accept = p.num("C_accept", incidence.C_ACCEPT)
    eps = p.num("epsilon", 0.0)
    seed = p.int("seed", 0)
    max_slope = p.num("max_slope", 0.05)
    points = [(float(s), float(t), k, seed, i, n, n_tubes, kind, c_accept, eps)
              for i, (s, t) in enumerate(pairs) for k in levels]
    for s, t, *_ in points:
        if kind == "main" and not s + t < 2:
            raise ConfigError("main bound needs s + t < 2")
        if kind == "easy" and t > s:
            raise ConfigError("easy bound needs t <= s")
    results = _map(_incidence_point, points, threads)
    header = incidence.CSV_HEADER.split(",") + ["instance"]
    rows = [r for chunk in results for r in chunk]
    worst, ok, slopes = 0.0, True, {}
    for i, (s, t) in enumerate(pairs):
        mx = []
        for pt, chunk in zip(points, results):
            if pt[4] == i and chunk:
                ratios = [float(r[9]) for r in chunk]
                mx.append((2.0 ** pt[2], max(ratios)))
        if not mx:
            continue
        worst = max(worst, max(m for _, m in mx))
        if len(mx) > 1:
            sl = loglog_slope([a for a, _ in mx], [b for _, b in mx])
            slopes[f"{s},{t}"] = sl
            ok &= sl <= max_slope
    ok &= all(r[10] == "pass" for r in rows)
    return Result(header, rows, ok, worst, {"slopes": slopes})


def run_fourier_decay(p, threads=1):
    spec = _curve(p)
    Rs = [2.0**e for e in p.ints("R_exponents", list(range(11)))]
    n_dir = p.int("directions", 720)
    spread = p.num("max_spread", 4.0)
    prof = spectral.decay_profile(spectral.arclength_measure(spec), Rs, n_dir=n_dir)
    rows = [[R, v, nv] for R, v, nv in prof]
    vals = [r[2] for r in rows]
    ratio = max(vals) / min(vals)
    return Result(["R", "value", "normalized_value"], rows, ratio <= spread, ratio)


def run_l6_decay(p, threads=1):
    spec = _curve(p)
    s = p.num("s", 0.7)
    level = p.int("level", 12)
    Rs = [2.0**e for e in p.ints("R_exponents", list(range(1, 9)))]
    tol = p.num("slope_tol", 0.15)
    xlevel = p.int("check_level", 7)
    xR = p.num("check_R", 8.0)
    budget = p.int("transform_budget", 10**10)
    cm = constructions.cantor_measure_on_curve(spec, s, level)
    prof = spectral.l6_profile(cm.curve, Rs, level=level, budget=budget)
    rows = [[R, v, v / R ** (1 - s)] for R, v in prof]
    slope = loglog_slope([r[0] for r in rows], [r[1] for r in rows])
    coarse = constructions.cantor_measure_on_curve(spec, s, xlevel)
    via, direct, gap = spectral.l6_crosscheck(coarse.grid, xR)
    ok = abs(slope - (1 - s)) <= tol and gap <= 0.05
    return Result(["R", "value", "normalized_value"], rows, ok, max(r[2] for r in rows),
                  {"slope": slope, "target": 1 - s, "crosscheck_gap": gap})


def _energy_measure(kind, level):
    if kind == "gaussian":
        n = 1 << level
        x = (np.arange(n) + 0.5) / n
        sig = 0.1
        dens = np.exp(-((x[:, None] - 0.5) ** 2 + (x[None, :] - 0.5) ** 2) / (2 * sig * sig))
        return measures.normalize_mass(level, np.argwhere(dens >= 0), dens.ravel())
    if kind == "two-cube":
        # midpoints a quarter apart
        return measures.DeltaMeasure(4, [[0, 0], [4, 0]], [0.5, 0.5])
    raise ConfigError(f"unknown measure {kind!r}")


def run_energy_xcheck(p, threads=1):
    kinds = p.cfg.get("measures", ["gaussian", "two-cube"])
    if isinstance(kinds, str):
        kinds = [kinds]
    level = p.int("level", 10)
    omegas = p.nums("omegas", [0.5, 1.0, 1.5])
    rtol = p.num("rtol", 0.1)
    rows, worst = [], 0.0
    for kind in kinds:
        mu = _energy_measure(kind, level)
        for w in omegas:
            a = measures.riesz_energy_spatial(mu, w)
            b = measures.riesz_energy_fourier(mu, w)
            gap = abs(a - b) / abs(a)
            worst = max(worst, gap)
            rows.append([kind, w, a, b, gap])
    return Result(["measure", "omega", "spatial", "fourier", "rel_gap"], rows, worst <= rtol, worst)


def _regularize_one(args):
    i, level, s, B, seed = args
    F, T = constructions.clustered_instance(level, s, B, _seq(seed, 0, level, i))
    _, rep = incidence.regularize_pockets(F, T, s, B)
    return [i, level, rep.size_F, len(rep.regions), rep.sum_weights, rep.c_P1, rep.c_P2,
            rep.incidences_before, rep.incidences_after, rep.c_dominance]


def run_regularize(p, threads=1):
    levels = p.ints("levels", [8, 9])
    n = p.int("instances", 50)
    s, B = p.num("s", 0.5), p.num("B", 2.0)
    cmax = p.num("c_max", 20.0)
    seed = p.int("seed", 0)
    rows = _map(_regularize_one, [(i, k, s, B, seed) for k in levels for i in range(n)], threads)
    worst = max([0.0] + [max(r[5], r[6], r[9]) for r in rows])
    header = ["instance", "level", "size_F", "regions", "sum_weights", "c_P1", "c_P2",
              "incidences_before", "incidences_after", "c_dominance"]
    return Result(header, rows, worst <= cmax, worst)


def _measure_point(args):
    k, i, t, seed, c_accept = args
    ss = _seq(seed, 0, k, i).spawn(2)
    mu = constructions.random_grid_measure(k, ss[0])
    nu = constructions.random_grid_measure(k, ss[1])
    r = incidence.check_bound_measures(mu, nu, t, c_accept=c_accept)
    return [k, i, r.measured, r.envelope, r.ratio, r.verdict]


def run_measure_incidence(p, threads=1):
    t = p.num("t", 1.5)
    levels = p.ints("levels", [6, 7, 8, 9])
    n = p.int("instances", 20)
    c_accept = p.num("C_accept", incidence.C_ACCEPT)
    seed = p.int("seed", 0)
    max_slope = p.num("max_slope", 0.05)
    if not 1 < t < 2:
        raise ConfigError("t must lie in (1, 2)")
    rows = _map(_measure_point, [(k, i, t, seed, c_accept) for k in levels for i in range(n)], threads)
    mx = [max(r[4] for r in rows if r[0] == k) for k in levels] if rows else []
    slope = loglog_slope([2.0**k for k in levels], mx) if len(mx) > 1 else 0.0
    ok = all(r[5] == "pass" for r in rows) and slope <= max_slope
    return Result(["level", "instance", "measured", "envelope", "ratio", "verdict"], rows, ok,
                  max(mx) if mx else 0.0, {"slope": slope})


def conjecture_probe(s, t, levels, seed=0, instances=3):
    """Empirical exponent of the mollified L2 norm for Cantor-type mu (dim t) and sigma (dim s) on the parabola.

    ||mu * sigma||_2^2 at scale delta behaves like delta^-(2 - f); the fitted f
    is reported next to (3s+t)/2, 2s+t-1 and the known value when there is one.
    """
    spec = BUILTINS["parabola"]()
    rows = []
    for k in levels:
        vals = []
        for i in range(instances):
            rng = np.random.default_rng(_seq(seed, 0, k, i))
            mu = _product_cantor(t, k, rng)
            sig = constructions.cantor_measure_on_curve(spec, s, k).grid
            vals.append(measures.mollified_l2(mu, sig))
        rows.append((k, max(vals)))
    slope = loglog_slope([2.0**k for k, _ in rows], [v for _, v in rows]) if len(rows) > 1 else float("nan")
    try:
        low = measures.zeta(s, t)
    except DomainError:
        low = 2 * s + t - 1
    return {"rows": rows, "f_empirical": 2 - slope, "conjecture": measures.conjecture_value(s, t),
            "lower": low, "f_known": measures.f_known(s, t)}


def _product_cantor(t, level, rng):
    """Random-offset product of two Cantor sets of dimension t/2 each, as a unit-mass grid measure."""
    d = t / 2
    segs = constructions.cantor_segments(min(d, 0.999), int(math.ceil(d * level)) + 1)
    h = 2.0**-level
    x = np.floor(segs[:, 0] / h).astype(np.int64)
    shift = rng.integers(0, 4, size=2)
    cells = np.stack(np.meshgrid(x + shift[0], x + shift[1], indexing="ij"), -1).reshape(-1, 2)
    return measures.normalize_mass(level, cells, np.ones(len(cells)))


def run_conjecture_probe(p, threads=1):
    s, t = p.num("s", 0.5), p.num("t", 1.0)
    levels = p.ints("levels", [6, 7, 8])
    rep = conjecture_probe(s, t, levels, p.int("seed", 0), p.int("instances", 3))
    rows = [[k, v] for k, v in rep["rows"]]
    notes = {x: rep[x] for x in ("f_empirical", "conjecture", "lower", "f_known")}
    return Result(["level", "mollified_l2"], rows, True, rep["f_empirical"], notes)


RUNNERS = {
    "sharpness": (run_sharpness, {"tau", "s", "levels", "factor", "slope_tol"}),
    "incidence-sweep": (run_incidence_sweep, {"pairs", "s", "t", "levels", "instances", "tubes", "bound",
                                              "C_accept", "epsilon", "seed", "max_slope"}),
    "fourier-decay": (run_fourier_decay, {"curve", "R_exponents", "directions", "max_spread"}),
    "l6-decay": (run_l6_decay, {"curve", "s", "level", "R_exponents", "slope_tol", "check_level", "check_R",
                                "transform_budget"}),
    "energy-xcheck": (run_energy_xcheck, {"measures", "level", "omegas", "rtol"}),
    "regularize": (run_regularize, {"levels", "instances", "s", "B", "c_max", "seed"}),
    "measure-incidence": (run_measure_incidence, {"t", "levels", "instances", "C_accept", "seed", "max_slope"}),
    "conjecture-probe": (run_conjecture_probe, {"s", "t", "levels", "seed", "instances"}),
}


def run(command, cfg, threads=1):
    if command not in RUNNERS:
        raise ConfigError(f"unknown command {command!r}")
    fn, allowed = RUNNERS[command]
    p = Params(cfg, allowed)
    if "budget" in cfg:
        os.environ["FROSTMAN_LAB_BUDGET"] = str(int(cfg["budget"]))
    try:
        return fn(p, threads)
    except (DomainError, PreconditionError) as e:
        raise ConfigError(str(e)) from e


def main(argv=None):
    ap = argparse.ArgumentParser(prog="frostman-lab", description="Run a numerical experiment.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON or key=value file; omitted means defaults")
    ap.add_argument("--out", help="directory for <command>.csv (default: CSV to stdout)")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    try:
        cfg = {}
        if args.config:
            with open(args.config) as fh:
                cfg = parse_config(fh.read())
        if "command" in cfg and cfg["command"] != args.command:
            raise ConfigError("config command does not match")
        res = run(args.command, cfg, max(1, args.threads))
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    text = res.csv_text()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{args.command}.csv"), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for k, v in res.notes.items():
        print(f"# {k}={v}")
    print(f"{'PASS' if res.passed else 'FAIL'} {args.command} max_ratio={res.max_ratio:.6g}")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
