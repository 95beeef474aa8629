"""Command line front end: ``grushin-mvf run --config FILE``.

The config is an INI file; see the README for the full schema.  Suites run
in dependency order and write ``report.json`` plus CSV files into the output
directory.  Exit status: 0 when every verdict passes, 1 on a failed
verdict, 2 on a configuration or output error.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import autodiff as ad
from .analysis import classify_harmonicity, subharmonicity_certificate
from .gauge import GrushinParams, radial_field
from .identities import run_identities
from .quadrature import (WORKERS_ENV, BallRegion, MeanValueReport, check_mvf,
                         constant_profile)
from .solver import Annulus, SolveProblem, solve_dirichlet
from .surface import Ball, Box, make_surface
from .tangential import SurfaceField, restrict

SUITES = ("identities", "qsigma", "profile", "solve", "mvf", "certificate")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# expressions


_FUNCS = {"sin": ad.sin, "cos": ad.cos, "exp": ad.exp, "sqrt": ad.sqrt, "log": ad.log}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b,
           ast.Mult: lambda a, b: a * b, ast.Div: lambda a, b: a / b}


def compile_expression(text, n):
    """Compile an arithmetic expression in ``x1..xn`` into ``f(xs)``.

    Allowed: numbers, ``x1..xn``, ``pi``, ``e``, ``+ - * / **`` (numeric
    exponents only) and ``sin cos exp sqrt log``.  The compiled function
    works on arrays and on jets alike.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            c = float(node.value)
            return lambda xs: c
        if isinstance(node, ast.Name):
            if node.id in _CONSTS:
                c = _CONSTS[node.id]
                return lambda xs: c
            if node.id.startswith("x") and node.id[1:].isdigit() and 1 <= int(node.id[1:]) <= n:
                k = int(node.id[1:]) - 1
                return lambda xs: xs[k]
            raise ConfigError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda xs: -inner(xs)
            return inner
        if isinstance(node, ast.BinOp):
            left, right = build(node.left), build(node.right)
            if isinstance(node.op, ast.Pow):
                try:
                    p = float(ast.literal_eval(node.right))
                except ValueError:
                    raise ConfigError(f"exponents must be numbers in {text!r}") from None
                return lambda xs: left(xs) ** p
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise ConfigError(f"operator not allowed in {text!r}")
            return lambda xs: op(left(xs), right(xs))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
            fn, arg = _FUNCS[node.func.id], build(node.args[0])
            return lambda xs: fn(arg(xs))
        raise ConfigError(f"unsupported construct in expression {text!r}")

    return build(tree)


def _array_function(expr):
    def f(x):
        x = np.atleast_2d(x)
        return np.broadcast_to(np.asarray(expr([x[:, k] for k in range(x.shape[1])]),
                                          dtype=float), (len(x),)).copy()
    return f


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    params: GrushinParams
    surface_spec: dict
    surface_label: str
    domain: object
    suites: list
    seed: int = 0
    out: str = "."
    workers: int = 1
    identities: dict = field(default_factory=dict)
    qsigma: dict = field(default_factory=dict)
    profile: dict = field(default_factory=dict)
    mvf: dict = field(default_factory=dict)
    field_spec: dict = field(default_factory=dict)
    solve: dict = field(default_factory=dict)
    certificate: dict = field(default_factory=dict)


def _floats(text, what):
    try:
        vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected a comma separated list of numbers, got {text!r}") \
            from None
    return vals


def _get(section, key, conv, default=None, required=False):
    if section is None or key not in section:
        if required:
            raise ConfigError(f"missing key {key!r}")
        return default
    raw = section[key]
    try:
        if conv is bool:
            return section.getboolean(key)
        return conv(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def _grid(section, key, default=None):
    if section is None or key not in section:
        return default
    grid = _floats(section[key], key)
    if not grid:
        raise ConfigError(f"{key} is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"{key} must be strictly increasing")
    if grid[0] <= 0:
        raise ConfigError(f"{key} must contain positive radii")
    return grid


def _surface_spec(sec, n):
    kind = _get(sec, "kind", str, "flat").strip()
    if kind == "flat":
        return {"kind": "flat"}, "flat"
    if kind == "radial-power":
        c = _get(sec, "c", float, required=True)
        m = _get(sec, "m", float, required=True)
        return {"kind": "radial-power", "c": c, "m": m}, f"radial-power c={c:g} m={m:g}"
    if kind == "monomial":
        terms = {}
        for part in _get(sec, "terms", str, required=True).split(","):
            if not part.strip():
                continue
            mono, sep, coef = part.partition(":")
            if not sep:
                raise ConfigError(f"monomial term {part!r} must read 'x1*x2: coefficient'")
            try:
                terms[mono.strip()] = float(coef)
            except ValueError:
                raise ConfigError(f"bad coefficient in {part!r}") from None
        return {"kind": "monomial", "terms": terms}, "monomial " + sec["terms"].strip()
    if kind == "custom":
        text = _get(sec, "u", str, required=True)
        return ({"kind": "custom", "u": compile_expression(text, n), "name": text},
                f"custom u={text}")
    raise ConfigError(f"unknown surface kind {kind!r}")


def _domain(sec, n):
    kind = _get(sec, "domain", str, "ball").strip()
    if kind == "ball":
        return Ball(_get(sec, "radius", float, 1.0))
    if kind == "box":
        lower = _floats(_get(sec, "lower", str, required=True), "lower")
        upper = _floats(_get(sec, "upper", str, required=True), "upper")
        if len(lower) != n or len(upper) != n:
            raise ConfigError(f"box corners need {n} coordinates")
        return Box(tuple(lower), tuple(upper))
    raise ConfigError(f"unknown domain {kind!r}")


def load_config(path, suites_override=None, out_override=None):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sec = lambda name: parser[name] if parser.has_section(name) else None  # noqa: E731
    try:
        p = sec("params")
        params = GrushinParams(_get(p, "n", int, 2), _get(p, "alpha", float, 1.0))
        run = sec("run")
        spec, label = _surface_spec(sec("surface"), params.n)
        domain = _domain(sec("surface"), params.n)
        if suites_override:
            suites = list(suites_override)
        else:
            raw = _get(run, "suites", str, "")
            suites = [s.strip() for s in raw.split(",") if s.strip()]
        bad = [s for s in suites if s not in SUITES]
        if bad:
            raise ConfigError(f"unknown suite(s) {bad}; choose from {list(SUITES)}")
        cfg = RunConfig(
            params=params, surface_spec=spec, surface_label=label, domain=domain,
            suites=suites,
            seed=_get(run, "seed", int, 0),
            out=out_override or _get(run, "out", str, "."),
            workers=_get(run, "workers", int, 1),
        )
        s = sec("identities")
        cfg.identities = {"points": _get(s, "points", int, 100), "tol": _get(s, "tol", float, 1e-8)}
        s = sec("qsigma")
        cfg.qsigma = {"radii": _grid(s, "radii"), "directions": _get(s, "directions", int, 20),
                      "tol": _get(s, "tol", float, 1e-9), "expect": _get(s, "expect", str)}
        m = sec("mvf")
        s = sec("profile")
        default_grid = _grid(m, "r_grid", [0.1, 0.2, 0.3, 0.4, 0.5])
        cfg.profile = {"r_grid": _grid(s, "r_grid", default_grid),
                       "tol": _get(s, "tol", float, 1e-8),
                       "expect_constant": _get(s, "expect_constant", bool)}
        cfg.mvf = {"r_grid": default_grid, "mode": _get(m, "mode", str, "harmonic"),
                   "tol": _get(m, "tol", float, 1e-6), "quad_tol": _get(m, "quad_tol", float)}
        if cfg.mvf["mode"] not in ("harmonic", "subharmonic", "superharmonic"):
            raise ConfigError(f"unknown mvf mode {cfg.mvf['mode']!r}")
        f = sec("field")
        cfg.field_spec = {"kind": _get(f, "kind", str, "constant"),
                          "value": _get(f, "value", float, 1.0),
                          "k": _get(f, "k", float, 2.0),
                          "coef": _get(f, "coef", float, 1.0),
                          "expr": _get(f, "expr", str)}
        if cfg.field_spec["kind"] not in ("constant", "radial", "expression", "solver"):
            raise ConfigError(f"unknown field kind {cfg.field_spec['kind']!r}")
        if cfg.field_spec["kind"] == "expression" and not cfg.field_spec["expr"]:
            raise ConfigError("field kind 'expression' needs 'expr'")
        s = sec("solve")
        cfg.solve = {"N": _get(s, "N", int, 128), "domain": _get(s, "domain", str, "disk"),
                     "radius": _get(s, "radius", float, 1.0),
                     "r_in": _get(s, "r_in", float), "r_out": _get(s, "r_out", float),
                     "boundary": _get(s, "boundary", str, "1")}
        s = sec("certificate")
        cfg.certificate = {"tol": _get(s, "tol", float, 1e-6), "k_max": _get(s, "k_max", int, 10),
                           "expect_overall": _get(s, "expect_overall", bool),
                           "expect_condition_i": _get(s, "expect_condition_i", bool),
                           "expect_condition_ii": _get(s, "expect_condition_ii", bool)}
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    env = os.environ.get(WORKERS_ENV)
    if env is not None:
        try:
            cfg.workers = max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if "mvf" in cfg.suites and cfg.field_spec["kind"] == "solver" and "solve" not in cfg.suites:
        cfg.suites.append("solve")
    return cfg


def _build_surface(cfg):
    try:
        S = make_surface(cfg.params, cfg.surface_spec, cfg.domain)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"surface: {exc}") from None
    radii = set()
    if "profile" in cfg.suites or "mvf" in cfg.suites:
        radii.update(cfg.profile["r_grid"])
    if "mvf" in cfg.suites:
        radii.update(cfg.mvf["r_grid"])
    for r in sorted(radii):
        try:
            BallRegion(S, r)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return S


# ---------------------------------------------------------------------------
# running


def _build_field(cfg, S, solution):
    spec = cfg.field_spec
    kind = spec["kind"]
    if kind == "constant":
        return SurfaceField.constant(spec["value"])
    if kind == "radial":
        k, a = spec["k"], spec["coef"]
        fld = radial_field(cfg.params, lambda r: a * r ** k, lambda r: a * k * r ** (k - 1),
                           lambda r: a * k * (k - 1) * r ** (k - 2), name=f"{a:g}*rho^{k:g}")
        return restrict(fld, S)
    if kind == "expression":
        expr = compile_expression(spec["expr"], cfg.params.n)
        return SurfaceField.from_expression(expr, spec["expr"])
    return solution.field()


def _solve(cfg, S):
    s = cfg.solve
    if cfg.params.n != 2:
        raise ConfigError("the solve suite needs n = 2")
    if s["domain"] == "disk":
        dom = Ball(s["radius"])
    elif s["domain"] == "annulus":
        if s["r_in"] is None or s["r_out"] is None:
            raise ConfigError("annulus needs r_in and r_out")
        dom = Annulus(s["r_in"], s["r_out"])
    else:
        raise ConfigError(f"unknown solve domain {s['domain']!r}")
    g = _array_function(compile_expression(s["boundary"], 2))
    try:
        problem = SolveProblem(S, dom, g, s["N"])
    except ValueError as exc:
        raise ConfigError(f"solve: {exc}") from None
    return solve_dirichlet(problem)


def execute(cfg):
    """Run the selected suites; returns ``(report dict, csv tables, failures)``."""
    report = {"meta": {"n": cfg.params.n, "alpha": cfg.params.alpha,
                       "surface": cfg.surface_label, "seed": cfg.seed,
                       "suites": [s for s in SUITES if s in cfg.suites],
                       "version": __version__}}
    tables = {}
    failures = []
    if not cfg.suites:
        return report, tables, failures
    S = _build_surface(cfg)

    if "identities" in cfg.suites:
        res = run_identities(S, cfg.identities["points"], cfg.seed, cfg.identities["tol"])
        report["identities"] = [{"name": r.name, "max_err": r.max_err, "tol": r.tol,
                                 "passed": r.passed} for r in res]
        failures += [f"identity {r.name}" for r in res if not r.passed]

    if "qsigma" in cfg.suites:
        q = cfg.qsigma
        v = classify_harmonicity(S, q["radii"], q["directions"], q["tol"])
        report["qsigma"] = {"classification": v.classification, "min": v.q_min, "max": v.q_max,
                            "n_samples": v.n_samples, "tol": v.tol}
        if q["expect"] and v.classification != q["expect"]:
            failures.append(f"qsigma classified {v.classification}, expected {q['expect']}")

    profile = None
    if "profile" in cfg.suites or "mvf" in cfg.suites:
        pr = cfg.profile
        profile = constant_profile(S, pr["r_grid"], pr["tol"], workers=cfg.workers)
        report["profile"] = [{"r": r, "c_r": c, "err": e}
                             for r, c, e in zip(profile.r_grid, profile.c_of_r, profile.err)]
        report["C"] = profile.C
        report["profile_summary"] = {"spread": profile.spread, "is_constant": profile.is_constant,
                                     "c_min": profile.c_min,
                                     "c_extrapolated": profile.c_extrapolated,
                                     "converged": profile.converged}
        if pr["expect_constant"] is not None and profile.is_constant != pr["expect_constant"]:
            failures.append(f"profile is_constant={profile.is_constant}")
        if not profile.converged:
            failures.append("profile quadrature did not converge")
        if "mvf" not in cfg.suites:
            tables["profile.csv"] = [
                {"r": r, "c_r": c, "C": profile.C, "M_f_r": "", "f0": "", "verdict": "",
                 "err_est": e} for r, c, e in zip(profile.r_grid, profile.c_of_r, profile.err)]

    solution = None
    if "solve" in cfg.suites:
        solution = _solve(cfg, S)
        report["solve"] = {"N": solution.problem.N, "h": solution.h,
                           "residual": solution.residual, "rhs_norm": solution.rhs_norm,
                           **solution.diagnostics}
        nodes = solution.problem.nodes()
        keep = solution.problem.domain.level(nodes) <= 0
        tables["solution.csv"] = [{"x1": a, "x2": b, "F": f}
                                  for (a, b), f in zip(nodes[keep], solution.F.ravel()[keep])]

    if "mvf" in cfg.suites:
        m = cfg.mvf
        f = _build_field(cfg, S, solution)
        if m["r_grid"] != list(profile.r_grid):
            profile = constant_profile(S, m["r_grid"], cfg.profile["tol"], workers=cfg.workers)
        rep: MeanValueReport = check_mvf(S, f, m["r_grid"], m["mode"], m["tol"], m["quad_tol"],
                                         profile=profile, workers=cfg.workers)
        report["mvf"] = [{"r": r, "M": M, "f0": rep.f_at_0, "verdict": v}
                         for r, M, v in zip(rep.r_grid, rep.M_of_r, rep.verdicts)]
        report["mvf_summary"] = {"mode": rep.mode, "tol": rep.tol, "scale": rep.scale,
                                 "passed": rep.passed, "C": rep.C}
        failures += [f"mvf r={r:g}: {v}" for r, v in rep.failures]
        tables["profile.csv"] = rep.rows()

    if "certificate" in cfg.suites:
        c = cfg.certificate
        cert = subharmonicity_certificate(S, c["tol"], c["k_max"])
        report["certificate"] = cert.to_dict()
        for key, actual in (("expect_overall", cert.overall),
                            ("expect_condition_i", cert.condition_i),
                            ("expect_condition_ii", cert.condition_ii)):
            if c[key] is not None and c[key] != actual:
                failures.append(f"certificate {key[7:]}={actual}")
        if cert.spot_check is False:
            failures.append("certificate spot check found negative q_sigma")

    report["status"] = {"passed": not failures, "failures": failures}
    return report, tables, failures


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


COLUMNS = {"profile.csv": ("r", "c_r", "C", "M_f_r", "f0", "verdict", "err_est"),
           "solution.csv": ("x1", "x2", "F")}


def emit_report(report, tables, out_dir):
    """Write ``report.json`` and the CSV tables; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(_jsonable(report), fh, indent=2)
        fh.write("\n")
    paths.append(path)
    for name, rows in tables.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=COLUMNS[name])
            w.writeheader()
            for row in rows:
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                            for k, v in row.items()})
        paths.append(path)
    return paths


def run(config_path, suites=None, out=None, stdout=None, stderr=None):
    """Run a config; returns the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        cfg = load_config(config_path, suites, out)
        report, tables, failures = execute(cfg)
    except ConfigError as exc:
        print(f"grushin-mvf: configuration error: {exc}", file=stderr)
        return 2
    try:
        paths = emit_report(report, tables, cfg.out)
    except OSError as exc:
        print(f"grushin-mvf: cannot write reports: {exc}", file=stderr)
        return 2
    for p in paths:
        print(f"wrote {p}", file=stdout)
    for f in failures:
        print(f"FAILED {f}", file=stdout)
    return 1 if failures else 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="grushin-mvf",
                                     description="Mean value formulas on Grushin graph surfaces")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run verification suites from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--suite", action="append", choices=SUITES, dest="suites",
                   help="suite to run (repeatable); overrides the config selection")
    r.add_argument("--out", help="output directory (overrides the config)")
    args = parser.parse_args(argv)
    return run(args.config, args.suites, args.out)


if __name__ == "__main__":
    sys.exit(main())
