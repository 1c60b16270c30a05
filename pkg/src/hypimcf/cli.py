"""Scenario runner.

    python -m hypimcf run <file> [--seed S] [--resolution N] [--output DIR] [--quiet]
    python -m hypimcf validate <file>
    python -m hypimcf report <dir>

A scenario is an INI file with sections ``[scenario]``, ``[surface]`` and
optional ``[flow]``, ``[weak]``, ``[checks]``; see ``demos/scenarios``.
``run`` writes ``trace.csv``, ``levelsets/t=*.csv``, ``certificates.txt`` and
``summary.json`` and exits 0 iff every enabled check passes (1 if one fails,
2 on a usage error, 3 when a solver aborts).
"""
from __future__ import annotations

import argparse
import configparser
from dataclasses import asdict, dataclass, field
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .flows import FlowAbort, expanding_sphere, imcf_run
from .funcs import (
    FunctionalTrace,
    hk_deficit,
    minkowski_checks,
    monotonicity_report,
    sharp_constant,
)
from .reflect import (
    certificate_from_report,
    certify_star_shaped,
    cloud_from_graph,
    critical_r_plus,
    waiting_time,
)
from .starshape import (
    PolarGrid,
    area,
    dumbbell,
    geometry,
    gradient_bound_check,
    graph_to_text,
    perturbed_sphere,
    sphere,
)
from .weakflow import (
    AnnulusMesh,
    SolverError,
    interpolation_error,
    minimization_audit,
    offset_sphere_graph,
    offset_sphere_u,
    outer_radius,
    weak_limit,
    weak_trace,
)

log = logging.getLogger("hypimcf")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3

PIPELINES = ("flow", "weak", "certify", "inequalities", "all")

# section -> key -> (type, default); default None means required
SCHEMA = {
    "scenario": {
        "name": (str, None),
        "n": (int, None),
        "pipeline": (str, None),
        "resolution": (int, 257),
        "t_max": (float, None),
        "output_dir": (str, ""),
    },
    "surface": {
        "kind": (str, None),
        "r0": (float, 1.0),
        "amplitude": (float, 0.0),
        "k": (int, 2),
        "radius": (float, 1.5),
        "shift": (float, 0.5),
        "r_bulb": (float, 1.5),
        "r_neck": (float, 0.3),
        "width": (float, 0.2),
        "power": (int, 4),
        "modes": (int, 4),
    },
    "flow": {
        "dt": (float, 1e-3),
        "sample_dt": (float, 0.0),
    },
    "weak": {
        "epsilon_schedule": ("floats", (0.2, 0.1, 0.05, 0.025)),
        "mesh_m": (int, 128),
        "mesh_j": (int, 64),
        "levels": ("floats", ()),
        "level_step": (float, 0.25),
        "max_principle_tol": (str, "strict"),
        "audit_level": (float, 0.0),
    },
    "checks": {
        "tol": (float, 1e-6),
        "monotonicity_tol": (float, 1e-3),
        "expect_jump": (bool, False),
        "closed_form_tol": (float, 2e-3),
    },
}

SURFACES = {
    "sphere": ("r0",),
    "perturbed": ("r0", "amplitude", "k"),
    "offset_sphere": ("radius", "shift"),
    "dumbbell": ("r_bulb", "r_neck", "width", "power"),
    "random": ("r0", "amplitude", "modes"),
}


class ScenarioError(ValueError):
    """Invalid scenario file; the message carries ``file:line`` diagnostics."""


@dataclass
class Scenario:
    name: str
    n: int
    pipeline: str
    resolution: int
    t_max: float
    output_dir: str
    surface: dict
    flow: dict
    weak: dict
    checks: dict
    source: str = ""
    seed: int = 0
    lines: dict = field(default_factory=dict, repr=False)

    def normalized(self):
        d = asdict(self)
        d.pop("lines")
        d.pop("source")
        d["surface"] = {k: self.surface[k] for k in ("kind",) + SURFACES[self.surface["kind"]]}
        return d


def _line_map(text):
    # (section, key) -> 1-based line number
    out = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
            out[(section, None)] = i
        elif "=" in s and section is not None:
            out[(section, s.split("=", 1)[0].strip().lower())] = i
    return out


def _convert(kind, raw):
    if kind == "floats":
        parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    if kind is bool:
        v = raw.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    return kind(raw.strip())


def parse_scenario(text, source="<string>", seed=0, resolution=None):
    """Parse and validate scenario text; raises :class:`ScenarioError`."""
    lines = _line_map(text)

    def where(section, key=None):
        ln = lines.get((section, key)) or lines.get((section, None))
        return f"{source}:{ln}" if ln else source

    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: malformed scenario: {exc}") from None
    values = {}
    for sec in cp.sections():
        if sec.lower() not in SCHEMA:
            raise ScenarioError(f"{where(sec.lower())}: unknown section [{sec}]")
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        present = cp[sec] if cp.has_section(sec) else {}
        for key in present:
            if key not in keys:
                raise ScenarioError(f"{where(sec, key)}: [{sec}] unknown key '{key}'")
        for key, (kind, default) in keys.items():
            if key in present:
                try:
                    values[sec][key] = _convert(kind, present[key])
                except ValueError as exc:
                    raise ScenarioError(f"{where(sec, key)}: [{sec}] {key}: {exc}") from None
            elif default is None:
                raise ScenarioError(f"{where(sec)}: [{sec}] missing required key '{key}'")
            else:
                values[sec][key] = default
    head = values["scenario"]
    if resolution is not None:
        head["resolution"] = int(resolution)
    sc = Scenario(
        name=head["name"],
        n=head["n"],
        pipeline=head["pipeline"],
        resolution=head["resolution"],
        t_max=head["t_max"],
        output_dir=head["output_dir"],
        surface=values["surface"],
        flow=values["flow"],
        weak=values["weak"],
        checks=values["checks"],
        source=source,
        seed=int(seed),
        lines=lines,
    )
    _validate(sc, where)
    return sc


def _validate(sc, where):
    if not 3 <= sc.n <= 7:
        raise ScenarioError(
            f"{where('scenario', 'n')}: [scenario] n = {sc.n} is out of range; "
            "the smoothing results require 3 <= n <= 7"
        )
    if sc.pipeline not in PIPELINES:
        raise ScenarioError(f"{where('scenario', 'pipeline')}: [scenario] pipeline must be one of {PIPELINES}")
    if sc.resolution < 64:
        raise ScenarioError(f"{where('scenario', 'resolution')}: [scenario] resolution must be >= 64")
    if not sc.t_max > 0:
        raise ScenarioError(f"{where('scenario', 't_max')}: [scenario] t_max must be positive")
    kind = sc.surface["kind"]
    if kind not in SURFACES:
        raise ScenarioError(f"{where('surface', 'kind')}: [surface] kind must be one of {tuple(SURFACES)}")
    try:
        g = build_surface(sc)
    except ValueError as exc:
        raise ScenarioError(f"{where('surface')}: [surface] {exc}") from None
    dt = sc.flow["dt"]
    if sc.pipeline in ("flow", "all"):
        if not dt > 0 or not math.isclose(round(sc.t_max / dt) * dt, sc.t_max, rel_tol=1e-9):
            raise ScenarioError(f"{where('flow', 'dt')}: [flow] dt must divide t_max")
    sched = sc.weak["epsilon_schedule"]
    if not sched or any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
        raise ScenarioError(
            f"{where('weak', 'epsilon_schedule')}: [weak] epsilon_schedule must be positive and decreasing"
        )
    if sc.weak["mesh_m"] < 16 or sc.weak["mesh_j"] < 8:
        raise ScenarioError(f"{where('weak')}: [weak] mesh_m >= 16 and mesh_j >= 8 required")
    mp = sc.weak["max_principle_tol"]
    if mp not in ("strict", "interpolation"):
        try:
            float(mp)
        except ValueError:
            raise ScenarioError(
                f"{where('weak', 'max_principle_tol')}: [weak] max_principle_tol must be "
                "'strict', 'interpolation' or a number"
            ) from None
    # the outer radius is sized so that L >= t_max + 1; levels beyond that are rejected
    R_L = outer_radius(g.r_max(), sc.n, sc.t_max)
    L = (sc.n - 1) * (np.log(np.sinh(R_L)) - np.log(np.sinh(g.r_min())))
    bad = [t for t in sc.weak["levels"] if not 0 < t <= L - 1.0]
    if bad:
        raise ScenarioError(f"{where('weak', 'levels')}: [weak] levels must lie in (0, L - 1] = (0, {L - 1:.6g}]")


def build_surface(sc):
    """Initial radial graph of a scenario."""
    s = sc.surface
    grid = PolarGrid(sc.n, sc.resolution)
    kind = s["kind"]
    if kind == "sphere":
        return sphere(grid, s["r0"])
    if kind == "perturbed":
        return perturbed_sphere(grid, s["r0"], s["amplitude"], s["k"])
    if kind == "offset_sphere":
        return offset_sphere_graph(grid, s["radius"], s["shift"])
    if kind == "dumbbell":
        return dumbbell(grid, s["r_bulb"], s["r_neck"], s["width"], s["power"])
    if kind == "random":
        rng = np.random.default_rng(sc.seed)
        k = np.arange(1, s["modes"] + 1)
        c = rng.uniform(-1.0, 1.0, k.size) * s["amplitude"] / k ** 2
        r = s["r0"] + np.cos(np.outer(grid.psi, 2 * k)) @ c
        if np.any(r <= 0):
            raise ValueError("random perturbation makes r nonpositive")
        from .starshape import RadialGraph

        return RadialGraph(grid, r, f"random seed={sc.seed}")
    raise ValueError(f"unknown surface kind {kind!r}")


# --- pipelines ---------------------------------------------------------------------


class Run:
    """Accumulates checks, values and artifacts of one scenario run."""

    def __init__(self, sc, graph):
        self.sc = sc
        self.graph = graph
        self.checks = {}
        self.values = {}
        self.certificates = []
        self.levelsets = {}  # relative path -> text
        self.trace = None
        self.jump_report = []

    def check(self, name, passed, margin, criterion=None, **extra):
        entry = {"passed": bool(passed), "margin": float(margin)}
        if criterion is not None:
            entry["criterion"] = int(criterion)
        entry.update(extra)
        self.checks[name] = entry
        log.info("check %-28s %s margin=%.3e", name, "PASS" if passed else "FAIL", margin)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())


def _is_sphere(sc):
    return sc.surface["kind"] == "sphere"


def pipeline_inequalities(run):
    sc, g = run.sc, run.graph
    tol = sc.checks["tol"]
    for rep in minkowski_checks(g, tol):
        run.check(rep.name, rep.passed, rep.margin, equality_case=rep.equality_case)
    geo = geometry(g)
    run.values["min_H"] = float(geo.H.min())
    if np.all(geo.H > 0):
        d = hk_deficit(g)
        scale = max(1.0, abs(d))
        run.check("hk_deficit", d >= -tol * scale, d, criterion=5)
    else:
        run.values["hk_deficit"] = "not mean-convex"


def pipeline_certify(run):
    sc, g = run.sc, run.graph
    r_minus, r_plus = g.r_min(), g.r_max()
    T = waiting_time(r_minus, r_plus, sc.n)
    run.values.update(r_minus=r_minus, r_plus=r_plus, waiting_time=T)
    # Sigma_0 lies outside B_{r-}, so certify against the midpoint between the
    # smallest r+ the gradient bound allows and r-
    r_crit = critical_r_plus(g.r, geometry(g).grad_r)
    run.values["initial_critical_r_plus"] = r_crit
    if not r_crit < r_minus:
        run.check("initial_star_shaped", False, r_minus - r_crit)
        return
    r_cert = 0.5 * (r_crit + r_minus)
    run.values["initial_certificate_r_plus"] = r_cert
    cert = certify_star_shaped(cloud_from_graph(g, 0.0), np.tanh(0.5 * r_cert))
    run.certificates.append(("Sigma_0", cert))
    run.check("initial_star_shaped", cert.passed, cert.margin)
    gb = certificate_from_report(gradient_bound_check(g, r_cert))
    run.certificates.append(("Sigma_0", gb))
    run.check("initial_gradient_bound", gb.passed, gb.margin)


def pipeline_flow(run, subdir=""):
    sc, g = run.sc, run.graph
    dt = sc.flow["dt"]
    sample = sc.flow["sample_dt"] or None
    snaps = sorted(set(sc.weak["levels"]) | {sc.t_max})
    snaps = [t for t in snaps if t <= sc.t_max and math.isclose(round(t / dt) * dt, t, rel_tol=1e-9)]
    state = imcf_run(g, sc.t_max, dt=dt, sample_dt=sample, snapshots=snaps)
    trace = state.history
    run.trace = trace
    for t, snap in sorted(state.snapshots.items()):
        run.levelsets[f"{subdir}t={t:.6f}.csv"] = graph_to_text(snap)
    run.values["flow_substeps"] = state.substeps
    run.values["flow_final_r_min"] = state.graph.r_min()
    run.values["flow_final_r_max"] = state.graph.r_max()
    Q = trace.column("Q")
    A = trace.column("area")
    t = trace.column("t")
    c = sharp_constant(sc.n)
    if _is_sphere(sc):
        r_exact = expanding_sphere(sc.surface["r0"], sc.n, sc.t_max)
        err = float(np.max(np.abs(state.graph.r - r_exact)))
        run.values["flow_r_final"] = float(state.graph.r[0])
        run.values["flow_r_exact"] = r_exact
        run.check("sphere_radius", err <= 1e-5, 1e-5 - err, criterion=2, error=err)
        drift = float(np.max(np.abs(A * np.exp(-t) / A[0] - 1.0)))
        run.check("area_exp_drift", drift < 1e-4, 1e-4 - drift, criterion=2, drift=drift)
        qerr = float(np.max(np.abs(Q - c)))
        run.check("Q_constant", qerr <= sc.checks["tol"] * c, sc.checks["tol"] * c - qerr, criterion=2,
                  error=qerr)
        return
    tol = sc.checks["monotonicity_tol"]
    rep = monotonicity_report(trace, tol)
    run.values["p_window_end"] = rep.p_window_end
    for name in sorted(rep.checks):
        margins = rep.checks[name]
        worst = float(np.min(margins)) if margins else 0.0
        run.check(name, worst >= -tol, worst, criterion=6, pairs=len(margins))
    run.check("Q_final_above_sharp", Q[-1] >= c - tol, float(Q[-1] - c), criterion=6)
    run.check("Q_initial_strictly_above", Q[0] > c, float(Q[0] - c), criterion=6)


def _mp_tol(sc, mesh):
    spec = sc.weak["max_principle_tol"]
    if spec == "strict":
        return None
    if spec == "interpolation":
        return interpolation_error(mesh)
    return float(spec)


def _levels(sc, L):
    lv = sc.weak["levels"]
    if lv:
        return sorted(lv)
    step = sc.weak["level_step"]
    k = np.arange(1, int(np.floor(sc.t_max / step + 1e-9)) + 1)
    return [float(x) for x in np.round(k * step, 12) if x <= L - 1.0]


def pipeline_weak(run):
    sc, g = run.sc, run.graph
    n = sc.n
    r_minus, r_plus = g.r_min(), g.r_max()
    T = waiting_time(r_minus, r_plus, n)
    R_L = outer_radius(r_plus, n, sc.t_max)
    mesh = AnnulusMesh(g, R_L, sc.weak["mesh_m"], sc.weak["mesh_j"])
    mp_tol = _mp_tol(sc, mesh)
    levels = _levels(sc, mesh.L)
    res = weak_limit(mesh, sc.weak["epsilon_schedule"], levels=levels, mp_tol=mp_tol)
    run.values.update(R_L=R_L, L=mesh.L, waiting_time=T, r_minus=r_minus, r_plus=r_plus,
                      cauchy=res.cauchy, jump_delta=res.delta)
    worst_mp = max(f.max_principle_violation for f in res.fields)
    limit = 1e-12 * max(1.0, mesh.L) if mp_tol is None else mp_tol
    run.check("max_principle", worst_mp <= limit, limit - worst_mp, criterion=7 if mp_tol is None else None,
              violation=worst_mp, tolerance=limit)
    run.check("cauchy_decreasing", res.cauchy_decreasing,
              float(min(a - b for a, b in zip(res.cauchy, res.cauchy[1:]))) if len(res.cauchy) > 1 else 0.0)
    if sc.surface["kind"] in ("sphere", "offset_sphere"):
        if sc.surface["kind"] == "sphere":
            radius, shift = sc.surface["r0"], 0.0
        else:
            radius, shift = sc.surface["radius"], sc.surface["shift"]
        r = mesh.node_radius()
        exact = offset_sphere_u(r, mesh.psi[None, :], radius, shift, n)
        mask = res.u <= mesh.L - 1.0
        err = float(np.max(np.abs(res.u - exact)[mask]))
        tol = sc.checks["closed_form_tol"]
        run.check("closed_form_limit", err <= tol, tol - err, criterion=7, error=err)
    rho_plus = float(np.tanh(0.5 * r_plus))
    after, before = [], []
    for t in levels:
        ls = res.level_sets[t]
        name = f"t={t:.6f}.csv"
        run.levelsets[name] = graph_to_text(ls.graph) if ls.graph is not None else ls.cloud.to_text()
        cert = certify_star_shaped(ls.cloud, rho_plus)
        run.certificates.append((f"level t={t:.6f}", cert))
        entry = {"t": t, "star_shaped": cert.passed, "star_margin": cert.margin}
        if ls.graph is not None:
            gb = certificate_from_report(gradient_bound_check(ls.graph, r_plus))
            run.certificates.append((f"level t={t:.6f}", gb))
            entry.update(gradient_bound=gb.passed, gradient_margin=gb.margin)
        else:
            entry.update(gradient_bound=False, gradient_margin=-math.inf)
        (after if t > T else before).append(entry)
    run.values["levels_after_T"] = after
    run.values["levels_before_T"] = before
    if after:
        ok = all(e["star_shaped"] and e["gradient_bound"] for e in after)
        margin = min(min(e["star_margin"], e["gradient_margin"]) for e in after)
        first = after[0]
        run.check("star_shaped_after_T", ok, margin, criterion=8 if sc.checks["expect_jump"] else 4,
                  first_level=first["t"], first_level_star_shaped=first["star_shaped"])
    else:
        run.check("star_shaped_after_T", False, -math.inf, criterion=4, reason="no level beyond T")
    if T > 0:
        run.check("contrast_level_before_T", bool(before), float(len(before)), criterion=4)
    run.jump_report = res.jump_report
    jumped = any(e["area_plus"] < e["area"] for e in res.jump_report)
    if sc.checks["expect_jump"]:
        run.check("jump_detected", jumped, float(len(res.jump_report)), criterion=8)
    else:
        run.values["jump_detected"] = jumped
    # variational audit at one regular level
    t_audit = sc.weak["audit_level"] or next((t for t in levels if res.level_sets[t].graph is not None), None)
    if t_audit is not None:
        rep = minimization_audit(res.field, t_audit)
        worst = min(m for _, m in rep.competitors.values())
        run.check("minimization_audit", rep.passed, worst + rep.tol, level=t_audit, tolerance=rep.tol)
    if run.trace is None:
        run.trace = weak_trace(res, [0.0] + [t for t in levels if res.level_sets[t].graph is not None])


def execute(sc):
    g = build_surface(sc)
    run = Run(sc, g)
    run.values["initial_area"] = area(g)
    p = sc.pipeline
    if p in ("inequalities", "all"):
        pipeline_inequalities(run)
    if p in ("certify", "all"):
        pipeline_certify(run)
    if p == "flow":
        pipeline_flow(run)
    if p == "all":
        if np.all(geometry(g).H > 0):
            pipeline_flow(run, subdir="flow/")
        else:
            run.values["flow"] = "skipped: initial surface not mean-convex"
    if p in ("weak", "all"):
        pipeline_weak(run)
    return run


# --- artifacts ---------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return x


def summary_dict(run):
    return _jsonable({
        "schema": 1,
        "version": __version__,
        "scenario": run.sc.normalized(),
        "passed": run.passed,
        "checks": run.checks,
        "values": run.values,
        "jump_report": run.jump_report,
    })


def write_artifacts(run, out):
    out = Path(out)
    (out / "levelsets").mkdir(parents=True, exist_ok=True)
    trace = run.trace if run.trace is not None else FunctionalTrace(run.sc.n)
    if len(trace) == 0:
        trace.record(0.0, run.graph)
    (out / "trace.csv").write_text(trace.to_csv())
    for name, text in sorted(run.levelsets.items()):
        path = out / "levelsets" / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    blocks = [f"# {label}\n{cert.to_text()}" for label, cert in run.certificates]
    (out / "certificates.txt").write_text("\n".join(blocks))
    (out / "summary.json").write_text(json.dumps(summary_dict(run), indent=2, sort_keys=True) + "\n")


# --- entry points ----------------------------------------------------------------


def _load(path, seed=0, resolution=None):
    p = Path(path)
    if not p.is_file():
        raise ScenarioError(f"{path}: no such scenario file")
    return parse_scenario(p.read_text(), str(p), seed=seed, resolution=resolution)


def cmd_run(args):
    sc = _load(args.file, args.seed, args.resolution)
    out = args.output or sc.output_dir or str(Path("out") / sc.name)
    try:
        run = execute(sc)
    except (FlowAbort, SolverError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORT
    write_artifacts(run, out)
    if not args.quiet:
        _print_checks(run.checks)
        print(f"{'PASS' if run.passed else 'FAIL'}: {sc.name} -> {out}")
    return EXIT_OK if run.passed else EXIT_FAIL


def cmd_validate(args):
    sc = _load(args.file, args.seed, args.resolution)
    if not args.quiet:
        print(json.dumps(_jsonable(sc.normalized()), indent=2, sort_keys=True))
    return EXIT_OK


def _print_checks(checks):
    for name in sorted(checks):
        c = checks[name]
        crit = f"[{c['criterion']}]" if "criterion" in c else ""
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name:<28s} margin={c['margin']}  {crit}")


def cmd_report(args):
    path = Path(args.dir) / "summary.json"
    if not path.is_file():
        print(f"error: {path} not found", file=sys.stderr)
        return EXIT_USAGE
    data = json.loads(path.read_text())
    if not args.quiet:
        print(f"scenario: {data['scenario']['name']} (pipeline {data['scenario']['pipeline']})")
        _print_checks(data["checks"])
        for e in data.get("jump_report", []):
            print(f"jump at t={e['t']}: |Sigma_t|={e['area']} |Sigma_t^+|={e['area_plus']}")
        print("PASS" if data["passed"] else "FAIL")
    return EXIT_OK if data["passed"] else EXIT_FAIL


def build_parser():
    ap = argparse.ArgumentParser(prog="hypimcf", description="Weak IMCF scenario runner")
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized surfaces (default 0)")
    common.add_argument("--resolution", type=int, default=None, help="override polar grid nodes")
    common.add_argument("--quiet", action="store_true", help="suppress progress and check listing")
    sub = ap.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", parents=[common], help="run a scenario and write artifacts")
    r.add_argument("file")
    r.add_argument("--output", default=None, help="output directory (overrides output_dir)")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", parents=[common], help="parse and validate a scenario")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)
    p = sub.add_parser("report", parents=[common], help="summarize a finished run directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
