"""Parametric flows of axisymmetric radial graphs.

A normal speed ``F`` moves a radial graph by ``dr/dt = F W`` where
``W = v / sinh(r) = sqrt(1 + r'^2 / sinh(r)^2)``. IMCF uses ``F = 1/H`` and
mean curvature flow ``F = -H``. Time stepping is classical RK4; each requested
step is split into substeps obeying the parabolic restriction

    IMCF: dt <= c h^2 min(H^2 sinh(r)^2)
    MCF:  dt <= c h^2 min(sinh(r)^2)

which is the explicit diffusion limit for the linearised equations.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .funcs import FunctionalTrace
from .starshape import _geometry_arrays, area

__all__ = [
    "FlowAbort",
    "FlowState",
    "SmoothingMonitor",
    "MCFRun",
    "imcf_speed",
    "mcf_speed",
    "stable_dt",
    "imcf_step",
    "imcf_run",
    "expanding_sphere",
    "expanding_sphere_u",
    "mcf_sphere",
    "monitor_value",
    "mcf_run",
]


class FlowAbort(RuntimeError):
    """Raised when a parametric flow leaves its range of validity."""


@dataclass
class FlowState:
    graph: object
    t: float = 0.0
    dt: float = 1e-3
    history: FunctionalTrace | None = None
    substeps: int = 0


def _slant(r, dr):
    s = np.sinh(r)
    return np.sqrt(1.0 + (dr / s) ** 2)


def imcf_speed(r, grid, h_floor=0.0):
    """``dr/dt`` for IMCF together with ``H``; aborts when ``H <= h_floor``."""
    if np.any(r <= 0.0) or not np.all(np.isfinite(r)):
        raise FlowAbort("graph degenerated (r <= 0 or non-finite)")
    dr, _, _, H, _, _ = _geometry_arrays(r, grid)
    if np.any(H <= h_floor):
        raise FlowAbort(f"mean-convexity lost: min H = {H.min():.3e}")
    return _slant(r, dr) / H, H


def mcf_speed(r, grid):
    if np.any(r <= 0.0) or not np.all(np.isfinite(r)):
        raise FlowAbort("graph degenerated (r <= 0 or non-finite); epsilon_max too large")
    dr, _, _, H, _, _ = _geometry_arrays(r, grid)
    return -_slant(r, dr) * H, H


def stable_dt(g, kind="imcf", c=0.25):
    """Largest substep allowed by the parabolic restriction."""
    h = g.grid.h
    s = np.sinh(g.r)
    if kind == "imcf":
        _, _, _, H, _, _ = _geometry_arrays(g.r, g.grid)
        if np.any(H <= 0.0):
            raise FlowAbort(f"mean-convexity lost: min H = {H.min():.3e}")
        return float(c * h * h * np.min(H * H * s * s))
    if kind == "mcf":
        return float(c * h * h * np.min(s * s))
    raise ValueError(f"unknown flow kind {kind!r}")


def _rk4(r, dt, speed):
    k1 = speed(r)
    k2 = speed(r + 0.5 * dt * k1)
    k3 = speed(r + 0.5 * dt * k2)
    k4 = speed(r + dt * k3)
    return r + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_blowup(r, grid, limit=1e6):
    dr, _, _, _, _, _ = _geometry_arrays(r, grid)
    if not np.all(np.isfinite(dr)) or np.max(np.abs(dr)) > limit:
        raise FlowAbort("blow-up of |dr/dpsi|")


def imcf_step(state):
    """One RK4 step of size ``state.dt`` (no substepping)."""
    g = state.graph
    grid = g.grid
    r = _rk4(np.array(g.r), state.dt, lambda x: imcf_speed(x, grid)[0])
    _check_blowup(r, grid)
    if np.any(r <= 0.0):
        raise FlowAbort("graph degenerated (r <= 0)")
    return replace(state, graph=g.with_r(r), t=state.t + state.dt, substeps=state.substeps + 1)


def imcf_run(graph, t_max, dt=1e-3, sample_dt=None, cfl=0.25, record=True, snapshots=None):
    """Integrate IMCF to ``t_max``.

    Each step of size ``dt`` is split into ``ceil(dt / stable_dt)`` equal RK4
    substeps. When ``record`` is set a trace row is stored every
    ``sample_dt`` (default: every step). ``snapshots`` may list times at which
    the graph is kept; they are returned in ``state.history.snapshots``.
    """
    nsteps = int(round(t_max / dt))
    if not math.isclose(nsteps * dt, t_max, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("t_max must be a multiple of dt")
    every = 1 if sample_dt is None else max(1, int(round(sample_dt / dt)))
    trace = FunctionalTrace(graph.n) if record else None
    snap_steps = {int(round(s / dt)): s for s in (snapshots or [])}
    kept = {}
    if record:
        trace.record(0.0, graph)
    if 0 in snap_steps:
        kept[snap_steps[0]] = graph
    state = FlowState(graph, 0.0, dt, trace)
    grid = graph.grid
    for step in range(1, nsteps + 1):
        m = max(1, math.ceil(dt / stable_dt(state.graph, "imcf", cfl)))
        sub = dt / m
        r = np.array(state.graph.r)
        for _ in range(m):
            r = _rk4(r, sub, lambda x: imcf_speed(x, grid)[0])
        _check_blowup(r, grid)
        state = replace(state, graph=state.graph.with_r(r), t=step * dt, substeps=state.substeps + m)
        if record and (step % every == 0 or step == nsteps):
            trace.record(state.t, state.graph)
        if step in snap_steps:
            kept[snap_steps[step]] = state.graph
    if trace is not None:
        trace.snapshots = kept
    state.snapshots = kept
    return state


def expanding_sphere(r0, n, t):
    """Radius at time ``t`` of the slice starting at ``r0``: ``sinh r = e^(t/(n-1)) sinh r0``."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    return float(np.arcsinh(np.exp(t / (n - 1.0)) * np.sinh(r0)))


def expanding_sphere_u(r, r0, n):
    """Arrival time ``u(r) = (n-1) log(sinh r / sinh r0)`` of the expanding slice."""
    r = np.asarray(r, dtype=float)
    return (n - 1.0) * (np.log(np.sinh(r)) - np.log(np.sinh(r0)))


def mcf_sphere(r0, n, eps):
    """Shrinking slice under MCF: ``cosh r = e^(-(n-1) eps) cosh r0`` (NaN after extinction)."""
    c = np.exp(-(n - 1.0) * eps) * np.cosh(r0)
    return float(np.arccosh(c)) if c >= 1.0 else float("nan")


@dataclass(frozen=True)
class SmoothingMonitor:
    k: int
    epsilon: float
    value: float


def monitor_value(g, eps, k):
    """``int 1 / (e^((n-1) eps) H + 1/k) dsigma``."""
    _, _, _, H, elem, _ = _geometry_arrays(g.r, g.grid)
    return g.grid.integrate(elem / (np.exp((g.n - 1) * eps) * H + 1.0 / k))


def _inverse_H(g):
    _, _, _, H, elem, _ = _geometry_arrays(g.r, g.grid)
    return g.grid.integrate(elem / H) if np.all(H > 0) else float("inf")


@dataclass
class MCFRun:
    monitors: list = field(default_factory=list)
    epsilon: list = field(default_factory=list)
    inverse_H: list = field(default_factory=list)
    area: list = field(default_factory=list)
    graph: object = None

    def values(self, k):
        return np.array([m.value for m in self.monitors if m.k == k])


def mcf_run(graph, epsilon_max=0.05, k_list=(1, 10, 100), dt=None, cfl=0.25):
    """Short-time mean curvature flow with smoothing monitors.

    Monitors for every ``k`` are recorded at ``epsilon = 0`` and after every
    step. ``dt`` defaults to the parabolic limit of the initial graph.
    """
    grid = graph.grid
    _, _, _, H0, _, _ = _geometry_arrays(graph.r, grid)
    if np.any(H0 < 0.0):
        raise FlowAbort("initial graph is not mean-convex")
    out = MCFRun()

    def rec(g, eps):
        out.epsilon.append(eps)
        out.inverse_H.append(_inverse_H(g))
        out.area.append(area(g))
        for k in k_list:
            out.monitors.append(SmoothingMonitor(int(k), eps, monitor_value(g, eps, k)))

    rec(graph, 0.0)
    step = stable_dt(graph, "mcf", cfl) if dt is None else dt
    nsteps = max(1, math.ceil(epsilon_max / step))
    step = epsilon_max / nsteps
    r = np.array(graph.r)
    g = graph
    for i in range(1, nsteps + 1):
        r = _rk4(r, step, lambda x: mcf_speed(x, grid)[0])
        _check_blowup(r, grid)
        if np.any(r <= 0.0):
            raise FlowAbort("graph degenerated (r <= 0); epsilon_max too large")
        g = graph.with_r(r)
        _, H = mcf_speed(r, grid)
        if np.any(H <= 0.0):
            raise FlowAbort("min H <= 0 for positive epsilon")
        rec(g, i * step)
    out.graph = g
    return out
