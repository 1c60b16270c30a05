"""Integral functionals of star-shaped hypersurfaces and their monotonicity.

With ``w = w_{n-1}`` the area of the unit sphere S^{n-1}, ``A = |Sigma|``,
``V = int_Omega f`` and ``f = cosh r``:

* ``Q = A^((2-n)/(n-1)) (int fH - n(n-1) V)``
* ``P = A^((2-n)/(n-1)) (int fH - (n-1) w^(-1/(n-1)) A^(n/(n-1)))``
* Heintze-Karcher deficit ``(n-1) int f/H - n V``
* Minkowski lower bounds for ``int fH / ((n-1) w)``

On slices ``r = r0`` all deficits vanish and ``Q = P = (n-1) w^(1/(n-1))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
import io

import numpy as np
from scipy.integrate import trapezoid

from .starshape import (
    area,
    bulk_potential,
    geometry,
    inverse_curvature_integral,
    support_integral,
    unit_sphere_area,
    weighted_total_curvature,
)

__all__ = [
    "TRACE_COLUMNS",
    "FunctionalTrace",
    "InequalityReport",
    "MonotonicityReport",
    "sharp_constant",
    "hk_deficit",
    "evaluate_Q",
    "evaluate_P",
    "q_from",
    "p_from",
    "minkowski_checks",
    "monotonicity_report",
    "calibrate_tolerance",
    "trace_row",
]

TRACE_COLUMNS = (
    "t", "area", "bulk", "fH", "fOverH", "support", "Q", "P", "hk_deficit", "q", "p", "maxDr",
)


def sharp_constant(n):
    """``(n-1) w_{n-1}^(1/(n-1))``, the value of ``Q`` and ``P`` on slices."""
    return (n - 1) * unit_sphere_area(n - 1) ** (1.0 / (n - 1))


def q_from(n, A, fH, V):
    return fH - n * (n - 1) * V


def p_from(n, A, fH):
    w = unit_sphere_area(n - 1)
    return fH - (n - 1) * w ** (-1.0 / (n - 1)) * A ** (n / (n - 1))


def _scale(n, A):
    return A ** ((2.0 - n) / (n - 1))


def evaluate_Q(g):
    n = g.n
    A = area(g)
    return _scale(n, A) * q_from(n, A, weighted_total_curvature(g), bulk_potential(g))


def evaluate_P(g):
    n = g.n
    A = area(g)
    return _scale(n, A) * p_from(n, A, weighted_total_curvature(g))


def hk_deficit(g, h_floor=1e-8):
    """``(n-1) int f/H - n int_Omega f``; ``inf`` when ``H`` touches zero.

    Raises ``ValueError`` if the surface is not mean-convex.
    """
    inv = inverse_curvature_integral(g, "potential", h_floor=h_floor)
    if np.isinf(inv):
        return float("inf")
    return (g.n - 1) * inv - g.n * bulk_potential(g)


def trace_row(t, g, H=None):
    """One :class:`FunctionalTrace` row for the surface ``g`` at time ``t``.

    ``H`` overrides the curvature from :func:`~hypimcf.starshape.geometry`
    (weak traces pass ``|grad u|``); it only affects the ``fOverH`` column
    and the deficit.
    """
    n = g.n
    A = area(g)
    V = bulk_potential(g)
    fH = weighted_total_curvature(g)
    geo = geometry(g)
    if H is None:
        try:
            fOverH = inverse_curvature_integral(g)
        except ValueError:
            fOverH = float("nan")
    else:
        H = np.asarray(H, dtype=float)
        fOverH = float("inf") if np.any(H < 1e-8) else g.grid.integrate(np.cosh(g.r) * geo.area_element / H)
    hk = (n - 1) * fOverH - n * V
    q = q_from(n, A, fH, V)
    p = p_from(n, A, fH)
    s = _scale(n, A)
    return {
        "t": float(t),
        "area": A,
        "bulk": V,
        "fH": fH,
        "fOverH": fOverH,
        "support": support_integral(g),
        "Q": s * q,
        "P": s * p,
        "hk_deficit": hk,
        "q": q,
        "p": p,
        "maxDr": float(geo.grad_r.max()),
    }


@dataclass
class FunctionalTrace:
    n: int
    rows: list = field(default_factory=list)

    def append(self, row):
        if self.rows and row["t"] < self.rows[-1]["t"]:
            raise ValueError("trace rows must be time-ordered")
        if not row["area"] > 0:
            raise ValueError("area must be positive")
        self.rows.append(dict(row))

    def record(self, t, g, H=None):
        self.append(trace_row(t, g, H))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([row[name] for row in self.rows], dtype=float)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.rows:
            w.writerow([repr(float(row[c])) for c in TRACE_COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, n):
        rd = csv.DictReader(io.StringIO(text))
        tr = cls(n)
        for row in rd:
            tr.append({k: float(v) for k, v in row.items()})
        return tr


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    equality_case: bool
    tol: float

    def to_text(self):
        return "\n".join(f"{k}: {float(v)!r}" if isinstance(v, float) else f"{k}: {v}"
                         for k, v in self.__dict__.items()) + "\n"


def _report(name, lhs, rhs, tol, is_sphere):
    margin = lhs - rhs
    return InequalityReport(
        name=name,
        lhs=float(lhs),
        rhs=float(rhs),
        margin=float(margin),
        passed=bool(margin >= -tol),
        equality_case=bool(is_sphere and abs(margin) < tol),
        tol=float(tol),
    )


def minkowski_checks(g, tol=1e-6):
    """Volumetric and pure-area Minkowski inequalities.

    Both share the left side ``int fH / ((n-1) w)``. The equality flag is set
    when the margin is below ``tol`` (relative to the left side) and the
    graph is a slice.
    """
    n = g.n
    w = unit_sphere_area(n - 1)
    A = area(g)
    lhs = weighted_total_curvature(g) / ((n - 1) * w)
    base = (A / w) ** ((n - 2.0) / (n - 1))
    rhs_vol = base + n / w * bulk_potential(g)
    rhs_area = base + (A / w) ** (n / (n - 1.0))
    is_sphere = bool(np.ptp(g.r) == 0.0)
    scale = max(abs(lhs), 1e-300)
    return (
        _report("minkowski_volume", lhs, rhs_vol, tol * scale, is_sphere),
        _report("minkowski_area", lhs, rhs_area, tol * scale, is_sphere),
    )


@dataclass
class MonotonicityReport:
    verdict: str  # "pass", "fail" or "no_verdict"
    tol: float
    checks: dict = field(default_factory=dict)  # name -> list of margins per pair
    failures: list = field(default_factory=list)  # (check, i, i+1, margin)
    p_window_end: float | None = None

    @property
    def passed(self):
        return self.verdict == "pass"

    def worst(self, name):
        m = self.checks.get(name, [])
        return float(np.min(m)) if len(m) else float("nan")

    def to_text(self):
        lines = [f"verdict: {self.verdict}", f"tol: {self.tol!r}"]
        for name in sorted(self.checks):
            lines.append(f"{name}_worst_margin: {float(self.worst(name))!r}")
            lines.append(f"{name}_pairs: {len(self.checks[name])}")
        lines.append(f"p_window_end: {self.p_window_end!r}")
        for name, i, j, m in self.failures:
            lines.append(f"failure: {name} rows {i}-{j} margin {float(m)!r}")
        return "\n".join(lines) + "\n"


def monotonicity_report(trace, tol):
    """Row-pair checks along a flow trace.

    (a) ``Q`` nonincreasing; (b) bulk growth ``V(t2) >= e^(n dt/(n-1)) V(t1)``;
    (c) ``fH(t2) - fH(t1) <= int (2 int phi + (n-2)/(n-1) fH) ds`` with the
    trapezoid rule in time; (d) ``P`` nonincreasing while
    ``(n/w) V < (A/w)^(n/(n-1))``, stopping at the first row where that
    condition fails. ``tol`` is absolute for (a) and (d) and relative to the
    compared magnitudes for (b) and (c). Stored margins are raw; a pair
    fails when its margin is below ``-tol``.
    """
    if len(trace) < 3:
        return MonotonicityReport("no_verdict", float(tol))
    n = trace.n
    w = unit_sphere_area(n - 1)
    t = trace.column("t")
    A = trace.column("area")
    V = trace.column("bulk")
    fH = trace.column("fH")
    phi = trace.column("support")
    Q = trace.column("Q")
    P = trace.column("P")
    rep = MonotonicityReport("pass", float(tol))
    qa, qb, qc, qd = [], [], [], []
    window_open = True
    for i in range(len(t) - 1):
        dt = t[i + 1] - t[i]
        qa.append(Q[i] - Q[i + 1])
        grow = np.exp(n * dt / (n - 1)) * V[i]
        qb.append((V[i + 1] - grow) / grow)
        integrand = 2.0 * phi + (n - 2.0) / (n - 1) * fH
        bound = trapezoid(integrand[i : i + 2], t[i : i + 2])
        qc.append((fH[i] + bound - fH[i + 1]) / fH[i + 1])
        if window_open:
            cond = lambda k: n / w * V[k] < (A[k] / w) ** (n / (n - 1.0))
            if cond(i) and cond(i + 1):
                qd.append(P[i] - P[i + 1])
            else:
                window_open = False
                rep.p_window_end = float(t[i])
    rep.checks = {"Q_nonincreasing": qa, "bulk_growth": qb, "fH_growth": qc, "P_nonincreasing": qd}
    for name, margins in rep.checks.items():
        for i, m in enumerate(margins):
            if m < -tol:
                rep.failures.append((name, i, i + 1, float(m)))
    if rep.failures:
        rep.verdict = "fail"
    return rep


def calibrate_tolerance(noise_levels, factor=10.0, floor=0.0):
    """``factor`` times the largest measured noise level, at least ``floor``."""
    noise = float(np.max(np.abs(np.asarray(noise_levels, dtype=float))))
    return max(factor * noise, floor)
