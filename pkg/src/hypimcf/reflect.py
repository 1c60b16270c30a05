"""Reflection certificates for level sets in the Poincare ball.

The pair test in :func:`certify_star_shaped` is the discrete form of the
Lipschitz estimate obtained from bisecting inversions: for level-set points
``x1 = rho1 theta1`` and ``x2 = rho2 theta2`` with ``rho1 < rho2`` outside
``B_{rho+}`` one needs

    rho2 - rho1 <= k(rho+, rho1, rho2) |theta2 - theta1|

with ``k`` from :func:`hypimcf.hypgeo.reflection_threshold`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hypgeo import SphereInversion, invert, r_to_rho, rho_to_r
from .starshape import RadialGraph, gradient_bound_check, support_bound

__all__ = [
    "PointCloud",
    "Certificate",
    "certify_star_shaped",
    "waiting_time",
    "critical_r_plus",
    "comparison_check",
    "AnalyticRadialField",
    "rigidity_probe",
    "RigidityReport",
    "certificate_from_report",
    "cloud_from_graph",
    "axisymmetric_directions",
]

CERT_KINDS = ("star_shaped", "gradient_bound", "comparison", "waiting_time")


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    t: float = 0.0
    label: str = ""

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        if np.any(np.linalg.norm(pts, axis=1) >= 1.0):
            raise ValueError("point cloud must lie in the open unit ball")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def rho(self):
        return np.linalg.norm(self.points, axis=1)

    def to_text(self):
        n = self.points.shape[1]
        lines = [f"t={float(self.t)!r},n={n},points={len(self)}"]
        lines.append(",".join(f"x{k}" for k in range(n)))
        for p in self.points:
            lines.append(",".join(repr(float(c)) for c in p))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, label=""):
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        header = dict(item.split("=") for item in lines[0].split(","))
        rows = np.array([[float(c) for c in ln.split(",")] for ln in lines[2:]])
        if rows.shape != (int(header["points"]), int(header["n"])):
            raise ValueError("point count or dimension does not match header")
        return cls(rows, float(header["t"]), label)


@dataclass(frozen=True)
class Certificate:
    kind: str
    passed: bool
    margin: float
    worst_pair: tuple | None = None
    worst_node: int | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CERT_KINDS:
            raise ValueError(f"unknown certificate kind {self.kind!r}")

    def to_text(self):
        lines = [f"kind: {self.kind}", f"passed: {str(self.passed).lower()}", f"margin: {float(self.margin)!r}"]
        if self.worst_pair is not None:
            lines.append(f"worst_pair: {self.worst_pair[0]},{self.worst_pair[1]}")
        if self.worst_node is not None:
            lines.append(f"worst_node: {self.worst_node}")
        for key in sorted(self.details):
            val = self.details[key]
            lines.append(f"{key}: {float(val)!r}" if isinstance(val, float) else f"{key}: {val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kv = {}
        for ln in text.strip().splitlines():
            key, _, val = ln.partition(":")
            kv[key.strip()] = val.strip()
        pair = None
        if "worst_pair" in kv:
            a, b = kv.pop("worst_pair").split(",")
            pair = (int(a), int(b))
        node = int(kv.pop("worst_node")) if "worst_node" in kv else None
        kind = kv.pop("kind")
        passed = kv.pop("passed") == "true"
        margin = float(kv.pop("margin"))
        details = {}
        for k, v in kv.items():
            try:
                details[k] = float(v) if any(ch in v for ch in ".einf") else int(v)
            except ValueError:
                details[k] = v
        return cls(kind, passed, margin, pair, node, details)


def cloud_from_graph(g, t=0.0, directions=None):
    """Ball-model image of a radial graph.

    By default only the meridian ``rho (cos psi, sin psi, 0, ...)`` is used;
    ``directions`` may supply extra unit vectors orthogonal to ``e_1`` to
    rotate the meridian around the axis.
    """
    if directions is None:
        return PointCloud(g.ball_points(), t, g.label)
    rho = np.tanh(0.5 * g.r)
    pts = []
    for w in directions:
        e = np.zeros(g.n)
        e[0] = 1.0
        pts.append(rho[:, None] * (np.cos(g.psi)[:, None] * e + np.sin(g.psi)[:, None] * np.asarray(w)))
    return PointCloud(np.concatenate(pts), t, g.label)


def _pair_margins(pts, rho, a_plus, rows):
    # margins for pairs (i in rows, all j) oriented so rho_i <= rho_j
    theta = pts / rho[:, None]
    ri = rho[rows][:, None]
    rj = rho[None, :]
    lo = np.minimum(ri, rj)
    hi = np.maximum(ri, rj)
    a1 = (1.0 / lo - lo) ** 2
    k = np.sqrt(lo * hi * a1 / (a_plus - a1))
    dtheta = np.linalg.norm(theta[rows][:, None, :] - theta[None, :, :], axis=-1)
    return k * dtheta - (hi - lo), dtheta


def certify_star_shaped(cloud, rho_plus, chunk=256, collinear_tol=1e-13):
    """Pairwise Lipschitz-graph certificate for a level-set sample.

    Every unordered pair is oriented so that ``rho1 <= rho2`` and its margin
    is ``k |theta2 - theta1| - (rho2 - rho1)``. Pairs on a common ray pass
    without a slope condition. The worst margin over the remaining pairs is
    returned, ties broken lexicographically by index.
    """
    pts = cloud.points
    rho = np.linalg.norm(pts, axis=1)
    N = len(rho)
    details = {"rho_plus": float(rho_plus), "num_points": N, "t": float(cloud.t)}
    if N:
        details["min_rho"] = float(rho.min())
        details["max_gap"] = _max_angular_gap(pts / rho[:, None]) if np.all(rho > 0) else float("nan")
    if not 0.0 < rho_plus < 1.0:
        raise ValueError("rho_plus must lie in (0, 1)")
    if N == 0 or np.any(rho <= rho_plus):
        worst = int(np.argmin(rho)) if N else None
        details["precondition"] = "violated"
        return Certificate("star_shaped", False, float("-inf"), None, worst, details)
    a_plus = (1.0 / rho_plus - rho_plus) ** 2
    best = np.inf
    best_pair = None
    for start in range(0, N, chunk):
        rows = np.arange(start, min(start + chunk, N))
        m, dtheta = _pair_margins(pts, rho, a_plus, rows)
        mask = np.arange(N)[None, :] > rows[:, None]
        mask &= dtheta > collinear_tol
        m = np.where(mask, m, np.inf)
        idx = np.argmin(m)  # first occurrence, row-major
        val = m.flat[idx]
        if val < best:
            i, j = divmod(int(idx), N)
            best = float(val)
            best_pair = (int(rows[i]), j)
    if best_pair is None:
        best = 0.0
    details["precondition"] = "met"
    return Certificate("star_shaped", bool(best >= 0.0), best, best_pair, None, details)


def _max_angular_gap(theta):
    # largest angle from any sample direction to its nearest neighbour
    if theta.shape[0] < 2:
        return float("nan")
    cos = np.clip(theta @ theta.T, -1.0, 1.0)
    np.fill_diagonal(cos, -1.0)
    return float(np.max(np.arccos(np.max(cos, axis=1))))


def waiting_time(r_minus, r_plus, n):
    """``T = (n-1) log(sinh r+ / sinh r-)``: time for the flow to become star-shaped."""
    if not 0.0 < r_minus <= r_plus:
        raise ValueError("need 0 < r_minus <= r_plus")
    if r_minus == r_plus:
        return 0.0
    return float((n - 1) * (np.log(np.sinh(r_plus)) - np.log(np.sinh(r_minus))))


def critical_r_plus(r, grad):
    """Smallest ``r+`` with ``|Dr| <= support_bound(r, r+)`` at every node.

    Solving ``sinh r+ sinh r / sqrt(sinh^2 r - sinh^2 r+) = |Dr|`` gives
    ``sinh r+ = |Dr| sinh r / sqrt(sinh^2 r + |Dr|^2)``.
    """
    s = np.sinh(np.asarray(r, dtype=float))
    d = np.abs(np.asarray(grad, dtype=float))
    sp = d * s / np.sqrt(s * s + d * d)
    return float(np.arcsinh(np.max(sp)))


@dataclass(frozen=True)
class RigidityReport:
    r_plus: np.ndarray
    passed: np.ndarray
    margins: np.ndarray
    bound_min: np.ndarray
    max_grad: float
    critical: float

    @property
    def consistent_with_sphere(self):
        """True when the bound holds for every probed ``r+``."""
        return bool(np.all(self.passed))


def rigidity_probe(r_plus_sequence, graph):
    """Gradient bounds for a decreasing sequence of ``r+``.

    As ``r+`` decreases to zero the bound tends to zero, so only graphs with
    ``|Dr| = 0`` stay consistent; ``critical`` is the ``r+`` below which a
    non-constant graph must fail.
    """
    seq = np.asarray(list(r_plus_sequence), dtype=float)
    if np.any(np.diff(seq) > 0):
        raise ValueError("r_plus sequence must be nonincreasing")
    passed, margins, bmin = [], [], []
    for rp in seq:
        rep = gradient_bound_check(graph, rp)
        passed.append(rep.passed)
        margins.append(rep.margin)
        bmin.append(float(np.min(support_bound(graph.r, rp))))
    from .starshape import geometry

    grad = geometry(graph).grad_r
    return RigidityReport(
        r_plus=seq,
        passed=np.array(passed),
        margins=np.array(margins),
        bound_min=np.array(bmin),
        max_grad=float(grad.max()),
        critical=critical_r_plus(graph.r, grad),
    )


def certificate_from_report(rep):
    """Wrap a :class:`~hypimcf.starshape.GradientBoundReport` as a certificate."""
    d = rep.as_dict()
    margin = rep.margin if rep.precondition_met else -np.inf
    return Certificate(
        "gradient_bound",
        rep.passed,
        float(margin),
        None,
        rep.worst_node,
        {"r_plus": d["r_plus"], "max_grad": d["max_grad"],
         "precondition": "met" if rep.precondition_met else "violated"},
    )


# --- comparison under inversion -------------------------------------------------


def axisymmetric_directions(theta, n, count=8):
    """Unit vectors ``w`` orthogonal to ``e_1`` covering the meridian planes that
    matter for an inversion with axis ``theta`` (up to rotations fixing both)."""
    theta = np.asarray(theta, dtype=float)
    perp = theta.copy()
    perp[0] = 0.0
    if np.linalg.norm(perp) < 1e-12:
        perp = np.zeros(n)
        perp[1] = 1.0
    perp /= np.linalg.norm(perp)
    other = np.zeros(n)
    idx = 2 if abs(perp[2]) < 0.9 else 1
    other[idx] = 1.0
    other -= other.dot(perp) * perp
    other[0] = 0.0
    other /= np.linalg.norm(other)
    ang = np.linspace(0.0, np.pi, count)
    return [np.cos(a) * perp + np.sin(a) * other for a in ang]


def _polar(points):
    rho = np.linalg.norm(points, axis=-1)
    cospsi = np.clip(points[..., 0] / np.where(rho > 0, rho, 1.0), -1.0, 1.0)
    return rho_to_r(rho), np.arccos(cospsi)


def inside_graph(g, points, strict=False):
    """Membership of ball points in the region enclosed by an axisymmetric graph."""
    r, psi = _polar(np.asarray(points, dtype=float))
    rg = np.interp(psi, g.psi, g.r)
    return r < rg if strict else r <= rg


@dataclass
class AnalyticRadialField:
    """Field ``u(r)`` given by a closed form, sampled on an axisymmetric grid.

    Used as the held-out analytic field for interpolation budgets and as the
    reference solution in comparison checks.
    """

    func: object
    r_nodes: np.ndarray
    psi_nodes: np.ndarray

    def evaluate(self, points):
        r, _ = _polar(np.asarray(points, dtype=float))
        out = np.asarray(self.func(r), dtype=float)
        return np.where(r <= self.r_nodes.max(), out, np.nan)

    def sample_points(self, n, directions):
        R, P = np.meshgrid(self.r_nodes, self.psi_nodes, indexing="ij")
        rho = r_to_rho(R).ravel()
        pp = P.ravel()
        e = np.zeros(n)
        e[0] = 1.0
        return np.concatenate(
            [rho[:, None] * (np.cos(pp)[:, None] * e + np.sin(pp)[:, None] * w) for w in directions]
        )


def comparison_check(field, inv, omega0, tol, directions=None, hypothesis_samples=64):
    """Check ``u(F(x)) <= u(x) + tol`` on ``H \\ Omega_0`` when the inversion
    hypothesis ``F(Omega_0) \\ closure(H) in Omega_0`` holds.

    ``field`` provides ``evaluate(points)`` (NaN where it has no data, zero
    inside ``Omega_0``) and ``sample_points(n, directions)``. ``omega0`` is the
    initial domain as a :class:`RadialGraph`.
    """
    if not isinstance(omega0, RadialGraph):
        raise TypeError("omega0 must be a RadialGraph")
    if not isinstance(inv, SphereInversion):
        raise TypeError("inv must be a SphereInversion")
    n = omega0.n
    if directions is None:
        directions = axisymmetric_directions(inv.theta, n)
    details = {"tol": float(tol), "lambda": inv.lam}

    # hypothesis: sample Omega_0 (radial fan including its boundary)
    frac = np.linspace(0.0, 1.0, hypothesis_samples)[1:]
    fan = []
    for f in frac:
        fan.append(cloud_from_graph(omega0.with_r(f * omega0.r), directions=directions).points)
    pts0 = np.concatenate(fan)
    img = invert(inv, pts0)
    dist_c = np.linalg.norm(img - inv.center, axis=1)
    outside_H = dist_c > inv.radius * (1.0 + 1e-12)
    bad = outside_H & ~inside_graph(omega0, img)
    details["hypothesis_samples"] = int(pts0.shape[0])
    if np.any(bad):
        details["status"] = "hypothesis_not_met"
        details["hypothesis_violations"] = int(bad.sum())
        return Certificate("comparison", False, float("nan"), None, None, details)

    x = field.sample_points(n, directions)
    in_H = np.linalg.norm(x - inv.center, axis=1) < inv.radius
    test = in_H & ~inside_graph(omega0, x)
    x = x[test]
    if x.shape[0] == 0:
        details["status"] = "empty_region"
        return Certificate("comparison", True, float(tol), None, None, details)
    ux = field.evaluate(x)
    ufx = field.evaluate(invert(inv, x))
    ok = np.isfinite(ux) & np.isfinite(ufx)
    details["nodes_checked"] = int(ok.sum())
    details["nodes_skipped"] = int((~ok).sum())
    slack = np.where(ok, ux + tol - ufx, np.inf)
    worst = int(np.argmin(slack))
    margin = float(slack[worst]) if ok.any() else float(tol)
    details["status"] = "checked"
    details["max_violation"] = float(max(0.0, -(margin - tol)))
    return Certificate("comparison", bool(margin >= 0.0), margin, None, worst, details)
