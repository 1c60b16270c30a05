"""Axisymmetric star-shaped hypersurfaces of H^n as radial graphs.

A hypersurface is stored as ``r(psi)`` sampled on a uniform grid of the polar
angle ``psi in [0, pi]`` of S^{n-1}; the remaining S^{n-2} directions are
rotational. Writing ``s = sinh(r)``, ``c = cosh(r)`` and ``v = sqrt(s^2 + r'^2)``
the induced geometry is

* area element (per ``dpsi`` and unit S^{n-2} measure):
  ``v (s sin psi)^(n-2)``
* outward unit normal in the orthonormal frame ``(e_r, e_psi)``:
  ``nu = (s, -r') / v``
* support function ``phi = <grad cosh r, nu> = s^2 / v``
* mean curvature (sum of principal curvatures, positive on spheres)::

      H = (n-1) c / v + c r'^2 / v^3 - s r'' / v^3 - (n-2) cot(psi) r' / (s v)

  with ``cot(psi) r'`` replaced by its limit ``r''`` at the poles.

On a slice ``r = r0`` these reduce to ``H = (n-1) coth r0`` and
``phi = sinh r0``. The formula for ``H`` is checked against
:func:`mean_curvature_oracle`, which differentiates the discrete area under a
localised normal variation.

Derivatives are fourth-order central differences with even reflection about
the poles (``r'(0) = r'(pi) = 0``). Integrals use composite Simpson weights in
``psi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import io

import numpy as np
from scipy.fft import dct
from scipy.integrate import simpson
from scipy.special import gamma

__all__ = [
    "unit_sphere_area",
    "PolarGrid",
    "RadialGraph",
    "SurfaceGeometry",
    "GradientBoundReport",
    "sphere",
    "graph_from_function",
    "perturbed_sphere",
    "dumbbell",
    "derivatives",
    "geometry",
    "mean_curvature_oracle",
    "cosine_coefficients",
    "area",
    "bulk_potential",
    "weighted_total_curvature",
    "support_integral",
    "potential_integral",
    "inverse_curvature_integral",
    "support_bound",
    "gradient_bound_check",
    "meridian_curve_area",
    "graph_to_text",
    "graph_from_text",
]


def unit_sphere_area(k):
    """Area ``w_k`` of the unit sphere S^k in R^{k+1}."""
    return float(2.0 * np.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0))


@lru_cache(maxsize=32)
def _simpson_weights(num_nodes):
    # exact weights of scipy's composite Simpson rule on the unit-spaced grid
    return simpson(np.eye(num_nodes), dx=1.0, axis=0)


@dataclass(frozen=True)
class PolarGrid:
    n: int
    num_nodes: int
    psi: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False)

    def __post_init__(self):
        if not 3 <= self.n <= 7:
            raise ValueError("ambient dimension must satisfy 3 <= n <= 7")
        if self.num_nodes < 16:
            raise ValueError("need at least 16 nodes")
        object.__setattr__(self, "psi", np.linspace(0.0, np.pi, self.num_nodes))
        object.__setattr__(self, "h", np.pi / (self.num_nodes - 1))

    @property
    def sin_weight(self):
        """``sin(psi)^(n-2)``, the S^{n-2} orbit factor."""
        return np.sin(self.psi) ** (self.n - 2)

    @property
    def quad_weights(self):
        """Simpson weights for ``int_0^pi g(psi) dpsi``."""
        return self.h * _simpson_weights(self.num_nodes)

    @property
    def orbit_area(self):
        return unit_sphere_area(self.n - 2)

    def integrate(self, values):
        """``w_{n-2} int_0^pi values dpsi`` with a fixed summation order."""
        return float(self.orbit_area * np.dot(self.quad_weights, values))

    def refined(self):
        """Grid with half the spacing."""
        return PolarGrid(self.n, 2 * self.num_nodes - 1)


@dataclass(frozen=True)
class RadialGraph:
    grid: PolarGrid
    r: np.ndarray
    label: str = ""

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.shape != (self.grid.num_nodes,):
            raise ValueError("r must have one value per grid node")
        if not np.all(np.isfinite(r)) or np.any(r <= 0.0):
            raise ValueError("radial graph needs r > 0 at every node")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @property
    def n(self):
        return self.grid.n

    @property
    def psi(self):
        return self.grid.psi

    def with_r(self, r, label=None):
        return RadialGraph(self.grid, r, self.label if label is None else label)

    def r_min(self):
        return float(np.min(self.r))

    def r_max(self):
        return float(np.max(self.r))

    def ball_points(self):
        """Meridian points ``rho (cos psi, sin psi, 0, ...)`` in the Poincare ball."""
        rho = np.tanh(0.5 * self.r)
        pts = np.zeros((self.grid.num_nodes, self.n))
        pts[:, 0] = rho * np.cos(self.psi)
        pts[:, 1] = rho * np.sin(self.psi)
        return pts


@dataclass(frozen=True)
class SurfaceGeometry:
    area_element: np.ndarray
    H: np.ndarray
    phi: np.ndarray
    nu: np.ndarray  # (N, 2) components along (e_r, e_psi)
    grad_r: np.ndarray  # |Dr| on the unit sphere
    dr: np.ndarray
    d2r: np.ndarray


def sphere(grid, r0, label=None):
    """The slice ``r = r0``."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    return RadialGraph(grid, np.full(grid.num_nodes, float(r0)), label or f"sphere r0={r0:g}")


def graph_from_function(grid, func, label=""):
    return RadialGraph(grid, np.asarray(func(grid.psi), dtype=float), label)


def perturbed_sphere(grid, r0, amplitude, k=2):
    """``r = r0 + amplitude cos(k psi)`` (``k`` a nonnegative integer keeps the poles even)."""
    r = r0 + amplitude * np.cos(k * grid.psi)
    if np.any(r <= 0):
        raise ValueError("perturbation makes r nonpositive")
    return RadialGraph(grid, r, f"r={r0:g}+{amplitude:g}cos({k}psi)")


def dumbbell(grid, r_bulb=1.5, r_neck=0.3, width=0.2, power=4):
    """Two bulbs joined by a thin neck around the equator.

    ``r = r_bulb - (r_bulb - r_neck) exp(-((psi - pi/2) / width)^power)``.
    For a narrow neck the enclosing slab filling the groove has less area
    than the groove walls, so the outer-minimizing hull is strictly larger
    than the enclosed region.
    """
    if not 0 < r_neck < r_bulb:
        raise ValueError("need 0 < r_neck < r_bulb")
    if power % 2:
        raise ValueError("power must be even")
    x = (grid.psi - 0.5 * np.pi) / width
    r = r_bulb - (r_bulb - r_neck) * np.exp(-(x ** power))
    return RadialGraph(grid, r, f"dumbbell bulb={r_bulb:g} neck={r_neck:g}")


def _padded(r, k=2):
    # even reflection across psi = 0 and psi = pi
    left = r[k:0:-1]
    right = r[-2 : -k - 2 : -1]
    return np.concatenate([left, r, right])


def derivatives(r, h):
    """Fourth-order ``(r', r'')`` with even symmetry at both poles."""
    p = _padded(np.asarray(r), 2)
    rm2, rm1, r0, rp1, rp2 = p[:-4], p[1:-3], p[2:-2], p[3:-1], p[4:]
    d1 = (-rp2 + 8.0 * rp1 - 8.0 * rm1 + rm2) / (12.0 * h)
    d2 = (-rp2 + 16.0 * rp1 - 30.0 * r0 + 16.0 * rm1 - rm2) / (12.0 * h * h)
    # symmetry forces r' = 0 exactly at the poles
    d1 = d1.copy()
    d1[0] = 0.0
    d1[-1] = 0.0
    return d1, d2


def _geometry_arrays(r, grid):
    n = grid.n
    psi = grid.psi
    dr, d2r = derivatives(r, grid.h)
    s = np.sinh(r)
    c = np.cosh(r)
    v = np.sqrt(s * s + dr * dr)
    sinp = np.sin(psi)
    cot_dr = np.empty_like(r)
    cot_dr[1:-1] = np.cos(psi[1:-1]) / sinp[1:-1] * dr[1:-1]
    cot_dr[0] = d2r[0]
    cot_dr[-1] = d2r[-1]
    v3 = v**3
    H = (n - 1) * c / v + c * dr * dr / v3 - s * d2r / v3 - (n - 2) * cot_dr / (s * v)
    elem = v * (s * sinp) ** (n - 2)
    phi = s * s / v
    return dr, d2r, v, H, elem, phi


def geometry(g):
    """Per-node geometry of a radial graph."""
    dr, d2r, v, H, elem, phi = _geometry_arrays(g.r, g.grid)
    s = np.sinh(g.r)
    nu = np.stack([s / v, -dr / v], axis=1)
    return SurfaceGeometry(
        area_element=elem, H=H, phi=phi, nu=nu, grad_r=np.abs(dr), dr=dr, d2r=d2r
    )


def cosine_coefficients(r):
    """Coefficients ``a_k`` with ``r(psi_j) = sum_k a_k cos(k psi_j)`` (DCT-I)."""
    r = np.asarray(r, dtype=float)
    m = r.shape[0] - 1
    a = dct(r, type=1) / m
    a[0] *= 0.5
    a[-1] *= 0.5
    return a


def mean_curvature_oracle(g, node, halfwidth=0, step=1e-5, order=24):
    """Mean curvature at ``node`` from the first variation of area.

    The surface is pushed along its normal by a hat function ``V`` of
    half-width ``halfwidth + 1`` nodes centred at ``node``. The area change
    ``d/dt |Sigma_t|`` is taken by a centred difference in ``t`` and divided by
    ``int V dsigma``. Near a pole the hat is cut off (one-sided variation).

    The surface is represented by its cosine interpolant and the localised
    area integrals use Gauss-Legendre quadrature on each linear piece of the
    hat, so the estimate shares neither the finite-difference stencil nor
    the curvature formula used by :func:`geometry`.
    """
    grid = g.grid
    n = grid.n
    a = cosine_coefficients(g.r)
    width = (halfwidth + 1) * grid.h
    centre = grid.psi[node]
    lo = max(0.0, centre - width)
    hi = min(np.pi, centre + width)
    x, w = np.polynomial.legendre.leggauss(order)
    pts, wts = [], []
    for left, right in ((lo, centre), (centre, hi)):
        if right > left:
            pts.append(0.5 * (right - left) * x + 0.5 * (right + left))
            wts.append(0.5 * (right - left) * w)
    psi = np.concatenate(pts)
    wq = np.concatenate(wts)
    V = 1.0 - np.abs(psi - centre) / width
    dV = -np.sign(psi - centre) / width
    k = np.arange(a.shape[0])
    cosm = np.cos(np.outer(psi, k))
    r = cosm @ a
    dr = -(np.sin(np.outer(psi, k)) * k) @ a
    d2r = -(cosm * k * k) @ a
    s = np.sinh(r)
    c = np.cosh(r)
    v = np.sqrt(s * s + dr * dr)
    sinp = np.sin(psi)
    # normal displacement V is the radial displacement V q, q = v / s
    q = v / s
    vp = (s * c * dr + dr * d2r) / v
    qp = (vp * s - v * c * dr) / (s * s)

    def area_change(t):
        rr = r + t * V * q
        drr = dr + t * (dV * q + V * qp)
        ss = np.sinh(rr)
        elem = np.sqrt(ss * ss + drr * drr) * (ss * sinp) ** (n - 2)
        return float(np.dot(wq, elem))

    dA = (area_change(step) - area_change(-step)) / (2.0 * step)
    elem0 = v * (s * sinp) ** (n - 2)
    denom = float(np.dot(wq, V * elem0))
    if denom == 0.0:
        raise ValueError("variation has zero measure; widen the bump")
    return dA / denom


def area(g):
    _, _, _, _, elem, _ = _geometry_arrays(g.r, g.grid)
    return g.grid.integrate(elem)


def bulk_potential(g):
    """``int_Omega cosh(r) dOmega`` for the region enclosed by the graph."""
    grid = g.grid
    vals = grid.sin_weight * np.sinh(g.r) ** grid.n / grid.n
    return grid.integrate(vals)


def weighted_total_curvature(g):
    """``int_Sigma f H dsigma``."""
    _, _, _, H, elem, _ = _geometry_arrays(g.r, g.grid)
    return g.grid.integrate(np.cosh(g.r) * H * elem)


def support_integral(g):
    """``int_Sigma phi dsigma``."""
    _, _, _, _, elem, phi = _geometry_arrays(g.r, g.grid)
    return g.grid.integrate(phi * elem)


def potential_integral(g):
    """``int_Sigma f dsigma``."""
    _, _, _, _, elem, _ = _geometry_arrays(g.r, g.grid)
    return g.grid.integrate(np.cosh(g.r) * elem)


def inverse_curvature_integral(g, weight="potential", h_floor=1e-8):
    """``int_Sigma f / H dsigma`` (or ``int 1/H`` with ``weight=None``).

    Returns ``inf`` if ``H`` drops below ``h_floor`` anywhere on the surface,
    and raises ``ValueError`` if ``H`` is negative somewhere.
    """
    _, _, _, H, elem, _ = _geometry_arrays(g.r, g.grid)
    if np.any(H < -h_floor):
        raise ValueError("surface is not mean-convex")
    if np.any(H < h_floor):
        return float("inf")
    f = np.cosh(g.r) if weight == "potential" else 1.0
    return g.grid.integrate(f * elem / H)


def support_bound(r, r_plus):
    """Upper bound ``sinh(r+) sinh(r) / sqrt(sinh^2 r - sinh^2 r+)`` for ``|Dr|``."""
    r = np.asarray(r, dtype=float)
    sp = np.sinh(r_plus)
    sr = np.sinh(r)
    gap = sr * sr - sp * sp
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(gap > 0.0, sp * sr / np.sqrt(np.where(gap > 0, gap, 1.0)), np.inf)
    return out


@dataclass(frozen=True)
class GradientBoundReport:
    passed: bool
    precondition_met: bool
    margin: float
    worst_node: int
    r_plus: float
    max_grad: float

    def as_dict(self):
        return {
            "kind": "gradient_bound",
            "passed": self.passed,
            "precondition_met": self.precondition_met,
            "margin": self.margin,
            "worst_node": self.worst_node,
            "r_plus": self.r_plus,
            "max_grad": self.max_grad,
        }


def gradient_bound_check(g, r_plus):
    """Check ``|Dr| <= support_bound(r, r_plus)`` node by node.

    Margins are ``bound - |Dr|``; the worst one is reported. When
    ``min r <= r_plus`` the bound is vacuous and the report fails its
    precondition.
    """
    geo = geometry(g)
    if g.r_min() <= r_plus:
        return GradientBoundReport(
            passed=False,
            precondition_met=False,
            margin=float("nan"),
            worst_node=int(np.argmin(g.r)),
            r_plus=float(r_plus),
            max_grad=float(geo.grad_r.max()),
        )
    margins = support_bound(g.r, r_plus) - geo.grad_r
    worst = int(np.argmin(margins))
    return GradientBoundReport(
        passed=bool(margins[worst] >= 0.0),
        precondition_met=True,
        margin=float(margins[worst]),
        worst_node=worst,
        r_plus=float(r_plus),
        max_grad=float(geo.grad_r.max()),
    )


def meridian_curve_area(r, psi, n):
    """Area of the hypersurface of revolution swept by a meridian polyline.

    ``(r[k], psi[k])`` are successive vertices in geodesic polar coordinates
    with ``psi`` measured from the symmetry axis. Midpoint rule per segment.
    """
    r = np.asarray(r, dtype=float)
    psi = np.asarray(psi, dtype=float)
    rm = 0.5 * (r[1:] + r[:-1])
    pm = 0.5 * (psi[1:] + psi[:-1])
    sm = np.sinh(rm)
    seg = np.sqrt(np.diff(r) ** 2 + (sm * np.diff(psi)) ** 2)
    return unit_sphere_area(n - 2) * float(np.sum(seg * (sm * np.abs(np.sin(pm))) ** (n - 2)))


def graph_to_text(g):
    """Serialise as a header ``n=<dim>,nodes=<N>`` followed by ``psi,r`` rows."""
    buf = io.StringIO()
    buf.write(f"n={g.n},nodes={g.grid.num_nodes}\n")
    buf.write("psi,r\n")
    for p, r in zip(g.psi, g.r):
        buf.write(f"{float(p)!r},{float(r)!r}\n")
    return buf.getvalue()


def graph_from_text(text, label=""):
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    header = dict(item.split("=") for item in lines[0].split(","))
    n = int(header["n"])
    nodes = int(header["nodes"])
    if lines[1] != "psi,r":
        raise ValueError("expected column header 'psi,r'")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
    if rows.shape != (nodes, 2):
        raise ValueError(f"expected {nodes} rows, found {rows.shape[0]}")
    grid = PolarGrid(n, nodes)
    if np.max(np.abs(rows[:, 0] - grid.psi)) > 1e-12:
        raise ValueError("psi column does not match a uniform polar grid")
    return RadialGraph(grid, rows[:, 1], label)
