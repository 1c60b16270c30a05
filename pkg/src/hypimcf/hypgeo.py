"""Hyperbolic space in geodesic-polar and Poincare-ball coordinates.

Points of H^n are handled in two charts:

* geodesic polar ``(theta, r)`` with metric ``dr^2 + sinh(r)^2 dOmega^2``,
* the Poincare ball ``B_1(0)`` with metric ``4 |dx|^2 / (1 - |x|^2)^2``.

The radial coordinates are related by ``r = log((1 + rho) / (1 - rho))``.
Sphere inversions about spheres meeting the unit sphere orthogonally are
isometries of the ball; they drive the reflection arguments in
:mod:`hypimcf.reflect`.

Most functions accept a single point (shape ``(n,)``) or a stack of points
(shape ``(..., n)``) and broadcast.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ORIGIN",
    "Origin",
    "GeodesicPoint",
    "BallPoint",
    "SphereInversion",
    "HalfSpace",
    "rho_to_r",
    "r_to_rho",
    "sinh_r_from_rho",
    "to_geodesic",
    "to_ball",
    "hyp_distance",
    "potential",
    "invert",
    "bisecting_inversion",
    "reflection_threshold",
    "lambda_from_radius",
]


class Origin:
    """The origin of H^n: geodesic polar coordinates carry no direction here."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    r = 0.0

    def __repr__(self):
        return "ORIGIN"


ORIGIN = Origin()


@dataclass(frozen=True)
class GeodesicPoint:
    theta: np.ndarray
    r: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
            raise ValueError("theta must be a unit vector")
        if not self.r > 0:
            raise ValueError("r must be positive; use ORIGIN for r = 0")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "r", float(self.r))

    @property
    def n(self):
        return self.theta.shape[0]


@dataclass(frozen=True)
class BallPoint:
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if not np.linalg.norm(x) < 1.0:
            raise ValueError("Poincare ball points need |x| < 1")
        object.__setattr__(self, "x", x)

    @property
    def rho(self):
        return float(np.linalg.norm(self.x))

    @property
    def n(self):
        return self.x.shape[0]


def rho_to_r(rho):
    """Geodesic distance from the origin of a ball point at Euclidean radius ``rho``."""
    rho = np.asarray(rho, dtype=float)
    return np.log1p(rho) - np.log1p(-rho)


def r_to_rho(r):
    """Inverse of :func:`rho_to_r`; ``tanh(r/2)`` written without cancellation."""
    return np.tanh(0.5 * np.asarray(r, dtype=float))


def sinh_r_from_rho(rho):
    """``sinh(r) = 2 / (1/rho - rho)``."""
    rho = np.asarray(rho, dtype=float)
    return 2.0 * rho / (1.0 - rho * rho)


def to_geodesic(p):
    """Convert a :class:`BallPoint` (or raw vector) to geodesic polar form.

    Returns :data:`ORIGIN` for the centre of the ball.
    """
    if isinstance(p, Origin):
        return ORIGIN
    x = p.x if isinstance(p, BallPoint) else np.asarray(p, dtype=float)
    rho = float(np.linalg.norm(x))
    if rho >= 1.0:
        raise ValueError("point lies outside the open unit ball")
    if rho == 0.0:
        return ORIGIN
    return GeodesicPoint(theta=x / rho, r=float(rho_to_r(rho)))


def to_ball(p):
    if isinstance(p, Origin):
        raise ValueError("the origin has no direction; pass the dimension to build it")
    if p.r < 0:
        raise ValueError("r must be nonnegative")
    return BallPoint(p.theta * float(r_to_rho(p.r)))


def _coords(p):
    if isinstance(p, BallPoint):
        return p.x
    return np.asarray(p, dtype=float)


def hyp_distance(p, q):
    """Hyperbolic distance between ball points (vectorised over leading axes)."""
    p = _coords(p)
    q = _coords(q)
    pp = np.sum(p * p, axis=-1)
    qq = np.sum(q * q, axis=-1)
    if np.any(pp >= 1.0) or np.any(qq >= 1.0):
        raise ValueError("hyp_distance needs points inside the open unit ball")
    d2 = np.sum((p - q) ** 2, axis=-1)
    # arccosh(1 + z) = log1p(z + sqrt(z (z + 2))) keeps accuracy for small z
    z = 2.0 * d2 / ((1.0 - pp) * (1.0 - qq))
    return np.log1p(z + np.sqrt(z * (z + 2.0)))


def potential(p):
    """The static potential ``f = cosh(r)``.

    Accepts a geodesic radius (float/array), a :class:`GeodesicPoint`,
    a :class:`BallPoint` or :data:`ORIGIN`.
    """
    if isinstance(p, Origin):
        return 1.0
    if isinstance(p, GeodesicPoint):
        return float(np.cosh(p.r))
    if isinstance(p, BallPoint):
        rho = p.rho
        return (1.0 + rho * rho) / (1.0 - rho * rho)
    return np.cosh(np.asarray(p, dtype=float))


def lambda_from_radius(radius):
    """Solve ``(1/lam - lam) / 2 = radius`` for ``lam`` in (0, 1)."""
    radius = np.asarray(radius, dtype=float)
    # -R + sqrt(R^2 + 1) = 1 / (R + sqrt(R^2 + 1)) without cancellation
    return 1.0 / (radius + np.sqrt(radius * radius + 1.0))


@dataclass(frozen=True)
class SphereInversion:
    """Inversion in the sphere ``dB_R(c)`` with ``c = (1/lam + lam)/2 * theta``.

    The sphere meets the unit sphere orthogonally, so the inversion restricts
    to an isometry of the Poincare ball. ``lam`` is the Euclidean distance from
    the origin to the sphere.
    """

    lam: float
    theta: np.ndarray
    radius: float = field(init=False)
    center: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lambda must lie in (0, 1)")
        theta = np.asarray(self.theta, dtype=float)
        nrm = np.linalg.norm(theta)
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError("theta must be a unit vector")
        lam = float(self.lam)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "radius", 0.5 * (1.0 / lam - lam))
        object.__setattr__(self, "center", 0.5 * (1.0 / lam + lam) * theta)

    @classmethod
    def from_center_radius(cls, center, radius):
        """Build the inversion from its sphere; checks orthogonality to ``dB_1``."""
        center = np.asarray(center, dtype=float)
        c = np.linalg.norm(center)
        if abs(c * c - radius * radius - 1.0) > 1e-9:
            raise ValueError("sphere does not meet the unit sphere orthogonally")
        inv = cls(float(lambda_from_radius(radius)), center / c)
        # keep the caller's centre and radius bit-for-bit
        object.__setattr__(inv, "center", center)
        object.__setattr__(inv, "radius", float(radius))
        return inv

    @property
    def n(self):
        return self.theta.shape[0]

    def __call__(self, x):
        return invert(self, x)


@dataclass(frozen=True)
class HalfSpace:
    """The region ``B_1(0) & B_R(c)`` cut off by an inversion sphere."""

    inversion: SphereInversion

    def contains(self, x, closed=False):
        x = _coords(x)
        d = np.linalg.norm(x - self.inversion.center, axis=-1)
        inside_ball = np.linalg.norm(x, axis=-1) < 1.0
        if closed:
            return inside_ball & (d <= self.inversion.radius)
        return inside_ball & (d < self.inversion.radius)


def invert(inv, p):
    """Apply the sphere inversion ``F(x) = R^2 (x - c)/|x - c|^2 + c``."""
    x = _coords(p)
    d = x - inv.center
    d2 = np.sum(d * d, axis=-1, keepdims=True)
    if np.any(d2 == 0.0):
        raise ZeroDivisionError("cannot invert the centre of the inversion sphere")
    y = (inv.radius**2 / d2) * d + inv.center
    if isinstance(p, BallPoint):
        return BallPoint(y)
    return y


def bisecting_inversion(x1, x2):
    """Inversion whose sphere bisects ``x1`` and ``x2`` and maps ``x2`` to ``x1``.

    Requires ``0 < |x1| < |x2| < 1``. The centre is
    ``x0 = (1 - s0) x1 + s0 x2`` with ``s0 = (1 - rho1^2)/(rho2^2 - rho1^2)``
    and the radius is ``sqrt(|x0 - x1| |x0 - x2|) = sqrt(s0 (s0 - 1)) |x2 - x1|``.
    """
    x1 = _coords(x1)
    x2 = _coords(x2)
    rho1 = np.linalg.norm(x1)
    rho2 = np.linalg.norm(x2)
    if rho2 >= 1.0:
        raise ValueError("x2 must lie inside the open unit ball")
    if rho1 == 0.0:
        raise ValueError("x1 must be nonzero")
    if not rho1 < rho2:
        raise ValueError("need |x1| < |x2| (degenerate when equal)")
    d = x2 - x1
    # x0 - x1 = s0 d and x0 - x2 = (s0 - 1) d, so no cancellation for close pairs
    s0 = (1.0 - rho1) * (1.0 + rho1) / (d @ (x1 + x2))
    x0 = x1 + s0 * d
    radius = np.sqrt(s0 * (s0 - 1.0)) * np.linalg.norm(d)
    c = np.linalg.norm(x0)
    inv = SphereInversion(float(lambda_from_radius(radius)), x0 / c)
    object.__setattr__(inv, "center", x0)
    object.__setattr__(inv, "radius", float(radius))
    return inv


def reflection_threshold(rho_plus, rho1, rho2):
    """Slope coefficient above which ``u(x2) >= u(x1)`` follows by reflection.

    The comparison applies whenever
    ``rho2 - rho1 >= reflection_threshold(rho_plus, rho1, rho2) * |theta2 - theta1|``.
    """
    if not (0.0 < rho_plus < rho1 < rho2 < 1.0):
        raise ValueError("need 0 < rho_plus < rho1 < rho2 < 1")
    a_plus = (1.0 / rho_plus - rho_plus) ** 2
    a1 = (1.0 / rho1 - rho1) ** 2
    denom = a_plus - a1
    if denom <= 0.0:
        raise ValueError("rho1 must exceed rho_plus")
    return float(np.sqrt(rho1 * rho2 * a1 / denom))
