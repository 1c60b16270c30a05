"""Elliptic-regularized level-set solver for weak IMCF.

The regularized problem on ``F_L \\ Omega_0`` is

    div(grad u / W) = W,   W = sqrt(|grad u|^2 + eps^2),
    u = 0 on Sigma_0,      u = L on the outer sphere r = R_L,

written for axisymmetric ``u(r, psi)`` on ``H^n``. The annulus is fitted to
the boundary by ``r = a(psi) + G(xi) b(psi)`` with ``a`` the initial radial
graph, ``b = R_L - a`` and ``G`` a monotone stretch of ``[0, 1]``. With
``bt = b G'`` and ``m = a' + G b'`` the metric in ``(xi, psi)`` is

    g_xixi = bt^2,  g_xipsi = bt m,  g_psipsi = m^2 + s^2,
    sqrt(g) = bt s^(n-1) sin(psi)^(n-2),

where ``s = sinh r``.

Discretisation: vertex nodes in ``xi`` (Dirichlet rows at both ends),
cell-centred ``psi`` with zero flux through the axis, finite-volume fluxes
with compact normal differences and averaged cross derivatives. The source
``W`` uses a second-order one-sided ``xi`` difference taken towards
``Sigma_0``, the upwind side for level sets moving outward (centred on the
first interior row). Newton's method
uses a coloured complex-step Jacobian.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import io
import logging
import math

import numpy as np
from scipy import sparse
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline, PchipInterpolator, RegularGridInterpolator
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .starshape import (
    PolarGrid,
    RadialGraph,
    area,
    bulk_potential,
    cosine_coefficients,
    meridian_curve_area,
    unit_sphere_area,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverError",
    "AnnulusMesh",
    "RegularizedField",
    "WeakFlowResult",
    "outer_radius",
    "level_cap",
    "initial_guess",
    "residual",
    "solve_regularized",
    "radial_oracle",
    "weak_limit",
    "gradient_norm",
    "extract_levelset",
    "level_contours",
    "detect_jumps",
    "minimization_audit",
    "field_to_csv",
    "interpolation_error",
    "offset_sphere_graph",
    "offset_sphere_u",
    "LevelSet",
    "LevelSetEscaped",
    "AuditReport",
    "J_functional",
    "J_difference",
    "audit_noise",
    "gradient_noise",
    "gradient_at",
    "standard_competitors",
    "weak_trace",
    "evaluate_field",
]


class SolverError(RuntimeError):
    pass


# --- geometry of the annulus ----------------------------------------------------


def outer_radius(r_plus, n, t_max, margin=1.0):
    """``R_L`` with ``sinh R_L = e^((t_max + margin)/(n-1)) sinh r+``.

    The expanding slice from ``r+`` encloses ``Sigma_t`` for all ``t``, so
    levels up to ``t_max`` stay at least ``margin`` in flow time inside.
    """
    return float(np.arcsinh(np.exp((t_max + margin) / (n - 1.0)) * np.sinh(r_plus)))


def level_cap(r_minus, R_L, n):
    """Outer boundary value ``L = (n-1) log(sinh R_L / sinh r-)``."""
    return float((n - 1.0) * (np.log(np.sinh(R_L)) - np.log(np.sinh(r_minus))))


def _cosine_eval(coef, psi):
    k = np.arange(coef.shape[0])
    arg = np.outer(psi, k)
    return np.cos(arg) @ coef, -(np.sin(arg) * k) @ coef


@dataclass(frozen=True)
class AnnulusMesh:
    """Boundary-fitted mesh of ``{a(psi) <= r <= R_L}``.

    ``M`` intervals in ``xi`` (``M + 1`` node rows) and ``J`` cells in
    ``psi``. ``stretch`` > 0 clusters rows near ``Sigma_0`` through
    ``G(xi) = (exp(stretch xi) - 1) / (exp(stretch) - 1)``.
    """

    inner: RadialGraph
    R_L: float
    M: int = 128
    J: int = 64
    stretch: float = 0.0
    L: float = field(init=False)

    def __post_init__(self):
        if self.M < 4 or self.J < 2:
            raise ValueError("mesh too coarse")
        if not self.R_L > self.inner.r_max():
            raise ValueError("R_L must exceed sup r over Sigma_0")
        object.__setattr__(self, "L", level_cap(self.inner.r_min(), self.R_L, self.n))
        coef = cosine_coefficients(self.inner.r)
        object.__setattr__(self, "_coef", coef)

    @property
    def n(self):
        return self.inner.n

    @property
    def dxi(self):
        return 1.0 / self.M

    @property
    def dpsi(self):
        return np.pi / self.J

    @property
    def xi(self):
        return np.linspace(0.0, 1.0, self.M + 1)

    @property
    def psi(self):
        return (np.arange(self.J) + 0.5) * self.dpsi

    @property
    def psi_faces(self):
        return np.arange(self.J + 1) * self.dpsi

    def G(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.stretch == 0.0:
            return xi, np.ones_like(xi)
        k = self.stretch
        den = math.expm1(k)
        return np.expm1(k * xi) / den, k * np.exp(k * xi) / den

    def boundary(self, psi):
        """``a(psi)`` and ``a'(psi)`` from the cosine interpolant of ``Sigma_0``."""
        return _cosine_eval(self._coef, np.asarray(psi, dtype=float))

    def radius(self, xi, psi):
        a, _ = self.boundary(psi)
        G, _ = self.G(xi)
        return a[None, :] + G[:, None] * (self.R_L - a)[None, :]

    def metric(self, xi, psi):
        """``(r, bt, m)`` on the tensor grid ``xi x psi``."""
        a, da = self.boundary(psi)
        G, dG = self.G(xi)
        b = self.R_L - a
        r = a[None, :] + G[:, None] * b[None, :]
        bt = dG[:, None] * b[None, :]
        m = da[None, :] - G[:, None] * da[None, :]
        return r, bt, m

    def node_radius(self):
        return self.radius(self.xi, self.psi)

    def cell_sin(self):
        """Exact ``int sin(psi)^(n-2) dpsi`` over each cell."""
        return _sin_power_integral(self.n - 2, self.psi_faces)

    def node_volumes(self):
        """Measure of each node's control volume (unit ``S^{n-2}`` factor omitted)."""
        r, bt, _ = self.metric(self.xi, self.psi)
        w = np.full(self.M + 1, self.dxi)
        w[0] = w[-1] = 0.5 * self.dxi
        return bt * np.sinh(r) ** (self.n - 1) * self.cell_sin()[None, :] * w[:, None]

    def with_resolution(self, M, J):
        return AnnulusMesh(self.inner, self.R_L, M, J, self.stretch)


def _sin_power_integral(k, edges):
    return np.diff(_sin_power_integral_F(k, np.asarray(edges, dtype=float)))


def _sin_power_integral_F(k, x):
    # antiderivative of sin^k on [0, x] via the reduction formula
    if k == 0:
        return x
    if k == 1:
        return 1.0 - np.cos(x)
    return -np.sin(x) ** (k - 1) * np.cos(x) / k + (k - 1.0) / k * _sin_power_integral_F(k - 2, x)


# --- discrete operator ------------------------------------------------------------


class _Operator:
    """Precomputed metric data and the residual of the regularized equation."""

    def __init__(self, mesh):
        self.mesh = mesh
        n = mesh.n
        M, J = mesh.M, mesh.J
        dxi, dpsi = mesh.dxi, mesh.dpsi
        xi = mesh.xi
        psi = mesh.psi
        self.M, self.J, self.dxi, self.dpsi = M, J, dxi, dpsi
        S = mesh.cell_sin()
        # xi-faces at (i + 1/2, j)
        xf = 0.5 * (xi[1:] + xi[:-1])
        r, bt, m = mesh.metric(xf, psi)
        s = np.sinh(r)
        self.xf_sg = bt * s ** (n - 1)
        self.xf_gxx = (m * m + s * s) / (bt * bt * s * s)
        self.xf_gxp = -m / (bt * s * s)
        self.xf_gpp = 1.0 / (s * s)
        self.S = S
        # psi-faces at (i, j + 1/2), interior faces only (j = 0..J-2)
        pf = mesh.psi_faces[1:-1]
        r, bt, m = mesh.metric(xi, pf)
        s = np.sinh(r)
        sw = np.sin(pf) ** (n - 2)
        self.pf_sg = bt * s ** (n - 1) * sw[None, :]
        self.pf_gxx = (m * m + s * s) / (bt * bt * s * s)
        self.pf_gxp = -m / (bt * s * s)
        self.pf_gpp = 1.0 / (s * s)
        # nodes
        r, bt, m = mesh.metric(xi, psi)
        s = np.sinh(r)
        self.nd_vol = bt * s ** (n - 1) * S[None, :] * dxi
        self.nd_gxx = (m * m + s * s) / (bt * bt * s * s)
        self.nd_gxp = -m / (bt * s * s)
        self.nd_gpp = 1.0 / (s * s)
        self.r_nodes = r

    def full(self, U, L):
        """Interior unknowns ``(M-1, J)`` to the full nodal array with boundary rows."""
        u = np.empty((self.M + 1, self.J), dtype=U.dtype)
        u[0] = 0.0
        u[-1] = L
        u[1:-1] = U
        return u

    @staticmethod
    def _mirror(u):
        # even reflection across the axis: ghost columns equal their neighbours
        return np.concatenate([u[:, :1], u, u[:, -1:]], axis=1)

    def grad_components(self, u, upwind=True):
        """Nodal ``(u_xi, u_psi)``; ``u_xi`` one-sided towards ``Sigma_0`` if ``upwind``."""
        dxi, dpsi = self.dxi, self.dpsi
        ux = np.empty_like(u)
        if upwind:
            ux[2:] = (3.0 * u[2:] - 4.0 * u[1:-1] + u[:-2]) / (2.0 * dxi)
            ux[1] = (u[2] - u[0]) / (2.0 * dxi)
            ux[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dxi)
        else:
            ux[1:-1] = (u[2:] - u[:-2]) / (2.0 * dxi)
            ux[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dxi)
            ux[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dxi)
        um = self._mirror(u)
        up = (um[:, 2:] - um[:, :-2]) / (2.0 * dpsi)
        return ux, up

    def grad_sq(self, u, upwind=True):
        ux, up = self.grad_components(u, upwind)
        return self.nd_gxx * ux * ux + 2.0 * self.nd_gxp * ux * up + self.nd_gpp * up * up

    def residual(self, U, eps, L, frozen=None):
        """Residual on interior rows; ``frozen`` supplies ``W`` arrays to hold fixed.

        Complex input is supported for complex-step differentiation.
        """
        u = self.full(U, L)
        dxi, dpsi = self.dxi, self.dpsi
        um = self._mirror(u)
        cen_p = (um[:, 2:] - um[:, :-2]) / (2.0 * dpsi)  # centred psi derivative at nodes
        # xi-faces
        ux = (u[1:] - u[:-1]) / dxi
        up = 0.5 * (cen_p[1:] + cen_p[:-1])
        g2 = self.xf_gxx * ux * ux + 2.0 * self.xf_gxp * ux * up + self.xf_gpp * up * up
        if frozen is None:
            Wx = np.sqrt(g2 + eps * eps)
        else:
            Wx = frozen[0]
        Fx = self.xf_sg * (self.xf_gxx * ux + self.xf_gxp * up) / Wx  # (M, J)
        # psi-faces (interior)
        up_f = (u[:, 1:] - u[:, :-1]) / dpsi  # (M+1, J-1)
        cen_x = np.empty_like(u)
        cen_x[1:-1] = (u[2:] - u[:-2]) / (2.0 * dxi)
        cen_x[0] = (u[1] - u[0]) / dxi
        cen_x[-1] = (u[-1] - u[-2]) / dxi
        ux_f = 0.5 * (cen_x[:, 1:] + cen_x[:, :-1])
        g2p = self.pf_gxx * ux_f * ux_f + 2.0 * self.pf_gxp * ux_f * up_f + self.pf_gpp * up_f * up_f
        if frozen is None:
            Wp = np.sqrt(g2p + eps * eps)
        else:
            Wp = frozen[1]
        Fp = self.pf_sg * (self.pf_gxp * ux_f + self.pf_gpp * up_f) / Wp  # (M+1, J-1)
        zero = np.zeros((self.M + 1, 1), dtype=Fp.dtype)
        Fp_full = np.concatenate([zero, Fp, zero], axis=1)  # faces j = -1/2 .. J-1/2
        div = (Fx[1:] - Fx[:-1]) * self.S[None, :] + (Fp_full[1:-1, 1:] - Fp_full[1:-1, :-1]) * dxi
        div = div / self.nd_vol[1:-1]
        if frozen is None:
            Wn = np.sqrt(self.grad_sq(u)[1:-1] + eps * eps)
        else:
            Wn = frozen[2]
        return div - Wn

    def frozen_coefficients(self, U, eps, L):
        u = self.full(U.real, L)
        dxi, dpsi = self.dxi, self.dpsi
        um = self._mirror(u)
        cen_p = (um[:, 2:] - um[:, :-2]) / (2.0 * dpsi)
        ux = (u[1:] - u[:-1]) / dxi
        up = 0.5 * (cen_p[1:] + cen_p[:-1])
        Wx = np.sqrt(self.xf_gxx * ux * ux + 2.0 * self.xf_gxp * ux * up + self.xf_gpp * up * up + eps * eps)
        up_f = (u[:, 1:] - u[:, :-1]) / dpsi
        cen_x = np.empty_like(u)
        cen_x[1:-1] = (u[2:] - u[:-2]) / (2.0 * dxi)
        cen_x[0] = (u[1] - u[0]) / dxi
        cen_x[-1] = (u[-1] - u[-2]) / dxi
        ux_f = 0.5 * (cen_x[:, 1:] + cen_x[:, :-1])
        Wp = np.sqrt(self.pf_gxx * ux_f * ux_f + 2.0 * self.pf_gxp * ux_f * up_f + self.pf_gpp * up_f * up_f + eps * eps)
        Wn = np.sqrt(self.grad_sq(u)[1:-1] + eps * eps)
        return Wx, Wp, Wn

    # coloured complex-step Jacobian -------------------------------------------------
    def jacobian(self, U, eps, L, frozen=None, h=1e-30):
        Mi, J = U.shape
        rows_i, rows_j = np.meshgrid(np.arange(Mi), np.arange(J), indexing="ij")
        data, ri, ci = [], [], []
        row_id = rows_i * J + rows_j
        for ck in range(4):
            for cl in range(3):
                mask = ((np.arange(Mi) % 4) == ck)[:, None] & ((np.arange(J) % 3) == cl)[None, :]
                Uc = U.astype(complex)
                Uc[mask] += 1j * h
                Rc = self.residual(Uc, eps, L, frozen)
                d = Rc.imag / h
                # unknown of this colour inside the stencil of each row
                for di in range(-2, 2):
                    k = rows_i + di
                    sel_k = (k >= 0) & (k < Mi) & ((k % 4) == ck)
                    for dj in (-1, 0, 1):
                        l = rows_j + dj
                        sel = sel_k & (l >= 0) & (l < J) & ((l % 3) == cl)
                        if not np.any(sel):
                            continue
                        data.append(d[sel])
                        ri.append(row_id[sel])
                        ci.append((k * J + l)[sel])
        data = np.concatenate(data)
        ri = np.concatenate(ri)
        ci = np.concatenate(ci)
        N = Mi * J
        return sparse.csc_matrix((data, (ri, ci)), shape=(N, N))


def residual(mesh, u, eps):
    """Residual of the regularized equation at interior nodes for a full nodal field."""
    op = _Operator(mesh)
    return op.residual(np.asarray(u, dtype=float)[1:-1], eps, mesh.L)


def initial_guess(mesh):
    """Expanding-slice profile ``log sinh r`` rescaled to the boundary data."""
    r = mesh.node_radius()
    a, _ = mesh.boundary(mesh.psi)
    num = np.log(np.sinh(r)) - np.log(np.sinh(a))[None, :]
    den = np.log(np.sinh(mesh.R_L)) - np.log(np.sinh(a))
    return mesh.L * num / den[None, :]


@dataclass(frozen=True)
class RegularizedField:
    mesh: AnnulusMesh
    u: np.ndarray  # (M+1, J) nodal values
    epsilon: float
    residual_norm: float
    iterations: int = 0
    log: tuple = ()
    mp_tol: float | None = None  # None: roundoff level 1e-12 max(1, L)

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def max_principle_violation(self):
        """``max(-min u, max u - L, 0)``."""
        return float(max(-self.u.min(), self.u.max() - self.mesh.L, 0.0))

    @property
    def max_principle_ok(self):
        tol = 1e-12 * max(1.0, self.mesh.L) if self.mp_tol is None else self.mp_tol
        return self.max_principle_violation <= tol

    def evaluate(self, points):
        return evaluate_field(self.mesh, self.u, points)

    def sample_points(self, n, directions):
        return _mesh_points(self.mesh, directions)


def solve_regularized(mesh, epsilon, u0=None, tol=1e-10, max_iter=60, picard_iter=200,
                      require_max_principle=True, mp_tol=None):
    """Damped Newton for the regularized Dirichlet problem.

    Each Newton step is damped by backtracking on ``||R||_2``. If no reduction
    is found the iteration switches to frozen-coefficient (Picard) steps with
    the same line search, then returns to Newton. Raises :class:`SolverError`
    if ``||R||_inf < tol`` is not reached, or if ``0 <= u <= L`` fails by more
    than ``mp_tol`` (default: roundoff). On meshes with strongly sheared cells
    the nine-point stencil is not monotone and undershoots by ``O(h^2)``;
    pass an explicit ``mp_tol`` there (see :func:`interpolation_error`).
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    op = _Operator(mesh)
    L = mesh.L
    u = initial_guess(mesh) if u0 is None else np.array(u0, dtype=float)
    U = u[1:-1].copy()
    lines = []
    R = op.residual(U, epsilon, L)
    res = float(np.max(np.abs(R)))
    it = 0
    picard_left = picard_iter
    stall = 0
    while res >= tol and it < max_iter + picard_iter:
        it += 1
        Jm = op.jacobian(U, epsilon, L)
        dU = spsolve(Jm, -R.ravel()).reshape(U.shape)
        step, Rn, ok = _line_search(op, U, dU, R, epsilon, L)
        kind = "newton"
        if not ok and picard_left > 0:
            frozen = op.frozen_coefficients(U, epsilon, L)
            Jp = op.jacobian(U, epsilon, L, frozen=frozen)
            dU = spsolve(Jp, -R.ravel()).reshape(U.shape)
            step, Rn, ok = _line_search(op, U, dU, R, epsilon, L)
            kind = "picard"
            picard_left -= 1
        if not ok:
            stall += 1
            if stall > 3:
                break
            # accept the smallest tried step to escape a flat spot
        U = U + step * dU
        R = Rn
        new = float(np.max(np.abs(R)))
        lines.append(f"iter={it} kind={kind} step={step:.3g} res_inf={new:.3e}")
        log.debug(lines[-1])
        if new >= res and res < 1e3 * tol:
            stall += 1
            if stall > 3:
                res = new
                break
        res = new
    u = op.full(U, L)
    if res >= tol:
        raise SolverError(f"no convergence at eps={epsilon:g}: residual {res:.3e} after {it} iterations")
    fld = RegularizedField(mesh, u, float(epsilon), res, it, tuple(lines), mp_tol)
    if require_max_principle and not fld.max_principle_ok:
        raise SolverError(
            f"discrete maximum principle violated at eps={epsilon:g}: "
            f"min u = {u.min():.3e}, max u - L = {u.max() - L:.3e}"
        )
    return fld


def _line_search(op, U, dU, R, eps, L, c=1e-4, max_halvings=30):
    f0 = float(np.sum(R * R))
    step = 1.0
    for _ in range(max_halvings):
        Un = U + step * dU
        Rn = op.residual(Un, eps, L)
        if np.all(np.isfinite(Rn)):
            f1 = float(np.sum(Rn * Rn))
            if f1 <= (1.0 - 2.0 * c * step) * f0:
                return step, Rn, True
        step *= 0.5
    return step, Rn, False


# --- radial oracle ----------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    spread: np.ndarray  # |z| difference between extreme inward launches
    slope0: float
    L: float
    epsilon: float

    def __call__(self, r):
        return np.interp(r, self.r, self.u)


def radial_oracle(r0, R_L, epsilon, n, L=None, num=4001, rtol=1e-12, atol=1e-14):
    """Spherically symmetric regularized profile.

    With ``z = u'/W`` (so ``u' = eps z / sqrt(1 - z^2)``) the radial equation
    ``s^(1-n) (s^(n-1) u'/W)' = W`` becomes the first-order problem

        (s^(n-1) z)' = s^(n-1) eps / sqrt(1 - z^2),

    decoupled from ``u``. Its linearisation grows like
    ``exp(int z W^3 / eps^2 dr)`` outward, so shooting from ``Sigma_0`` is
    ill-conditioned. Instead the ``z``-equation is integrated inward from
    ``R_L``, where every trajectory with ``z > 0`` contracts onto the regular
    solution. Two launches 10% below and above the quasi-steady root near
    ``z = 1`` bracket it; their spread is returned as an error bound. ``u`` is then
    recovered by quadrature from ``u(r0) = 0``. The outer Dirichlet value enters only
    through a boundary layer at ``R_L`` of height at most
    ``(1 - z^2)/2`` and is reported as ``L_reached``.
    """
    if L is None:
        L = level_cap(r0, R_L, n)
    k = n - 1

    # z = tanh(w) removes the singularity at |z| = 1:
    # w' = eps cosh(w)^3 - k coth(r) sinh(w) cosh(w)
    def rhs(r, y):
        w = y[0]
        return [epsilon * np.cosh(w) ** 3 - k / np.tanh(r) * np.sinh(w) * np.cosh(w)]

    def jac(r, y):
        w = y[0]
        return [[3.0 * epsilon * np.cosh(w) ** 2 * np.sinh(w) - k / np.tanh(r) * np.cosh(2.0 * w)]]

    grid = np.linspace(R_L, r0, num)

    def inward(wL):
        sol = solve_ivp(rhs, (R_L, r0), [wL], method="Radau", jac=jac, rtol=rtol,
                        atol=atol, t_eval=grid)
        if sol.status != 0:
            raise SolverError(f"inward integration failed: {sol.message}")
        return sol

    # launch near the quasi-steady branch eps cosh(w)^2 = k coth(R_L) tanh(w)
    # (the root with z close to 1) and bracket it by +-10%
    c = k / np.tanh(R_L)

    def steady(w):
        return epsilon * np.cosh(w) ** 2 - c * np.tanh(w)

    if epsilon >= c:
        raise SolverError("epsilon too large for a regular radial profile")
    w_top = np.arccosh(np.sqrt(c / epsilon)) + 1.0
    # the steady function is negative between its two roots; its minimum sits
    # where d/dw = 0, i.e. eps sinh(2w) = c sech(w)^2
    w_mid = brentq(lambda w: epsilon * np.sinh(2.0 * w) * np.cosh(w) ** 2 - c, 0.0, w_top)
    if steady(w_mid) >= 0.0:
        raise SolverError("epsilon too large for a regular radial profile")
    w_star = brentq(steady, w_mid, w_top + 10.0)
    lo = inward(0.9 * w_star)
    hi = inward(1.1 * w_star)
    w = 0.5 * (lo.y[0] + hi.y[0])[::-1]
    r = lo.t[::-1]
    spread = np.abs(hi.y[0] - lo.y[0])[::-1]
    du = epsilon * np.sinh(w)
    u = cumulative_simpson(du, x=r, initial=0.0)
    return RadialProfile(r, u, du, spread, float(du[0]), float(L), float(epsilon))


# --- fields on the mesh -------------------------------------------------------------


def _polar_of(points):
    x = np.asarray(points, dtype=float)
    rho = np.linalg.norm(x, axis=-1)
    cospsi = np.clip(x[..., 0] / np.where(rho > 0, rho, 1.0), -1.0, 1.0)
    return np.log1p(rho) - np.log1p(-rho), np.arccos(cospsi)


def _xi_of(mesh, r, psi):
    psi = np.asarray(psi, dtype=float)
    a = mesh.boundary(psi.ravel())[0].reshape(psi.shape)
    Gv = (r - a) / (mesh.R_L - a)
    if mesh.stretch == 0.0:
        return Gv
    k = mesh.stretch
    return np.log1p(Gv * math.expm1(k)) / k


def evaluate_field(mesh, u, points):
    """Bilinear interpolation of a nodal field at ball points.

    Points inside ``Omega_0`` get ``0``; points beyond ``R_L`` get NaN.
    """
    r, psi = _polar_of(points)
    xi = _xi_of(mesh, r, psi)
    # extend in psi by even reflection so the axis lies inside the grid
    psi_ext = np.concatenate([[-mesh.psi[0]], mesh.psi, [2 * np.pi - mesh.psi[-1]]])
    u_ext = np.concatenate([u[:, :1], u, u[:, -1:]], axis=1)
    interp = RegularGridInterpolator((mesh.xi, psi_ext), u_ext, method="linear",
                                     bounds_error=False, fill_value=np.nan)
    out = interp(np.stack([np.clip(xi, 0.0, 1.0), psi], axis=-1))
    out = np.where(xi < 0.0, 0.0, out)
    out = np.where(xi > 1.0 + 1e-12, np.nan, out)
    return out


def _mesh_points(mesh, directions):
    r = mesh.node_radius()
    rho = np.tanh(0.5 * r).ravel()
    psi = np.broadcast_to(mesh.psi[None, :], r.shape).ravel()
    n = mesh.n
    e = np.zeros(n)
    e[0] = 1.0
    return np.concatenate(
        [rho[:, None] * (np.cos(psi)[:, None] * e + np.sin(psi)[:, None] * np.asarray(w)) for w in directions]
    )


def interpolation_error(mesh, func=None):
    """Max error of :func:`evaluate_field` on a held-out analytic field.

    The default field is the expanding slice from ``r- = min a``, sampled at
    the nodes and evaluated at cell centres (meridian plane).
    """
    n = mesh.n
    r_minus = mesh.inner.r_min()
    if func is None:
        def func(r):
            return (n - 1.0) * (np.log(np.sinh(r)) - np.log(np.sinh(r_minus)))
    u = func(mesh.node_radius())
    xc = 0.5 * (mesh.xi[1:] + mesh.xi[:-1])
    pc = 0.5 * (mesh.psi[1:] + mesh.psi[:-1])
    r = mesh.radius(xc, pc)
    X, P = np.meshgrid(xc, pc, indexing="ij")
    rho = np.tanh(0.5 * r)
    pts = np.zeros(r.shape + (n,))
    pts[..., 0] = rho * np.cos(P)
    pts[..., 1] = rho * np.sin(P)
    approx = evaluate_field(mesh, u, pts)
    return float(np.nanmax(np.abs(approx - func(r))))


def field_to_csv(fld):
    """Node rows ``r,psi,u`` with a header line."""
    r = fld.mesh.node_radius()
    psi = np.broadcast_to(fld.mesh.psi[None, :], r.shape)
    buf = io.StringIO()
    buf.write("r,psi,u\n")
    for a, b, c in zip(r.ravel(), psi.ravel(), fld.u.ravel()):
        buf.write(f"{float(a)!r},{float(b)!r},{float(c)!r}\n")
    return buf.getvalue()


# --- closed forms for the off-centre sphere -------------------------------------


def offset_sphere_graph(grid, radius, shift):
    """Geodesic sphere of ``radius`` whose centre lies at distance ``shift`` on the axis.

    In polar coordinates it is ``r(psi) = artanh(B/A) + arccosh(cosh(radius)/sqrt(A^2 - B^2))``
    with ``A = cosh(shift)`` and ``B = sinh(shift) cos(psi)``.
    """
    if not 0.0 <= shift < radius:
        raise ValueError("need 0 <= shift < radius so the origin is enclosed")
    A = np.cosh(shift)
    B = np.sinh(shift) * np.cos(grid.psi)
    r = np.arctanh(B / A) + np.arccosh(np.cosh(radius) / np.sqrt(A * A - B * B))
    return RadialGraph(grid, r, f"offset sphere a={radius:g} c={shift:g}")


def offset_sphere_u(r, psi, radius, shift, n):
    """Weak IMCF arrival time of the off-centre sphere: the slice solution about its centre."""
    d = np.arccosh(np.cosh(r) * np.cosh(shift) - np.sinh(r) * np.sinh(shift) * np.cos(psi))
    return (n - 1.0) * (np.log(np.sinh(d)) - np.log(np.sinh(radius)))


# --- level sets -------------------------------------------------------------------


class LevelSetEscaped(SolverError):
    """The requested level reaches the outer boundary of the mesh."""


def _axis_extended(mesh, u):
    """Field with columns added on the axis (``psi = 0, pi``) by even extrapolation."""
    left = (9.0 * u[:, 0] - u[:, 1]) / 8.0
    right = (9.0 * u[:, -1] - u[:, -2]) / 8.0
    psi = np.concatenate([[0.0], mesh.psi, [np.pi]])
    return psi, np.column_stack([left, u, right])


def level_contours(mesh, u, t):
    """Marching-squares contours of ``u = t`` as lists of ``(r, psi)`` arrays."""
    from skimage.measure import find_contours

    psi_ext, ue = _axis_extended(mesh, np.asarray(u, dtype=float))
    out = []
    for c in find_contours(ue, t):
        rows, cols = c[:, 0], c[:, 1]
        # a contour inside the last cell touches the Dirichlet row
        if np.any(rows > mesh.M - 1):
            raise LevelSetEscaped(f"level t={t:g} reaches the outer boundary; increase R_L")
        xi = rows / mesh.M
        psi = np.interp(cols, np.arange(psi_ext.shape[0]), psi_ext)
        a, _ = mesh.boundary(psi)
        G, _ = mesh.G(xi)
        r = a + G * (mesh.R_L - a)
        out.append((r, psi))
    return out


@dataclass(frozen=True)
class LevelSet:
    t: float
    cloud: object  # PointCloud
    graph: RadialGraph | None
    contours: tuple  # ((r, psi), ...)

    @property
    def area(self):
        """Area from the graph when available, otherwise from the contours."""
        if self.graph is not None:
            return area(self.graph)
        n = self.cloud.points.shape[1]
        return float(sum(meridian_curve_area(r, p, n) for r, p in self.contours))


def _column_roots(mesh, u, t):
    # crossings of u = t along each xi column (PCHIP in xi)
    psi_ext, ue = _axis_extended(mesh, np.asarray(u, dtype=float))
    xi = mesh.xi
    roots = np.full(psi_ext.shape[0], np.nan)
    count = np.zeros(psi_ext.shape[0], dtype=int)
    for j in range(psi_ext.shape[0]):
        col = ue[:, j] - t
        sgn = np.sign(col)
        crossings = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
        exact = np.nonzero(col == 0.0)[0]
        count[j] = crossings.size + exact.size
        if count[j] != 1:
            continue
        if exact.size:
            roots[j] = xi[exact[0]]
            continue
        k = crossings[0]
        lo, hi = max(0, k - 2), min(mesh.M, k + 3)
        pc = PchipInterpolator(xi[lo : hi + 1], col[lo : hi + 1])
        roots[j] = brentq(pc, xi[k], xi[k + 1], xtol=1e-14)
    return psi_ext, roots, count


def extract_levelset(fld, t, num_nodes=None):
    """Level set ``{u = t}`` as a point cloud, plus a radial graph if it is one.

    ``t = 0`` returns ``Sigma_0``. The graph is built column by column
    (single crossing of ``u = t`` in every ``xi`` column) and resampled on a
    uniform polar grid with a clamped cubic spline (``r' = 0`` on the axis).
    """
    from .reflect import PointCloud, cloud_from_graph

    mesh = fld.mesh
    n = mesh.n
    if t == 0.0:
        g = mesh.inner
        return LevelSet(0.0, cloud_from_graph(g, 0.0), g, ((g.r.copy(), g.psi.copy()),))
    if not 0.0 < t < mesh.L:
        raise ValueError(f"level must lie in (0, L) = (0, {mesh.L:g})")
    cont = level_contours(mesh, fld.u, t)
    if not cont:
        raise SolverError(f"no contour found at level t={t:g}")
    pts = []
    for r, psi in cont:
        rho = np.tanh(0.5 * r)
        p = np.zeros((r.shape[0], n))
        p[:, 0] = rho * np.cos(psi)
        p[:, 1] = rho * np.sin(psi)
        pts.append(p)
    cloud = PointCloud(np.concatenate(pts), float(t), f"u={t:g}")
    graph = None
    psi_ext, roots, count = _column_roots(mesh, fld.u, t)
    if np.all(count == 1):
        a, _ = mesh.boundary(psi_ext)
        G, _ = mesh.G(roots)
        r_ext = a + G * (mesh.R_L - a)
        grid = PolarGrid(n, num_nodes or 2 * mesh.J + 1)
        spline = CubicSpline(psi_ext, r_ext, bc_type=((1, 0.0), (1, 0.0)))
        graph = RadialGraph(grid, spline(grid.psi), f"level t={t:g}")
    return LevelSet(float(t), cloud, graph, tuple(cont))


# --- gradients, jumps, audit --------------------------------------------------------


def _node_gradient(mesh, u):
    op = _Operator(mesh)
    return np.sqrt(np.maximum(op.grad_sq(np.asarray(u, dtype=float), upwind=False), 0.0))


def gradient_norm(fld, upwind=False):
    """``|grad u|_g`` at the nodes (centred differences by default)."""
    op = _Operator(fld.mesh)
    return np.sqrt(np.maximum(op.grad_sq(np.asarray(fld.u), upwind=upwind), 0.0))


def gradient_at(fld, r, psi):
    """``|grad u|_g`` interpolated at polar points ``(r, psi)``."""
    mesh = fld.mesh
    grad = gradient_norm(fld)
    xi = _xi_of(mesh, np.asarray(r, dtype=float), np.asarray(psi, dtype=float))
    psi_ext = np.concatenate([[-mesh.psi[0]], mesh.psi, [2 * np.pi - mesh.psi[-1]]])
    g_ext = np.concatenate([grad[:, :1], grad, grad[:, -1:]], axis=1)
    interp = RegularGridInterpolator((mesh.xi, psi_ext), g_ext, bounds_error=False, fill_value=np.nan)
    return interp(np.stack([xi, psi], axis=-1))


def gradient_noise(mesh, epsilon):
    """Spherical-case noise floor of ``|grad u|_g`` at the resolution of ``mesh``.

    Solves the regularized problem for the slice ``r = min a`` on a mesh with
    the same ``M``, ``J`` and ``R_L`` and returns the largest deviation of the
    nodal gradient from the radial profile's ``u'`` at the same ``epsilon``,
    over interior rows with ``u <= L - 1``.
    """
    from .starshape import sphere

    n = mesh.n
    r0 = mesh.inner.r_min()
    sm = AnnulusMesh(sphere(PolarGrid(n, mesh.inner.grid.num_nodes), r0), mesh.R_L, mesh.M, mesh.J,
                     mesh.stretch)
    u = None
    for eps in _continuation(epsilon):
        u = solve_regularized(sm, eps, u0=u).u
    prof = radial_oracle(r0, sm.R_L, epsilon, n)
    grad = _node_gradient(sm, u)
    r = sm.node_radius()
    exact = np.interp(r, prof.r, prof.du)
    mask = u <= sm.L - 1.0
    mask[0] = mask[-1] = False
    return float(np.max(np.abs(grad - exact)[mask]))


def _continuation(epsilon, start=0.2):
    eps = [start]
    while eps[-1] / 2.0 > epsilon * (1 + 1e-12):
        eps.append(eps[-1] / 2.0)
    if eps[-1] != epsilon:
        eps.append(epsilon)
    return [e for e in eps if e >= epsilon]


def detect_jumps(fld, delta, min_nodes=9, levels_cap=1.0):
    """Plateaus ``{|grad u|_g < delta}`` of positive measure.

    Connected components (4-neighbour) of interior nodes with
    ``u <= L - levels_cap`` are kept when they hold at least ``min_nodes``
    nodes. Each yields ``(t, |Sigma_t|, |Sigma_t^+|)`` with ``t`` the smallest
    value of ``u`` on the plateau, ``Sigma_t`` the level set at that value
    (``Sigma_0`` for a plateau attached to it) and ``Sigma_t^+`` the level set
    at the largest value on the plateau.
    """
    from scipy import ndimage

    mesh = fld.mesh
    u = np.asarray(fld.u)
    grad = _node_gradient(mesh, u)
    mask = grad < delta
    mask[-1] = False
    mask &= u <= mesh.L - levels_cap
    labels, num = ndimage.label(mask)
    vol = mesh.node_volumes() * unit_sphere_area(mesh.n - 2)
    report = []
    for lab in range(1, num + 1):
        comp = labels == lab
        if comp.sum() < min_nodes:
            continue
        t_lo = float(u[comp].min())
        t_hi = float(u[comp].max())
        if comp[0].any() or t_lo <= 1e-12:
            t_lo = 0.0
            a_minus = area(mesh.inner)
        else:
            a_minus = extract_levelset(fld, t_lo).area
        a_plus = extract_levelset(fld, t_hi).area
        report.append({
            "t": t_lo,
            "t_plus": t_hi,
            "area": float(a_minus),
            "area_plus": float(a_plus),
            "plateau_volume": float(vol[comp].sum()),
            "nodes": int(comp.sum()),
        })
    report.sort(key=lambda e: e["t"])
    return report


def _shell_integral(mesh, integrand, r_lo, r_hi):
    """Signed ``int`` of a nodal ``integrand`` between ``r_lo(psi_j)`` and ``r_hi(psi_j)``.

    Column-wise cubic splines in ``xi`` times the exact ``sin^(n-2)`` cell weights.
    """
    r, bt, _ = mesh.metric(mesh.xi, mesh.psi)
    dens = integrand * bt * np.sinh(r) ** (mesh.n - 1)
    lo = np.clip(_xi_of(mesh, np.asarray(r_lo, dtype=float), mesh.psi), 0.0, 1.0)
    hi = np.clip(_xi_of(mesh, np.asarray(r_hi, dtype=float), mesh.psi), 0.0, 1.0)
    S = mesh.cell_sin()
    total = 0.0
    for j in range(mesh.J):
        total += S[j] * CubicSpline(mesh.xi, dens[:, j]).integrate(lo[j], hi[j])
    return unit_sphere_area(mesh.n - 2) * total


def _graph_at(g, psi):
    return CubicSpline(g.psi, g.r, bc_type=((1, 0.0), (1, 0.0)))(psi)


def _check_competitor(mesh, F):
    rF = _graph_at(F, mesh.psi)
    a = _graph_at(mesh.inner, F.psi)
    if np.any(F.r < a - 1e-12) or np.any(rF < mesh.boundary(mesh.psi)[0] - 1e-12):
        raise ValueError("competitor does not contain Omega_0")
    if np.any(rF > mesh.R_L):
        raise ValueError("competitor leaves the mesh")
    return rF


def J_functional(fld, F, grad=None):
    """``J_u(F) = |dF| - int_{F \\ Omega_0} |grad u|`` for a radial-graph domain ``F``."""
    mesh = fld.mesh
    if grad is None:
        grad = gradient_norm(fld)
    rF = _check_competitor(mesh, F)
    return area(F) - _shell_integral(mesh, grad, mesh.boundary(mesh.psi)[0], rF)


def J_difference(fld, F, E, grad=None):
    """``J_u(F) - J_u(E)`` integrating only between the two boundaries."""
    mesh = fld.mesh
    if grad is None:
        grad = gradient_norm(fld)
    rF = _check_competitor(mesh, F)
    rE = _check_competitor(mesh, E)
    return area(F) - area(E) - _shell_integral(mesh, grad, rE, rF)


def audit_noise(mesh, levels=6):
    """Quadrature noise of :func:`J_difference` on the mesh.

    Uses the expanding-slice field ``(n-1) log(sinh r / sinh r-)``, for which
    ``J(B_b) - J(B_a)`` vanishes exactly for concentric balls.
    """
    from .starshape import sphere

    n = mesh.n
    r_minus = mesh.inner.r_min()
    u = (n - 1.0) * (np.log(np.sinh(mesh.node_radius())) - np.log(np.sinh(r_minus)))
    fake = RegularizedField(mesh, u, 0.0, 0.0)
    grad = gradient_norm(fake)
    grid = PolarGrid(n, mesh.inner.grid.num_nodes)
    radii = np.linspace(mesh.inner.r_max() + 0.05, mesh.R_L - 0.3, levels)
    balls = [sphere(grid, rho) for rho in radii]
    return float(max(abs(J_difference(fake, b, a, grad)) for a, b in zip(balls, balls[1:])))


@dataclass
class AuditReport:
    t: float
    J_level: float
    competitors: dict  # name -> (J, margin)
    tol: float

    @property
    def passed(self):
        return all(m >= -self.tol for _, m in self.competitors.values())

    def to_text(self):
        lines = [f"t: {float(self.t)!r}", f"J_level: {float(self.J_level)!r}", f"tol: {float(self.tol)!r}",
                 f"passed: {str(self.passed).lower()}"]
        for k in sorted(self.competitors):
            J, m = self.competitors[k]
            lines.append(f"{k}: J={float(J)!r} margin={float(m)!r}")
        return "\n".join(lines) + "\n"


def standard_competitors(fld, t, dt=0.1, bump=0.05, bump_psi=None):
    """Competitors ``Omega_{t+dt}``, ``Omega_t`` with an outward bump, and
    ``Omega_t`` united with a concentric ball of radius ``mean r``."""
    lev = extract_levelset(fld, t)
    g = lev.graph
    if g is None:
        raise SolverError(f"level t={t:g} is not a radial graph")
    out = {"level": g}
    if t + dt < fld.mesh.L - 1.0:
        nxt = extract_levelset(fld, t + dt, g.grid.num_nodes).graph
        if nxt is not None:
            out["level_plus"] = nxt
    centre = np.pi / 2 if bump_psi is None else bump_psi
    width = 0.3
    hat = np.clip(1.0 - np.abs(g.psi - centre) / width, 0.0, None) ** 2
    out["bump"] = g.with_r(g.r + bump * hat, "bump")
    out["ball_union"] = g.with_r(np.maximum(g.r, np.mean(g.r)), "ball union")
    return out


def minimization_audit(fld, t, competitors=None, tol=None):
    """Compare ``J_u(Omega_t)`` with ``J_u(F)`` for each competitor ``F``.

    ``competitors`` maps names to radial graphs containing ``Omega_0``
    (default :func:`standard_competitors`). ``tol`` defaults to ten times
    :func:`audit_noise` on the same mesh.
    """
    lev = extract_levelset(fld, t)
    if lev.graph is None:
        raise SolverError(f"level t={t:g} is not a radial graph")
    if competitors is None:
        competitors = standard_competitors(fld, t)
        competitors.pop("level", None)
    if tol is None:
        tol = 10.0 * audit_noise(fld.mesh)
    grad = gradient_norm(fld)
    J0 = J_functional(fld, lev.graph, grad)
    res = {}
    for name, F in competitors.items():
        d = J_difference(fld, F, lev.graph, grad)
        res[name] = (float(J0 + d), float(d))
    return AuditReport(float(t), float(J0), res, float(tol))


# --- driver -----------------------------------------------------------------------


def _warm_start(mesh, eps, mp_tol=None, eps_max=10.0):
    """Starting field for ``eps``: None if Newton converges from the default
    guess, otherwise the solution at ``2 eps`` (recursively)."""
    try:
        solve_regularized(mesh, eps, mp_tol=mp_tol, max_iter=30, picard_iter=30)
        return None
    except SolverError:
        if 2.0 * eps > eps_max:
            raise
    u = _warm_start(mesh, 2.0 * eps, mp_tol, eps_max)
    return solve_regularized(mesh, 2.0 * eps, u0=u, mp_tol=mp_tol).u


@dataclass
class WeakFlowResult:
    mesh: AnnulusMesh
    field: RegularizedField
    fields: list
    cauchy: list  # max |u_k - u_{k-1}| on {u <= L - 1}
    cauchy_decreasing: bool
    level_sets: dict = field(default_factory=dict)
    jump_report: list = field(default_factory=list)
    delta: float | None = None

    @property
    def u(self):
        return self.field.u

    def evaluate(self, points):
        return self.field.evaluate(points)

    def sample_points(self, n, directions):
        return self.field.sample_points(n, directions)


def weak_limit(mesh, epsilon_schedule=(0.2, 0.1, 0.05, 0.025), levels=(), delta=None,
               jumps=True, num_nodes=None, mp_tol=None):
    """Solve along a decreasing ``epsilon`` schedule with warm starts.

    Successive fields are compared on ``{u <= L - 1}``; if these Cauchy
    differences fail to decrease, ``cauchy_decreasing`` is False (refine the
    mesh). Level sets are extracted from the final field; jumps are detected
    with threshold ``delta`` (default: ten times :func:`gradient_noise`).
    ``mp_tol`` is passed to :func:`solve_regularized`.
    """
    sched = list(epsilon_schedule)
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ValueError("epsilon schedule must be strictly decreasing")
    fields = []
    u = _warm_start(mesh, sched[0], mp_tol)
    for eps in sched:
        fld = solve_regularized(mesh, eps, u0=u, mp_tol=mp_tol)
        fields.append(fld)
        u = fld.u
    cauchy = []
    for a, b in zip(fields, fields[1:]):
        m = (a.u <= mesh.L - 1.0) & (b.u <= mesh.L - 1.0)
        cauchy.append(float(np.max(np.abs(a.u - b.u)[m])))
    dec = all(y < x for x, y in zip(cauchy, cauchy[1:]))
    res = WeakFlowResult(mesh, fields[-1], fields, cauchy, dec)
    for t in levels:
        res.level_sets[float(t)] = extract_levelset(fields[-1], float(t), num_nodes)
    if jumps:
        if delta is None:
            delta = 10.0 * gradient_noise(mesh, sched[-1])
        res.delta = float(delta)
        res.jump_report = detect_jumps(fields[-1], delta)
    return res


def weak_trace(result, times):
    """:class:`~hypimcf.funcs.FunctionalTrace` along extracted level sets.

    ``H`` in the ``fOverH`` column is ``|grad u|_g`` interpolated at the graph
    nodes; the remaining columns come from the graph itself. Levels that are
    not radial graphs are skipped.
    """
    from .funcs import FunctionalTrace

    fld = result.field if isinstance(result, WeakFlowResult) else result
    tr = FunctionalTrace(fld.mesh.n)
    for t in sorted(times):
        g = extract_levelset(fld, float(t)).graph
        if g is None:
            continue
        H = gradient_at(fld, g.r, g.psi) if t > 0 else None
        tr.record(float(t), g, H)
    return tr
