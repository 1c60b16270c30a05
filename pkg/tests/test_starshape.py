import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypimcf.starshape import (
    PolarGrid,
    RadialGraph,
    area,
    bulk_potential,
    cosine_coefficients,
    derivatives,
    dumbbell,
    geometry,
    graph_from_function,
    graph_from_text,
    graph_to_text,
    gradient_bound_check,
    inverse_curvature_integral,
    mean_curvature_oracle,
    meridian_curve_area,
    perturbed_sphere,
    potential_integral,
    sphere,
    support_bound,
    support_integral,
    unit_sphere_area,
    weighted_total_curvature,
)

S1, C1 = math.sinh(1.0), math.cosh(1.0)


def test_unit_sphere_areas():
    assert np.isclose(unit_sphere_area(1), 2 * np.pi)
    assert np.isclose(unit_sphere_area(2), 4 * np.pi)
    assert np.isclose(unit_sphere_area(3), 2 * np.pi**2)


def test_grid_validation():
    with pytest.raises(ValueError):
        PolarGrid(2, 64)
    with pytest.raises(ValueError):
        PolarGrid(8, 64)
    with pytest.raises(ValueError):
        PolarGrid(3, 15)
    g = PolarGrid(4, 33)
    assert g.psi[0] == 0.0 and g.psi[-1] == np.pi and np.all(np.diff(g.psi) > 0)
    assert np.isclose(g.h, np.pi / 32)


def test_graph_rejects_nonpositive(grid3):
    r = np.ones(grid3.num_nodes)
    r[5] = 0.0
    with pytest.raises(ValueError):
        RadialGraph(grid3, r)
    with pytest.raises(ValueError):
        sphere(grid3, 0.0)


def test_sphere_closed_forms(grid3):
    g = sphere(grid3, 1.0)
    geo = geometry(g)
    assert np.isclose(area(g), 4 * np.pi * S1**2, rtol=1e-8)
    assert np.isclose(area(g), 17.355393, atol=1e-5)
    assert np.isclose(bulk_potential(g), 4 * np.pi * S1**3 / 3, rtol=1e-8)
    assert np.isclose(support_integral(g), 3 * bulk_potential(g), rtol=1e-12)
    assert np.isclose(support_integral(g), 20.3961, atol=1e-4)
    assert np.isclose(weighted_total_curvature(g), 8 * np.pi * C1**2 * S1, rtol=1e-8)
    assert np.allclose(geo.H, 2 * C1 / S1, rtol=1e-12)
    assert np.isclose(geo.H[0], 2.6260706, atol=1e-7)
    assert np.allclose(geo.phi, S1, rtol=1e-14)
    assert np.all(geo.grad_r == 0.0)
    assert np.all(geo.area_element[1:-1] > 0)


def test_sphere_r2_curvature():
    g = sphere(PolarGrid(3, 257), 2.0)
    assert np.allclose(geometry(g).H, 2.0 / math.tanh(2.0), rtol=1e-12)


def test_degenerate_small_sphere(grid3):
    fns = (area, bulk_potential, weighted_total_curvature, support_integral)
    big = [f(sphere(grid3, 1e-3)) for f in fns]
    small = [f(sphere(grid3, 1e-4)) for f in fns]
    # each quantity scales at least linearly in r0
    assert all(0 < b <= 0.11 * a for a, b in zip(big, small))


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
def test_sphere_closed_forms_all_dimensions(n):
    grid = PolarGrid(n, 257)
    r0 = 0.8
    g = sphere(grid, r0)
    w = unit_sphere_area(n - 1)
    assert np.isclose(area(g), w * math.sinh(r0) ** (n - 1), rtol=1e-8)
    assert np.isclose(bulk_potential(g), w * math.sinh(r0) ** n / n, rtol=1e-8)
    H = geometry(g).H
    assert np.allclose(H * geometry(g).phi, (n - 1) * math.cosh(r0), rtol=1e-12)


def test_quadrature_converges_at_least_second_order():
    f = lambda psi: 1.0 + 0.1 * np.cos(2 * psi)
    errs = []
    ref = area(graph_from_function(PolarGrid(3, 2049), f))
    for m in (33, 65):
        errs.append(abs(area(graph_from_function(PolarGrid(3, m), f)) - ref))
    assert errs[0] / errs[1] >= 3.5


def test_derivatives_fourth_order():
    errs = []
    for m in (65, 129):
        grid = PolarGrid(3, m)
        d1, d2 = derivatives(1.0 + 0.1 * np.cos(2 * grid.psi), grid.h)
        errs.append(np.max(np.abs(d1 + 0.2 * np.sin(2 * grid.psi))))
    assert errs[0] / errs[1] > 12


def test_pole_derivative_vanishes(grid3):
    g = perturbed_sphere(grid3, 1.0, 0.1)
    geo = geometry(g)
    assert geo.dr[0] == 0.0 and geo.dr[-1] == 0.0


def test_curvature_matches_oracle_on_perturbed(grid3):
    g = perturbed_sphere(grid3, 1.0, 0.1)
    H = geometry(g).H
    nodes = range(0, grid3.num_nodes, 17)
    err = max(abs(mean_curvature_oracle(g, i, halfwidth=2) - H[i]) for i in nodes)
    assert err < 5e-3


def test_oracle_on_spheres(grid3):
    for r0 in (1.0, 2.0):
        g = sphere(grid3, r0)
        for node in (0, 100, 255):
            assert abs(mean_curvature_oracle(g, node) - 2 / math.tanh(r0)) < 1e-3
    assert np.isclose(2 / math.tanh(2.0), 2.0746294414550963, rtol=1e-14)


def test_cosine_coefficients_recover_modes():
    grid = PolarGrid(3, 65)
    a = cosine_coefficients(1.0 + 0.2 * np.cos(2 * grid.psi) - 0.05 * np.cos(5 * grid.psi))
    expected = np.zeros(65)
    expected[[0, 2, 5]] = [1.0, 0.2, -0.05]
    assert np.allclose(a, expected, atol=1e-14)


def test_gradient_bound_example():
    assert np.isclose(support_bound(2.0, 1.0), 1.2422218097715747, rtol=1e-14)
    assert abs(support_bound(2.0, 1.0) - 1.2422224) < 1e-6
    assert np.isinf(support_bound(1.0, 1.0))
    near = support_bound(1.0 + 1e-9, 1.0)
    assert near > 1e3


def test_gradient_bound_reports(grid3):
    assert gradient_bound_check(sphere(grid3, 1.0), 0.5).passed
    g = perturbed_sphere(grid3, 1.0, 0.1)
    rep = gradient_bound_check(g, 0.8)
    assert rep.precondition_met and rep.passed and rep.margin >= 0
    vac = gradient_bound_check(g, 0.95)
    assert not vac.precondition_met and not vac.passed
    assert vac.as_dict()["kind"] == "gradient_bound"


def test_inverse_curvature_rejects_non_mean_convex(grid3):
    g = dumbbell(grid3)
    with pytest.raises(ValueError):
        inverse_curvature_integral(g)


def test_dumbbell_shape(grid3):
    g = dumbbell(grid3)
    assert np.isclose(g.r_max(), 1.5, atol=1e-12)
    assert np.isclose(g.r[grid3.num_nodes // 2], 0.3, atol=1e-3)
    with pytest.raises(ValueError):
        dumbbell(grid3, power=3)
    with pytest.raises(ValueError):
        dumbbell(grid3, r_bulb=0.2, r_neck=0.3)


def test_meridian_area_matches_graph_area():
    grid = PolarGrid(3, 2049)
    g = perturbed_sphere(grid, 1.0, 0.2)
    assert np.isclose(meridian_curve_area(g.r, g.psi, 3), area(g), rtol=1e-6)


def test_text_round_trip(grid3):
    g = perturbed_sphere(grid3, 1.0, 0.1)
    text = graph_to_text(g)
    assert text.splitlines()[0] == "n=3,nodes=512"
    assert text.splitlines()[1] == "psi,r"
    back = graph_from_text(text)
    assert np.array_equal(back.r, g.r) and back.n == 3
    with pytest.raises(ValueError):
        graph_from_text("n=3,nodes=512\npsi,r\n0.0,1.0\n")


# --- properties -------------------------------------------------------------------

modes = st.lists(st.floats(-0.04, 0.04), min_size=1, max_size=4)


def smooth_graph(grid, r0, coeffs):
    r = r0 + sum(c * np.cos((k + 1) * grid.psi) for k, c in enumerate(coeffs))
    return RadialGraph(grid, r)


@given(st.floats(0.5, 2.0), modes, st.integers(3, 5))
def test_divergence_identity(r0, coeffs, n):
    g = smooth_graph(PolarGrid(n, 512), r0, coeffs)
    s = support_integral(g)
    assert abs(s - n * bulk_potential(g)) / s < 1e-4


@given(st.floats(0.5, 2.0), modes)
def test_integrated_potential_identity(r0, coeffs):
    g = smooth_graph(PolarGrid(3, 512), r0, coeffs)
    geo = geometry(g)
    lhs = g.grid.integrate(geo.H * geo.phi * geo.area_element)
    F = potential_integral(g)
    assert abs(lhs - 2 * F) / F < 1e-3


@given(st.floats(0.6, 1.5), modes, st.integers(0, 511))
def test_curvature_oracle_property(r0, coeffs, node):
    g = smooth_graph(PolarGrid(3, 512), r0, coeffs)
    H = geometry(g).H[node]
    assert abs(mean_curvature_oracle(g, node, halfwidth=2) - H) < 5e-3
