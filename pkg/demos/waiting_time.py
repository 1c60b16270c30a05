"""Waiting time for an off-centre sphere.

A geodesic sphere of radius 1.5 centred at distance 0.5 from the origin has
r- = 1 and r+ = 2 about the origin. Its level sets under weak IMCF are the
concentric spheres about its own centre; the reflection argument only
guarantees star-shapedness about the origin after T = 2 log(sinh 2 / sinh 1).
"""
import math

from hypimcf.reflect import certify_star_shaped, waiting_time
from hypimcf.starshape import PolarGrid, gradient_bound_check
from hypimcf.weakflow import AnnulusMesh, offset_sphere_graph, outer_radius, weak_limit

g = offset_sphere_graph(PolarGrid(3, 257), 1.5, 0.5)
T = waiting_time(g.r_min(), g.r_max(), 3)
mesh = AnnulusMesh(g, outer_radius(g.r_max(), 3, 3.5), 128, 64)
levels = (1.0, 2.0, 2.4, 2.8, 3.2)
res = weak_limit(mesh, levels=levels, jumps=False)

print(f"T = {T:.7f}; Cauchy differences {['%.1e' % c for c in res.cauchy]}")
for t in levels:
    lev = res.level_sets[t]
    star = certify_star_shaped(lev.cloud, math.tanh(1.0))
    grad = gradient_bound_check(lev.graph, 2.0)
    d = math.asinh(math.exp(t / 2) * math.sinh(1.5))
    print(f"t={t:3.1f} {'after' if t > T else 'before'} T: star={star.passed!s:5} "
          f"grad_bound={grad.passed!s:5} (precondition {grad.precondition_met!s:5}) "
          f"area/exact={lev.area / (4 * math.pi * math.sinh(d) ** 2):.6f}")
