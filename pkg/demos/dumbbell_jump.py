"""Jump of a dumbbell at t = 0.

Two bulbs joined through a narrow equatorial groove are not outer-minimizing:
filling the groove lowers the area. The weak flow replaces Omega_0 by its
hull at once, which shows up as a plateau of u next to Sigma_0. This takes
about a minute.
"""
from hypimcf.reflect import waiting_time
from hypimcf.starshape import PolarGrid, area, dumbbell
from hypimcf.weakflow import AnnulusMesh, interpolation_error, outer_radius, weak_limit

g = dumbbell(PolarGrid(3, 513))
mesh = AnnulusMesh(g, outer_radius(g.r_max(), 3, 5.0), 128, 96)
# sheared cells near the groove: the stencil undershoots at interpolation level
res = weak_limit(mesh, mp_tol=interpolation_error(mesh))

print(f"|Sigma_0| = {area(g):.4f}, waiting time T = {waiting_time(g.r_min(), g.r_max(), 3):.4f}")
print(f"plateau threshold delta = {res.delta:.4f}")
for e in res.jump_report:
    print(f"plateau: u in [{e['t']:.4f}, {e['t_plus']:.4f}], {e['nodes']} nodes, "
          f"|Sigma_t| = {e['area']:.4f} -> |Sigma_t^+| = {e['area_plus']:.4f}")
