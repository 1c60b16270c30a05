"""Expanding slice under IMCF.

A slice r = r0 flows by sinh r(t) = e^(t/(n-1)) sinh r0. The parametric
solver should track this to RK4 accuracy, keep |Sigma_t| e^(-t) fixed and
hold Q at its sharp value.
"""
import numpy as np

from hypimcf.flows import expanding_sphere, imcf_run
from hypimcf.funcs import sharp_constant
from hypimcf.starshape import PolarGrid, sphere

n, r0 = 3, 1.0
st = imcf_run(sphere(PolarGrid(n, 257), r0), 2.0, dt=1e-3, sample_dt=0.25)
tr = st.history

print(f"{'t':>5} {'r (flow)':>12} {'r (exact)':>12} {'|S|e^-t':>12} {'Q - c':>10}")
c = sharp_constant(n)
for row in tr.rows:
    t = row["t"]
    # area of a slice determines its radius
    r = np.arcsinh(np.sqrt(row["area"] / (4 * np.pi)))
    print(f"{t:5.2f} {r:12.8f} {expanding_sphere(r0, n, t):12.8f} "
          f"{row['area'] * np.exp(-t):12.8f} {row['Q'] - c:10.2e}")
