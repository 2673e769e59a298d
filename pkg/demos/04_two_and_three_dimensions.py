"""Problems in the unit square and cube.

In 2-d and 3-d the entropic derivatives still come from adaptive tensor
Gauss-Kronrod quadrature; only the final cell masses use a raster.
Newton needs a Jacobian of those raster masses, which it gets by finite
differences of a fractional (sub-pixel) raster.

Run: python3 demos/04_two_and_three_dimensions.py  (about 15 s; the 3-d
quadrature dominates)
"""
# %%
from sdot_ode import NewtonConfig, builtin_example, exact_solution, newton_solve, solve_ivp

# %% E4: three targets, quadratic cost, closed-form potential
prob, ref = builtin_example("E4"), exact_solution("E4")
for h in (1e-1, 1e-2):
    _, rep = solve_ivp(prob, h, reference=ref)
    print(f"E4 dt={h:g}: error {rep.error:.4e}, raster mass error {rep.measure_error:.1e}, "
          f"{rep.elapsed:.1f} s")
rep = newton_solve(prob, cfg=NewtonConfig(raster_resolution=256), reference=ref)
print(f"E4 Newton (256^2 raster): {rep.status} in {rep.iterations} iterations, error {rep.error:.1e}")

# %% E5: quartic cost
prob, ref = builtin_example("E5"), exact_solution("E5")
_, rep = solve_ivp(prob, 1e-1, reference=ref)
print(f"E5 dt=0.1: error {rep.error:.4e}")

# %% E7: 3-d, no closed form; judge by the cell masses
res = 128
prob = builtin_example("E7")
_, rep = solve_ivp(prob, 1e-1, raster_resolution=res)
print(f"E7 dt=0.1: measure error {rep.measure_error:.4e} at {res}^3, {rep.elapsed:.1f} s")
