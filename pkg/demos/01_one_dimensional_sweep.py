"""Continuation ODE on a 1-d problem: mesh sweep, observed order, Newton.

Three targets at 0.25, 0.5, 0.75 with masses 0.3, 0.4, 0.3 and a uniform
source on [0, 1].  The exact potential comes from quantile inversion, so
the error of every run is known.

Run: python3 demos/01_one_dimensional_sweep.py
"""
# %%
import numpy as np

from sdot_ode import builtin_example, newton_solve, reference_solution_1d, solve_ivp
from sdot_ode.cells import laguerre_boundaries_1d

prob = builtin_example("E1")
ref = reference_solution_1d(prob)
print("exact potential:", np.round(ref, 6))
print("cell boundaries:", laguerre_boundaries_1d(prob, ref).boundaries)  # 0.3 and 0.7

# %% the ODE starts from log(mu) at t = 0 and marches to t = 1
steps = [1e-1, 1e-2, 1e-3]
errors = []
for h in steps:
    traj, rep = solve_ivp(prob, h, reference=ref)
    errors.append(rep.error)
    print(f"dt={h:g}  error={rep.error:.4e}  mass error={rep.measure_error:.2e}  "
          f"{rep.elapsed:.2f} s")

# %% observed order between consecutive meshes (third order in dt, roughly)
for (h1, e1), (h2, e2) in zip(zip(steps, errors), zip(steps[1:], errors[1:])):
    print(f"order {h1:g} -> {h2:g}: {np.log10(e1 / e2) / np.log10(h1 / h2):.2f}")

# %% the same problem with a cubic cost
cubic = builtin_example("E1", {"p": 3})
_, rep = solve_ivp(cubic, 1e-2, reference=reference_solution_1d(cubic))
print(f"p=3, dt=1e-2: error {rep.error:.4e}")

# %% Newton on the unregularised problem: for p=2 in 1-d the masses are
# linear in the potential, so one step is exact
rep = newton_solve(prob, reference=ref)
print(f"Newton from zero: {rep.status} in {rep.iterations} iteration(s), error {rep.error:.1e}")

# %% hybrid: a coarse ODE run is a good Newton start for the cubic cost
_, coarse = solve_ivp(cubic, 1e-2)
rep = newton_solve(cubic, coarse.potential, reference=reference_solution_1d(cubic))
print(f"ODE dt=0.01 then Newton: {rep.iterations} iterations, residuals",
      ", ".join(f"{r:.1e}" for r in rep.residual_history))
