"""Targets far outside the source support: where plain Newton breaks down.

Four targets, two of them more than two units left of the source box
[0, 1].  From a zero potential only one Laguerre cell meets the box, so the
Newton Jacobian is singular.  The continuation starts from the entropic
problem at t = 0, where every target owns mass, and never meets that wall.

Run: python3 demos/02_targets_outside_the_domain.py
"""
# %%
import numpy as np

from sdot_ode import builtin_example, cell_masses, newton_solve, reference_solution_1d, solve_ivp

prob = builtin_example("E3")
ref = reference_solution_1d(prob)
print("targets:", prob.y[:, 0], " masses:", prob.mu)
print("cell masses at zero potential:", cell_masses(prob, np.zeros(prob.n)))

# %% Newton from zero stops at the first step
rep = newton_solve(prob)
print("Newton:", rep.status, "-", rep.message)

# %% the ODE reaches the exact potential
for h in (1e-1, 1e-2):
    _, rep = solve_ivp(prob, h, reference=ref)
    print(f"ODE dt={h:g}: error {rep.error:.4e}, masses {np.round(cell_masses(prob, np.array(rep.potential)), 4)}")

# %% and Newton converges when started from the ODE answer
rep = newton_solve(prob, rep.potential, reference=ref)
print(f"Newton from the ODE answer: {rep.status}, {rep.iterations} iteration(s), error {rep.error:.1e}")
