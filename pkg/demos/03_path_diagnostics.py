"""What the path looks like near t = 1.

Traces along the E0 and E1 paths: the norm of the ODE right-hand side, the
restricted Hessian spectrum and the cell masses.  Two observations:

* the Hessian spectrum stays bounded away from zero and tends to the
  spectrum of the unregularised Jacobian, which is what makes the ODE
  well posed up to t = 1;
* close to t = 1, psi(t) is t times the final potential up to terms that
  vanish like exp(-c / (1 - t)), so psi'(t) tends to psi* rather than to
  zero and the traces are not clean power laws of (1 - t).

Run: python3 demos/03_path_diagnostics.py
"""
# %%
import numpy as np

from sdot_ode import builtin_example, solve_ivp
from sdot_ode.diagnostics import (
    eigen_error_trace,
    eigen_trace,
    mass_trace,
    power_law_fit,
    rhs_norm_trace,
)
from sdot_ode.linalg import restricted_eigenvalues
from sdot_ode.newton import newton_jacobian_1d, reference_solution_1d

for eid in ("E0", "E1"):
    prob = builtin_example(eid)
    ref = reference_solution_1d(prob)
    traj, rep = solve_ivp(prob, 1e-3)
    print(f"\n{eid}: final error {np.max(np.abs(traj.final - ref)):.2e}")

    # %% near t = 1 the path is linear in t
    for t in (0.5, 0.9, 0.99):
        k = traj.times.index(t)
        print(f"  t={t}: |psi(t) - t psi*| = {np.max(np.abs(traj.potentials[k] - t * ref)):.2e}")

    # %% |psi'| tends to |psi*|, not to zero
    rhs = rhs_norm_trace(traj)
    print(f"  |psi'| at t=0.999: {rhs.ordinate[-1, 0]:.4f}   |psi*|: {np.linalg.norm(ref):.4f}")

    # %% eigenvalues approach the unregularised spectrum
    lam_star = restricted_eigenvalues(-newton_jacobian_1d(prob, ref))
    eig = eigen_trace(prob, traj, every=100)
    print("  restricted spectrum at t=0.9:", np.round(eig.ordinate[9], 4), " limit:", lam_star)
    err = eigen_error_trace(eigen_trace(prob, traj), lam_star)

    # %% power-law fits over the whole run and over [0.5, 1)
    for window in ((0.0, 1.0), (0.5, 1.0)):
        f = power_law_fit(rhs, window)
        g = power_law_fit(err, window)
        print(f"  window {window}: |psi'| ~ {f.coefficient:.4g}(1-t)^{f.exponent:.4g} "
              f"(rms {f.rms_residual:.2f}); eig error ~ {g.coefficient:.4g}(1-t)^{g.exponent:.4g} "
              f"(rms {g.rms_residual:.2f})")

    # %% cell masses of psi(t) against the smoothed masses (which equal mu)
    m = mass_trace(prob, traj, every=250)
    for t, row in zip(m.abscissa, m.ordinate):
        print(f"  t={t:.2f} cells {np.round(row[:prob.n], 4)}")
