# # Periodic cell problems and homogenized limits
#
# At frozen slow time the profile `S(theta, x)` solves a theta-periodic
# parabolic problem.  Periodicity is the fixed point of the period map.

# %%
import numpy as np

from sandhomog import cell_solver as cs
from sandhomog import coeffs
from sandhomog.grid import Boundary, Grid

law = coeffs.default_flux_law()
grid = Grid(16, 16)
forcing = coeffs.default_forcing("short", law)
problem = cs.CellProblem(grid, coeffs.default_constants(mu=0.1, nu=0.1), law, forcing, theta_steps=64)
prof = cs.solve_mu_nu(problem)
print("periodic residual", prof.periodic_residual, "after", prof.periods, "periods")
for k, v in cs.norm_certificates(prof).items():
    print(f"  {k:18s} {v:.4e}")

# %% [markdown]
# Letting the regularization go: the Cauchy increments shrink with the parameter step.

# %%
mu_prof = cs.continue_mu_to_zero(problem, (1e-1, 1e-2, 1e-3))
print("mu increments", np.array(mu_prof.increments))

# %% [markdown]
# The short-term homogenized limit uses `A_tilde`, `C_tilde` and no eps.

# %%
U = cs.solve_homogenized_short(cs.CellProblem(grid, coeffs.default_constants(), law, forcing, theta_steps=64))
print("limit profile, max |U| over the period:", np.abs(U.values).max())

# %% [markdown]
# In the long regime a tide with a slack-water window has a threshold set
# where `A_tilde < G_thr~`; the limit holds its value there.

# %%
slack = coeffs.default_forcing("long", law, mean_flow=(0.6, 0.0), u_peak=0.9, freeze_level=0.1, freeze_width=0.05)
long_problem = cs.CellProblem(grid, coeffs.default_constants(), law, slack, theta_steps=64, limit=True,
                              g_boundary=Boundary.constant(grid, 0.1))
U_long = cs.solve_homogenized_long(long_problem)
print("threshold nodes:", "".join("#" if f else "." for f in U_long.threshold_flags))
print("max elliptic residual", U_long.elliptic_residuals.max())
