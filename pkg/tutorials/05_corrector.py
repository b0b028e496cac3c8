# # First-order corrector
#
# `W_eps = (z_eps - U(t, t/eps)) / eps` stays bounded as eps shrinks when the
# data are well prepared (`z0 = U(0, 0)`).

# %%
import numpy as np

from sandhomog import coeffs
from sandhomog import eps_solver as es
from sandhomog import twoscale as ts
from sandhomog.grid import Grid

law = coeffs.default_flux_law()
grid = Grid(16, 16)
template = es.EpsProblem(grid, coeffs.default_constants(), law, coeffs.default_forcing("short", law),
                         es.gaussian_bump(grid), T_final=0.5)
rep = ts.corrector_study(template, [1 / 4, 1 / 8, 1 / 16], theta_steps=64)
print("sup ||W||_2 ", rep.sup_corrector)
print("ratios      ", rep.corrector_ratios, "bounded:", rep.corrector_bounded)

# %% [markdown]
# A synthetic sequence `z = U + eps V` recovers `sup ||V||` at every eps.

# %%
syn = ts.synthetic_corrector_study(template, [1 / 4, 1 / 8, 1 / 16], theta_steps=64)
print("synthetic sup ||W||_2", syn.sup_corrector)
