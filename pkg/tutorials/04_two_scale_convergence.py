# # Two-scale convergence
#
# Pair `z_eps(t, x)` with `psi(t, t/eps, x)` and compare with the pairing of
# the homogenized profile `U(t, theta, x)`.

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
battery = [ts.TestFunction(0, "1", "1"), ts.TestFunction(0, "sin1", "sinsin"), ts.TestFunction(1, "cos1", "x")]
rep = ts.convergence_study(template, battery, [1 / 4, 1 / 8, 1 / 16], theta_steps=64)
for j, pid in enumerate(rep.psi_ids):
    print(f"{pid:14s} limit={rep.limits[j]: .5f}  errors={np.array2string(rep.errors[:, j], precision=2)}")
print("monotone decrease:", rep.monotone_decrease)

# %% [markdown]
# A pure oscillation pairs to its theta-mode: `sin(2 pi t/eps)` against `sin(2 pi theta)` gives 1/2.

# %%
eps = 1 / 32
times = np.linspace(0.0, 1.0, 64 * 32 + 1)
run = ts.synthetic_run(grid, times, [np.full(grid.shape, np.sin(2 * np.pi * t / eps)) for t in times], eps)
print("pairing", ts.pair_sequence(run, ts.TestFunction(0, "sin1"), eps))
