# # Coefficients and their hypotheses
#
# The transport coefficients come from a flux law `g_a`, `g_c` evaluated on a
# tidal velocity.  Below the threshold speed the tide is clamped, so the
# fields freeze instead of oscillating through the degenerate range.

# %%
import numpy as np

from sandhomog import coeffs
from sandhomog.grid import Grid

law = coeffs.default_flux_law()
print(law)
u = np.linspace(0.0, 2.5, 11)
print("u     ", np.round(u, 2))
print("g_a(u)", np.round(law.ga(u), 3))
print("g_c(u)", np.round(law.gc(u), 3))

# %% [markdown]
# The defaults pass every check at 64 samples per axis in all three regimes.

# %%
for regime in coeffs.REGIMES:
    rep = coeffs.validate_hypotheses(law, coeffs.default_forcing(regime, law), sample_density=64)
    print(regime, "ok" if rep.ok else "violations", "G_thr~ ~", round(rep.g_thr_tilde, 3))

# %% [markdown]
# A tide whose period in theta is not 1 is caught.

# %%
bad = coeffs.validate_hypotheses(law, coeffs.default_forcing("short", law, tide_period=0.9), 64)
print("\n".join(bad.lines()))

# %% [markdown]
# Face coefficients on a grid, at eps = 1/16, and their two-scale limits.

# %%
grid = Grid(16, 16)
consts = coeffs.default_constants()
forcing = coeffs.default_forcing("short", law)
A, C = coeffs.face_coefficients(consts, law, forcing, grid, t=0.0, tau=0.0, theta=0.0)
At, Ct = coeffs.face_coefficients(consts, law, forcing, grid, t=0.0, tau=0.0, theta=0.0, limit=True)
print("A_eps range", A.min(), A.x.max(), " A_tilde range", At.min(), At.x.max())
