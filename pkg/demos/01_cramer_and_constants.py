# %% [markdown]
# # The Cramer root and the tail constants
#
# The recursion is `X_n = A_n X_{n-1} + B_n` with the upper-triangular matrix
# `A = [[a, y a], [0, a]]`.  Everything about the tails is driven by the scalar
# `a`: its Cramer root `alpha` (where `E a^alpha = 1`), the tilted drift `rho`
# and the tilted mean `s = E y a^alpha`.
#
# This notebook computes those numbers for the two reference models and then
# the Kesten-Goldie constants that scale the tail of the second coordinate.

# %%
import numpy as np

import tripert
from tripert import model

cm1 = model.reference_model("cm1")
cm2 = model.reference_model("cm2")

# %% [markdown]
# ## Spectral report
#
# `spectral_report` solves for `alpha` with a bracketed root finder and checks
# the standing assumptions.  For log-normal `a` with `log a ~ N(-1/2, 1/2)` the
# root is `alpha = 2` in closed form.

# %%
for law in (cm1, cm2):
    rep = tripert.spectral_report(law)
    print(law.name, f"alpha={rep.alpha:.12g} rho={rep.rho:.12g} s={rep.s:.3g}")
    print("  K =", np.round(rep.K, 6).tolist())
    print("  flags:", {k: f.ok for k, f in rep.flags.items()})

# %% [markdown]
# The first model has `s = 0` (the centered case), the second has `s = 1`.
# `K` is the covariance of `(y, log a)` under the tilted law; its
# top-left entry vanishes when `y` is constant.
#
# ## Kesten-Goldie constants
#
# `P(X2 > t) ~ c_plus t^-alpha`.  The constant is an expectation over a
# stationary draw, so it comes with a Monte Carlo standard error.

# %%
rep1 = tripert.spectral_report(cm1)
consts = tripert.goldie_constants(cm1, rep1, 200_000, rng=1)
print(f"c_plus = {consts.c_plus:.4f} +- {consts.se_plus:.4f}, c_minus = {consts.c_minus}")

# exact for this model: (2 E a / (1 - E a) + 1) / (alpha rho)
ea = np.exp(-0.25)
print("exact  =", (2 * ea / (1 - ea) + 1) / (rep1.alpha * rep1.rho))

# %% [markdown]
# ## The Gaussian factor
#
# In the centered case the first coordinate picks up a factor from a Gaussian
# limit: `c0 = E Z^alpha 1{Z > 0}` with `Z ~ N(0, K11)`.  For `alpha = 2` and
# `K11 = 1` that is exactly 1/2.

# %%
print("c0 =", tripert.c0_of_K(rep1.K, rep1.alpha))
for delta in (2.0, 5.0, 50.0):
    print(f"truncated at {delta:>4}: {tripert.c0_truncated(rep1.K, rep1.alpha, delta):.6f}")
