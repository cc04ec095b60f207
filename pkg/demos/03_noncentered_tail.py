# %% [markdown]
# # The non-centered case: a full `(log t)^alpha`
#
# With `y = 1` the mean `s` is positive and the right tail of `X1` gains
# `(log t)^alpha`, while the left tail stays negligible.  The convergence in
# `log log t` is slow, so the fitted exponent sits above the limit at any
# reachable `t`.

# %%
import numpy as np

import tripert
from tripert import model
from tripert.estimation import default_t_grid

law = model.reference_model("cm2")
rep = tripert.spectral_report(law)
print(f"alpha={rep.alpha:.6g} rho={rep.rho:.6g} s={rep.s:.6g} regime={tripert.asymptotics.decide_regime(rep)}")

# %%
grid = default_t_grid(6, 1e3, 1e10)
right = tripert.tail_curve(law, rep, grid, "x1", 30_000, rng=1)
fit = tripert.fit_exponents(right, alpha_fixed=rep.alpha)
print(f"alphatilde = {fit.alphatilde_hat:.3f} +- {fit.se_alphatilde:.3f} (limit: 2)")

# %% [markdown]
# A crude local-slope guide: if the tail behaves like `P(S > log t)` for a
# random walk with positive drift, the effective exponent on this grid is
# `2 (L - 1) / (L - log L)` with `L = log t`, which is above 2 throughout.

# %%
L = np.log(grid)
print(np.round(2 * (L - 1) / (L - np.log(L)), 3))

# %% [markdown]
# ## Left tail
#
# The left tail should vanish relative to the right one after the same scaling.

# %%
left = tripert.tail_curve(law, rep, grid, "x1", 30_000, rng=2, side="left")
scale = grid**rep.alpha / np.log(grid) ** 2
print("right scaled:", np.round(right.p_hat * scale, 3))
print("left scaled: ", np.round(left.p_hat * scale, 5))
