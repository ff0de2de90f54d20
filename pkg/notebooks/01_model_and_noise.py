# %% [markdown]
# # Logistic growth and its two noise models
#
# The population follows `C(t) = C0 K / ((K - C0) exp(-r t) + C0)`. We add
# either independent Gaussian errors or an Ornstein-Uhlenbeck process, whose
# errors stay correlated for roughly `1 / phi` time units.

# %%
import numpy as np

from logistic_oed import TRUE_PARAMS, IIDNoise, OUNoise, sample_noise, sensitivities, solve, synthesize

t = np.arange(0, 81, 8.0)
print("C(t):", np.round(solve(TRUE_PARAMS, t), 2))

# %% [markdown]
# Sensitivities are analytic. Scaled by the parameter value they show where
# each parameter matters: `r` during growth, `K` at saturation, `C0` early.

# %%
S = TRUE_PARAMS.as_array()[:, None] * sensitivities(TRUE_PARAMS, t)
for name, row in zip(("r", "K", "C0"), S):
    print(f"{name:>2}", np.round(row, 2))

# %% [markdown]
# An OU process with `phi = 0.02` and stationary variance 9 versus IID noise of
# the same variance. The sample lag-8 correlation should be near `exp(-0.16)`.

# %%
ou = OUNoise.from_stationary(0.02, 9.0)
paths = sample_noise(ou, t, rng=1, size=20_000)
print("marginal variance:", np.round(paths.var(axis=0)[:4], 2), "...")
print("lag-8 correlation:", round(np.corrcoef(paths[:, 0], paths[:, 1])[0, 1], 3), "vs", round(np.exp(-0.16), 3))

# %%
for noise in (IIDNoise(9.0), ou):
    obs = synthesize(TRUE_PARAMS, noise, t, rng=3)
    print(type(noise).__name__, np.round(obs.values - solve(TRUE_PARAMS, t), 2))
