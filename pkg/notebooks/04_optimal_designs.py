# %% [markdown]
# # Optimal observation times
#
# Continuous Fisher designs (multistart simplex) and grid-restricted global
# designs (exhaustive when small, greedy plus swaps otherwise), under IID and
# OU noise. Fewer restarts than the defaults keep this quick.

# %%
import numpy as np

from logistic_oed import (
    PRIOR_RANGES,
    TRUE_PARAMS,
    DesignConstraints,
    IIDNoise,
    OUNoise,
    candidate_grid,
    even_design,
    fim,
    optimize_fim_design,
    optimize_global_design,
    total_effect_indices,
)

C = DesignConstraints(t_min=0.0, t_final=80.0, min_gap=2.0)
profile = total_effect_indices(PRIOR_RANGES, candidate_grid(C), 2**13, 0)
noises = {"IID": IIDNoise(9.0), "OU": OUNoise.from_stationary(0.02, 9.0)}

for label, noise in noises.items():
    print(f"--- {label}")
    for n in (5, 8):
        d, v = optimize_fim_design(TRUE_PARAMS, noise, n, C, restarts=15, rng=n)
        even = fim(TRUE_PARAMS, even_design(n), noise).log_det
        print(f"Fisher n={n}: {np.round(d.times, 1).tolist()}  log det {v:.2f} (even {even:.2f})")
        g, gv = optimize_global_design(profile, noise, n, rng=n, constraints=C)
        print(f"Global n={n}: {g.times.tolist()}  log det {gv:.2f}")

# %% [markdown]
# Under IID noise both objectives split the points between the early growth
# phase and saturation near t = 80. Under strongly correlated OU noise
# neighbouring observations are redundant. The Fisher designs keep a single
# point at the end and spread the rest over the first half. The global OU
# designs can keep a second late point, around t = 52, for larger n.
