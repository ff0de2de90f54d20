# %% [markdown]
# # Local and global information
#
# The Fisher matrix uses derivatives at the true parameters. The global matrix
# replaces them with total-effect Sobol' indices computed over the prior box.

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
    global_info,
    total_effect_indices,
)

grid = candidate_grid(DesignConstraints())
profile = total_effect_indices(PRIOR_RANGES, grid, n_base=2**13, rng=0)
print(" t    S_r    S_K    S_C0")
for j in range(0, grid.size, 4):
    print(f"{grid[j]:3.0f}", "  ".join(f"{v:.3f}" for v in profile.S[:, j]))

# %% [markdown]
# `S_r` peaks during growth, `S_K` climbs to 1 and `S_C0` starts at 1.
# Both matrices give a log-determinant for any design.

# %%
design = even_design(5)
for noise in (IIDNoise(9.0), OUNoise.from_stationary(0.02, 9.0)):
    F = fim(TRUE_PARAMS, design, noise)
    G = global_info(profile, design, noise)
    print(f"{type(noise).__name__:8s} log det F = {F.log_det:7.3f}   log det G = {G.log_det:7.3f}")

# %% [markdown]
# Profiles can be cached to CSV and reloaded, so design searches never rerun
# the Monte Carlo.

# %%
import tempfile
from pathlib import Path

from logistic_oed import SobolProfile

with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "sobol.csv"
    profile.save(path)
    print(path.read_text().splitlines()[0][:80], "...")
    assert np.array_equal(SobolProfile.load(path).S, profile.S)
