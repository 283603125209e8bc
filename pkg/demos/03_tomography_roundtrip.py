# %% [markdown]
# # From a heralded state to its Wigner function
#
# The full chain for the 0-2 superposition: prepare the state, simulate
# 50000 homodyne records through 55% detection efficiency with a drifting
# LO phase, reconstruct by maximum likelihood and compare with a small
# even cat state.

# %%
import numpy as np

from heraldtomo import pipeline as pl
from heraldtomo.analysis import kitten_scan
from heraldtomo.config import preset_config

np.set_printoptions(precision=4, suppress=True)

# %%
cfg = preset_config("zero-two", seed=1)
prep, ds, rep, an = pl.run(cfg)
print(f"{len(ds)} records, {rep.iterations} iterations, converged={rep.converged}")
print(an.summary())

# %% [markdown]
# The reconstructed state sits close to |0> + eps|2>. The best such state
# for an even cat of amplitude 0.6 has the fidelity below.

# %%
eps, f = kitten_scan(0.60)
print(f"best eps = {eps:.4f}, fidelity with the cat = {f:.4f}")

# %% [markdown]
# The Wigner grid is written as CSV for external plotting.

# %%
an.wigner.to_csv("zero_two_wigner.csv")
print("Wigner value at the origin:", an.wigner.values[100, 100])
