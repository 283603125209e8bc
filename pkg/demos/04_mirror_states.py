# %% [markdown]
# # Mirror-image states
#
# Flipping the sign of the relative ancilla phase conjugates the heralded
# amplitudes, which reflects the Wigner function across the x axis.

# %%
import numpy as np

from heraldtomo import pipeline as pl
from heraldtomo.analysis import fit_eq2, wigner
from heraldtomo.config import preset_config

# %%
states, fits = {}, {}
for name in ("complex-phase-a", "complex-phase-b"):
    prep, _, rep, an = pl.run(preset_config(name, seed=1))
    states[name] = prep.true_state
    fits[name] = fit_eq2(rep.rho).in_gauge(0, None)
    print(name, "fitted a =", np.round(fits[name], 3), f"F = {an.fidelity_true:.3f}")

# %%
axis = np.linspace(-4, 4, 161)
Wa = wigner(states["complex-phase-a"], axis, axis).values
Wb = wigner(states["complex-phase-b"], axis, axis).values
print("max |W_a(x, p) - W_b(x, -p)| =", np.abs(Wa - Wb[::-1]).max())
