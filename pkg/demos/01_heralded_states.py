# %% [markdown]
# # Heralded superpositions of 0, 1 and 2 photons
#
# A weak pair source feeds an idler photon into two beamsplitters where it
# meets two weak coherent ancillas. A coincidence click at both detectors
# projects the signal mode onto a superposition a0|0> + a1|1> + a2|2>.
# Here we compare the brute-force network with the lowest-order amplitudes.

# %%
import numpy as np

from heraldtomo import eq2_amplitudes, herald_signal
from heraldtomo.fock import fidelity
from heraldtomo.imperfect import ImperfectionConfig, herald_signal_imperfect

np.set_printoptions(precision=4, suppress=True)

# %% [markdown]
# ## Closed form against the full network

# %%
for alpha, beta, gamma in [(0.1, 0.0, 0.1), (0.0, 0.1, 0.1), (0.1, 0.1j, 0.1), (0.05, 0.05, 0.05)]:
    res = herald_signal(alpha, beta, gamma)
    triple, psi = eq2_amplitudes(alpha, beta, gamma)
    F = fidelity(res.signal, np.pad(psi, (0, res.signal.shape[0] - 3)))
    print(f"alpha={alpha!s:6} beta={beta!s:6} gamma={gamma}: "
          f"populations {np.real(np.diag(res.signal))[:3]}, F(closed form) = {F:.5f}, "
          f"P(herald) = {res.success_probability:.2e}")

# %% [markdown]
# With beta = 0 the one-photon term needs the idler and an ancilla photon to
# leave the first beamsplitter through different ports. Two-photon
# interference forbids that, so the heralded state has no |1> component.

# %%
rho = herald_signal(0.1, 0.0, 0.1).signal
print("beta = 0, p1 =", rho[1, 1].real)

# %% [markdown]
# ## Mode mismatch
#
# Only the part xi*alpha of each ancilla overlaps the idler mode. The rest
# adds uncorrelated clicks and washes out the coherence between Fock terms.

# %%
for xi in (1.0, 0.9, 0.7, 0.0):
    imp = ImperfectionConfig(eta=1.0, xi=xi)
    s = herald_signal_imperfect(0.1, 0.1, 0.1, imp).signal
    c01 = abs(s[0, 1]) / np.sqrt(s[0, 0].real * s[1, 1].real)
    print(f"xi = {xi:.1f}: normalized |rho01| = {c01:.3f}")
