# %% [markdown]
# # Tracking a drifting local-oscillator phase from singles
#
# The LO phase wanders as a random walk. Singles-heralded states carry a
# nonzero mean quadrature, so short windows of singles data reveal the
# phase. One real reference cannot separate phi from its mirror image, and
# two references with different offsets can.

# %%
import math

import numpy as np

from heraldtomo.fock import ket2dm, normalize
from heraldtomo.homodyne import estimate_phase, reference_signal, simulate_acquisition, wrap
from heraldtomo.imperfect import simulate_phase_drift

# %%
ref1 = ket2dm(normalize([1, 1, 0]))
ref2 = ket2dm(normalize([1, 1j, 0]))
for name, r in (("ref1", ref1), ("ref2", ref2)):
    amp, off = reference_signal(r)
    print(f"{name}: <Q_phi> = {amp:.3f} cos(phi - {off:.3f})")

# %% [markdown]
# Whether a single stream goes wrong depends on the trajectory: the mirror
# ambiguity bites whenever the walk turns around near an extreme of the
# reference signal. Four random walks make the point.

# %%
duration = 20.0


def rms(refs, drift):
    ds = simulate_acquisition(None, refs, {"singles": 25e3}, duration, drift, seed=4)
    ds = estimate_phase(ds, 0.06, refs, drift_rate=0.5, duration=duration)
    return float(np.sqrt(np.mean(wrap(ds.est_phase - ds.true_phase) ** 2)))


for seed in range(4):
    drift = simulate_phase_drift(0.5, duration, 1e-3, seed=seed, initial_phase=math.pi / 4)
    one = rms({"spcm1": ref1}, drift)
    two = rms({"spcm1": ref1, "spcm2": ref2}, drift)
    print(f"walk {seed}: RMS error one stream {one:.3f} rad, two streams {two:.3f} rad")
