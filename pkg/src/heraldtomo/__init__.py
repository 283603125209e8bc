"""Heralded Fock-superposition states: simulation, homodyne tomography and analysis."""

from .analysis import (FitResult, WignerGrid, even_cat, fit_eq2, kitten_fidelity, kitten_scan,
                       photon_stats, wigner)
from .config import FAMILY_PRESETS, PRESETS, ConfigError, RunConfig, load_config, preset_config
from .fock import (NullStateError, basis, coherent_fock, fidelity, ket2dm, loss_kraus, normalize,
                   rotate, state_fidelity)
from .homodyne import (AcquisitionDataset, PhaseEstimationError, QuadratureRecord, estimate_phase,
                       quad_pdf, quad_wavefunction, sample_quadrature, simulate_acquisition)
from .imperfect import (ImperfectionConfig, PhaseTrajectory, herald_signal_imperfect, loss_channel,
                        simulate_phase_drift)
from .network import (DetectorModel, HeraldResult, MultimodeState, TruncationError, apply_beamsplitter,
                      eq2_amplitudes, herald_signal, spdc_state)
from .tomo import (BinnedData, ReconstructionReport, bin_samples, lossy_povm, loglikelihood,
                   maxlik_reconstruct, quad_projector)

__version__ = "0.1.0"
