"""evtem: evanescent-field delocalization toolkit.

Closed-form decay models, synthetic single-electron EFTEM stacks, the
reduction/fitting pipeline, energy-law discrimination, and a multi-slice
elastic control.
"""

from .constants import ELECTRON_REST_ENERGY, H_C, HBAR, HBAR_C, LIGHT_SPEED
from .lawfit import (DecaySeries, LawFitResult, PreferredModel, ScaleLawFitter,
                     discriminate, fit_powerlaw, fit_reciprocal)
from .multislice import (SlabPhantom, WaveField, apply_defocus, edge_metrics,
                         fresnel_propagator, multislice_exit_wave,
                         pendelloesung_thickness)
from .physics import (BeamState, CoherenceQuery, LambdaConvention, ModelCurveSet,
                      beam_kinematics, coherence_time, evanescent_length,
                      goos_hanchen_shift, heisenberg_time, model_curve_table,
                      phase_time_constant, self_coherence_length,
                      tunneling_depth, wavelength_shift)
from .reduce import (DecayFit, ExponentialDecayFitter, LineProfile, align_stack,
                     average_stack, dose_independence_check, extract_profile,
                     fit_exponential, reduce_pipeline, reduce_stack)
from .synth import (DecayKind, DecayModel, Frame, FrameStack, ScenePhantom,
                    SpectralPeak, StackKind, difference_stack, generate_stack,
                    spectral_weight)

__version__ = "0.1.0"
