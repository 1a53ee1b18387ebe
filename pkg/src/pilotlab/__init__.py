"""pilotlab: a numerical laboratory for pilot-wave quantum dynamics,
spontaneous-collapse models, and dual-pinhole interferometry."""

from .grids import (Grid, WaveField, PolarDecomposition, make_grid, norm,
                    normalize, polar, gaussian_state)
from .propagate import (PotentialField, ThinElement, EvolutionPlan, step,
                        evolve, apply_element, absorbed_fraction)
from .bohmian import (VelocityField, QuantumPotentialField,
                      TrajectoryEnsemble, velocity_field, quantum_potential,
                      quantum_force, sample_equilibrium,
                      integrate_trajectories, equivariance_check,
                      fringe_occupancy, conditional_wavefunction)
from .afshar import AfsharConfig, StageResult, run_stage, run_all
from .duality import (TwoWaveAmplitudes, PointerStates, overlap_c,
                      conditioned_intensity, visibility, distinguishability,
                      duality_identity, englert_check)
from .grw import (GrwParams, GrwRun, JumpEvent, reduction_operator,
                  jump_density, simulate, amplification_rate, mass_density)
from .packets import SpectralAmplitude, synthesize, analyze, time_extend

__version__ = "0.1.0"
