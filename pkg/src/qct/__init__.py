"""Continuously measured 1-D quantum dynamics, classical Langevin
counterparts, and the strong/weak quantum-to-classical transition
criteria."""

__version__ = "0.1.0"

from .model import DriveCoupling, HamiltonianSpec, chaotic_duffing, force, force_dx, force_dxx, harmonic, potential
from .qstate import (Moments, PositionGrid, WaveFunction, WignerGrid,
                     coherent_state, default_grid, moments, wigner,
                     wigner_density)
from .qdyn import (AveragedDensity, MeasurementSpec, TrajectoryRecord,
                   average_ensemble, coherent_density, lindblad_evolve,
                   lindblad_wigner, run_trajectory, step_conditioned)
from .cdyn import (ClassicalEnsemble, LyapunovEstimate, density_histogram,
                   edges_like, evolve_ensemble, langevin_step, local_lyapunov,
                   lyapunov_benettin, orbit, sample_coherent_matched)
from .criteria import (ActionScales, InequalityEntry, PhaseSpaceAverages,
                       RegimeReport, WeakScales, accessible_area,
                       action_scales, classify, k_crit, phase_space_averages,
                       pointwise_averages, solve_l, strong_localization,
                       strong_low_noise, weak_implies_strong, weak_times,
                       weak_window)
from .compare import (ComparisonSeries, coarse_grain, density_distance,
                      negativity, overall_noise_metric,
                      trajectory_noise_metric)
from .rng import NoisePath, make_generator
from .gridio import read_qctw, write_grid_csv, write_qctw
