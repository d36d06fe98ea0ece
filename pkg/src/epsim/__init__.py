"""Non-Hermitian four-level spectra, exceptional points, pump-rate design and gamma extraction."""

from .dissipation import Polarization, cg_table, gamma_from_rates, pump_rates, solve_polarization
from .eplocate import analytic_q0_gammas, classify_degeneracy, locate_ep_on_scan, reduced_invariants, trace_ep2_curve
from .expsim import TimeSeriesDataset, default_times, population_trace, synthesize_dataset
from .fitting import bootstrap_ci, extract_bands, fit_gamma
from .model import HamiltonianSpec, build_effective, build_general, build_pt_epn, g_from_khz, hamiltonian, spin_operators
from .numerics import char_poly, discriminant, eigendecompose, propagate, quartic_discriminant
from .spectra import classify_pt_phase, sweep_bands

__version__ = "0.1.0"
