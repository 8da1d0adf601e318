"""Quasi-lattice approximation engine for continuum classical gases with
strong superstable pair interactions."""

from .config import ConfigError, ExperimentConfig, parse_config
from .correlation import (CONVERGENCE_CSV_HEADER, ConvergenceRow, KSFunction,
                          KSTruncation, RadiusError, convergence_report,
                          ks_apply_continuum, ks_apply_discrete,
                          ks_series_continuum, ks_series_discrete,
                          rho_dilute_direct, rho_dilute_mc, rho_direct,
                          series_tail_bound)
from .energy import (CoarseEdgeError, GlobalBounds, StabilityConstants,
                     batch_interaction_energy, batch_total_energy, boltzmann,
                     check_superstability, global_bounds, hardcore_energy,
                     interaction_energy, phi_minus_integral,
                     stability_constants, total_energy)
from .estimate import Estimate
from .lattice import (CubeGrid, Region, as_points, chi_minus, chi_plus_cube,
                      classify, cube_of, cube_subsets, cubes_of, occupancy,
                      uniform_points_in_cubes, uniform_points_in_region)
from .partition import (ENUMERATION_CUBE_LIMIT, EnsembleParams, MomentTable,
                        PRESSURE_CSV_HEADER, PressureRow, dilute_cube_sum,
                        epsilon1, epsilon1_series, epsilon1_series_tail,
                        grand_truncation_bound, poisson_tail, pressure_row,
                        pressures, sample_moments, z_dilute, z_grand,
                        z_partition_of_unity, z_plus, z_plus_direct)
from .potential import (AssumptionAParams, CertificationError, Potential,
                        activity_radius, certify_assumption_a, mayer_c_beta)

__version__ = "1.0.0"
