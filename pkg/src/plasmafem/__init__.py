"""Adaptive finite elements for nanoscale plasmonic scattering.

Solves the coupled time-harmonic Maxwell / nonlocal hydrodynamic Drude
system on 2D cross-sections with edge and face elements, a residual error
estimator, and size-field driven mesh adaptation.
"""

from .mesh import (Mesh2D, SizeField, build_domain_mesh, build_scenario_mesh,
                   refine, bisect_all, audit, write_vtk, read_vtk,
                   VACUUM, METAL, PML)
from .materials import (DrudeParams, Coefficients, GOLD, SILVER, METALS,
                        build_coefficients, spectral_norm_2x2)
from .fem import (FemSpace, System, SolutionPair, assemble_system,
                  plane_wave, energy_norm, energy_norms_sq, export_matrix)
from .solve import Factorization, solve_system, backward_error
from .estimator import ErrorIndicators, Oscillation, estimate, oscillation
from .adapt import (AdaptConfig, IterationRecord, generate_mesh_sizes,
                    select_vertices, vertex_indicators, adaptive_loop,
                    uniform_loop, write_history)
from .bench import (ScenarioSpec, SCENARIOS, get_scenario, run_experiment,
                    solve_scattering, reference_error_sq, fit_rate)

__version__ = "0.1.0"
