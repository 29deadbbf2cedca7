"""Operator-splitting pseudo-time solvers for the nonlinear Poisson-Boltzmann
equation on uniform 3D grids, with an electrostatic solvation-energy pipeline."""

from .constants import C_ES, KAPPA2_PER_MOLAR, KCAL_PER_DIMENSIONLESS, PhysicalConstants
from .energy import (EnergyResult, energy_pipeline, recovered_surface_potential,
                     richardson, solvation_energy, vacuum_potential_fast,
                     vacuum_potential_lod)
from .geometry import (AnalyticSphere, Atom, MolecularSystem, Region, RegionMap,
                       UnionOfSpheres, build_region_maps, classify, parse_pqr,
                       parse_system_table, uniform_region)
from .grid import (Grid3D, NormPair, ScalarField, deposit_charges, dump_field_csv,
                   make_grid, relative_norms)
from .problem import (BoundarySpec, NPBProblem, coulomb_screened_boundary,
                      default_sphere_grid, make_vacuum_problem, parse_config,
                      protein_problem, sphere_benchmark, sphere_exact,
                      sphere_exact_field)
from .schemes import (SCHEME_NAMES, MarchConfig, MarchReport, SchemeVariant,
                      cn_sweep, ie_sweep, march, nonlinear_step, source_step, step)
from .tridiag import TriDiagSystem, assemble_line, thomas_solve

__all__ = [name for name in dir() if not name.startswith("_")]
