"""Brillouin-zone integration for periodic one-body Hamiltonians.

Smearing and interpolation quadratures for the electron count, Fermi level,
ground-state energy, density of states and electronic density of metals, plus
a harness measuring their convergence rates.
"""

__version__ = "0.1.0"

from .bands import (AnalyticCosineBand, GrapheneTightBinding, PlaneWaveModel,
                    build_planewave_model, eval_bands, eval_states,
                    load_potential, model_by_name, wrap_frac)
from .errors import (BzlabError, ConfigError, NoRootError,
                     NonFiniteIntegrandError, SchemeOrderError, UnmetBudgetError)
from .interp import (TorusSpline, counting_interp, energy_interp, eval_spline,
                     fit_spline, solve_fermi_interp)
from .quadrature import (LevelSetQuadConfig, LevelSetResult, UniformGrid,
                         levelset_integrate, make_grid, riemann_sum)
from .reference import (CASES, ReferenceValues, compute_reference,
                        ensure_references, read_refs, reference_counting,
                        reference_energy, reference_fermi, write_refs)
from .smearing import (ColdSmearing, FermiDirac, Gaussian, MethfesselPaxton,
                       SmearingScheme, moment, scheme_by_name, validate_order)
from .smeared import (RealSpaceDensity, extrapolated_energy, smeared_counting,
                      smeared_density, smeared_dos, smeared_energy,
                      smeared_entropy, solve_fermi)
from .study import (SlopeFit, StudyConfig, StudyRecord, fit_slope, read_config,
                    read_records, run_interp_sweep, run_smearing_sweep,
                    run_sweep, write_records)
