"""Numerical laboratory for 2D chemotaxis systems with configurable kinetics.

The package analyzes a kinetic source against the sub-logistic boundedness
condition (damping index mu, mass bound M, aggregation threshold) and
simulates the coupled density/signal system with a positivity-preserving
scheme while monitoring every functional the theory keeps a priori bounded,
reporting a bounded or blow-up verdict per run.
"""

from .elliptic import EllipticOptions, solve_helmholtz
from .errors import (ChemolabError, ConfigError, DivergedFieldError,
                     EstimationFailureError, PositivityError,
                     SolverFailureError, UnboundedSourceError)
from .fields import (Grid, ScalarField, constant_field, entropy_integrand,
                     field_from_function, integrate, norm, read_snapshot,
                     write_snapshot)
from .gn import GNInstance, estimate_cgn, gn_ratio
from .kinetics import (MuEstimate, RegimeReport, SourceSpec, classify,
                       classify_values, compute_M, compute_M_eta, eval_f,
                       estimate_mu, optimal_eta, parse_source_spec)
from .operators import chemotactic_divergence, gradient_squared, laplacian
from .stepping import (RunResult, SimState, Stepper, StepperOptions,
                       advection_substep, diffusion_substep, make_initial,
                       reaction_substep, run, step)
from .diagnostics import (BoundCheckSummary, CSV_HEADER, DiagnosticsRecord,
                          check_bounds, entropy_plateau_ok, record, write_csv)

__version__ = "0.1.0"
