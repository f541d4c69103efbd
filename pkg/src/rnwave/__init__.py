"""Double-null characteristic evolution of spherically symmetric semilinear
waves on Schwarzschild and Reissner-Nordstrom exteriors."""

__version__ = "0.1.0"

from .exceptions import (ConfigError, DomainError, ExtremalBackgroundError, GridError,
                         HypothesisError, InversionError)
from .geometry import (Background, dtortoise_dr, hawking_mass, horizon_bound_constants,
                       make_background, one_minus_mu, radius_from_tortoise, tortoise)
from .fields import (FieldState, InitialData, NullGrid, bump_data, build_grid,
                     cauchy_grid, cauchy_to_characteristic, characteristic_data)
from .evolution import (Nonlinearity, RunReport, Thresholds, evolve,
                        evolve_duhamel_slice, seed_prescribed, step_box)
from .diagnostics import (Rect, Region, bootstrap_sup, bulk_energy_residual,
                          characteristic_energy_residual, fit_redshift_rate,
                          redshift_quantity, slice_energy)
from .checkers import (bootstrap_closure_check, certify_decay, certify_pricelaw0,
                       certify_pricelaw2, certify_pricelaw4, decay_curve, duhamel_check)

__all__ = [n for n in dir() if not n.startswith("_")]
