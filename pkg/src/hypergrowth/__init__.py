"""Hyperbolic growth fitting and turning-point diagnostics."""

__version__ = "0.1.0"

from .errors import (HypergrowthError, NumericalError, ParseError, PositivityError,  # noqa: E402
                     SingularityError, UnderdeterminedError, ValidationError)
from .timeseries import TimeSeries, parse_timeseries_csv, to_csv, transform_series  # noqa: E402
from .models import (DomainVerdict, ExponentialModel, HyperbolicModel,  # noqa: E402
                     PiecewiseExponentialModel, eval_model, model_from_dict, model_to_dict,
                     relative_growth_rate, validate_model_domain)
from .fitting import (FitConfig, FitResult, bootstrap_parameters, fit_exponential,  # noqa: E402
                      fit_hyperbolic, fit_hyperbolic_stages, fit_piecewise_exponential,
                      fit_reciprocal_polynomial, refine_nls)
from .diagnostics import (Thresholds, compare_models, monotonicity_report,  # noqa: E402
                          reciprocal_break_scan, run_diagnostics, turning_point_verdict)
from .synth import NoiseSpec, run_illusion_experiment, sample_series  # noqa: E402
from .render import ModelOverlay, PlotSpec, SeriesLayer, export_curve_csv, render_plot  # noqa: E402

# Second-order hyperbolic fit (a0, a1, a2) to Australian rock-shelter site
# counts over the last 10,000 years BP.
ROCK_SHELTER_COEFFICIENTS = (0.0006875, 1.72e-7, 8.7468e-11)
