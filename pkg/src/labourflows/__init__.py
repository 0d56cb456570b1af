"""Continuous-time labour market flows estimated from discrete panel observations.

Quarterly survey transitions give a stochastic matrix P per quarter. The
package recovers the generator Q with ``exp(Q) = P``, studies the implied
dynamics and equilibrium, decomposes share volatility into flow
contributions, bootstraps standard errors and builds forecast-based
counterfactuals.
"""

from .core import (
    GeneratorMatrix,
    PanelDataset,
    ShareVector,
    StateSpace,
    StochasticMatrix,
    TransitionCounts,
    validate_generator,
    validate_stochastic,
)
from .decomposition import (
    ContributionTable,
    CounterfactualMode,
    ReferenceKind,
    ReferenceRule,
    counterfactual_generators,
    counterfactual_shares,
    decompose_volatility,
    fitted_shares,
    hp_filter,
)
from .dynamics import (
    EquilibriumResult,
    ThreeStateRates,
    aggregate_seasonal,
    commutator_norm,
    equilibrium,
    equilibrium_three_state,
    propagate,
    three_state_generator,
    unemployment_rate,
)
from .estimation import (
    GeneratorEstimate,
    RegularizationMethod,
    count_transitions,
    estimate_from_counts,
    estimate_generator,
    estimate_series,
    mle_stochastic,
    regularize,
)
from .exceptions import *  # noqa: F401,F403
from .forecasting import (
    ForecastResult,
    SeasonalSeries,
    combine_forecasts,
    counterfactual_gap,
    fit_arima_grid,
    fit_ets,
    fit_tslr,
)
from .inference import (
    BootstrapResult,
    bootstrap_equilibrium,
    bootstrap_generator,
    bootstrap_individuals,
    bootstrap_seasonal,
    pairwise_difference_test,
    pairwise_equilibrium_tests,
    pairwise_generator_tests,
)
from .io import Table, emit_table, load_panel, write_counts, write_panel
from .kernels import SeriesConfig, eigenvalues, matrix_exp, matrix_log_series, solve_linear
from .pipeline import PipelineConfig, run_pipeline
from .simulator import SimulationSpec, advance_states, sample_trajectory, simulate_panel

__version__ = "0.1.0"
