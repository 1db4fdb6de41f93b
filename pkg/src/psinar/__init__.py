"""INAR(1) count time series with power-series thinning and Poisson-Lindley innovations."""

__version__ = "0.1.0"

from .analysis import (
    ComparisonTable,
    McConfig,
    McReport,
    PredictionTrace,
    compare_models,
    predict,
    predict_pl,
    run_mc_study,
)
from .distributions import (
    BERNOULLI,
    GEOMETRIC,
    POISSON,
    GeometricInnovation,
    PoissonInnovation,
    PoissonLindley,
    PowerSeriesFamily,
    ThinningFamily,
    counting_pmf,
    get_family,
    pl_moments,
    pl_pgf,
    pl_pmf,
    pl_sample,
)
from .estimation import (
    ClsAsymptotics,
    FitResult,
    cls_asymptotics,
    fit,
    fit_cls,
    fit_cmle,
    fit_moment,
    fit_yw,
    information_criteria,
    invert_theta,
)
from .exceptions import ConvergenceError, DegenerateSeriesError, EstimationError, InputError, PsinarError
from .process import (
    CountSeries,
    InarModel,
    autocorrelation,
    conditional_moments,
    joint_log_pmf,
    log_likelihood,
    model_moments,
    simulate,
    stationary_distribution,
    transition_prob,
    transition_row,
)
from .thinning import ThinnedLaw, thin, thinned_pmf
