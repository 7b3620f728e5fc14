"""Robust sparse regression with Huber-type losses, robust means and a simulation harness."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CalibrationError, DegenerateDesignError, DegenerateGainError, DivergenceError,
    InvalidArgumentError, RaLassoError, RankDeficiencyError, ShapeError,
)
from .loss import LossKind, LossSpec, catoni_psi, empirical_gradient, empirical_loss, huber_psi, huber_value, loss_deriv, loss_value  # noqa: E402
from .optimizer import FitConfig, FitResult, composite_gradient_descent, estimate_gamma_u, lqa_step, project_l1_ball, soft_threshold  # noqa: E402
from .regression import (  # noqa: E402
    Dataset, VarianceEstimate, estimate_sigma2_cv, fit_catoni_lasso, fit_lasso, fit_method, fit_oracle,
    fit_path, fit_r_lasso, fit_ra_lasso, fold_indices, predict,
)
from .robust_mean import RaMeanConfig, RobustCovariance, choose_alpha, concentration_radius, ra_mean, robust_covariance  # noqa: E402
from .simulation import ErrorLaw, Grid, Metrics, Model, Scenario, compute_metrics, generate, relative_gain, sample_error  # noqa: E402
from .tuning import TuneResult, tune_cv, tune_grid  # noqa: E402
from .experiment import MetricsReport, run_scenario  # noqa: E402
