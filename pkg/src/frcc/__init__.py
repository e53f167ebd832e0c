"""Functional regression control charts for daily sensor profiles.

Workflow: ingest raw records into daily profiles, recover missing points with
a grid-level PCA, smooth into a B-spline basis, standardize pointwise, run
multivariate FPCA on the covariates and FPCA on the response, regress
response scores on covariate scores, and monitor the functional residuals
with Hotelling T2 and SPE charts under KDE control limits.
"""

from .basis import (BasisSystem, eval_basis, gram_matrix, greville_abscissae,
                    make_bspline_basis, second_derivative_penalty)
from .config import PipelineConfig, SimulationConfig
from .errors import ComputationError, FrccError, IngestError, ValidationError
from .fofreg import (CoefficientSurface, FofModel, FunctionalResidual,
                     beta_surface, fit_fof, fof_coefficients, predict_y, residuals)
from .fpca import (FpcaModel, GridReconstructionModel, choose_ncomp, fit_fpca,
                   fit_reconstruction, project_scores, reconstruct_sparse)
from .ingest import (GridSpec, Profile, ProfileSet, RawRecord, aggregate_to_grid,
                     align_days, filter_profiles, missing_fraction)
from .mfpca import MfpcaModel, fit_mfpca, mfpca_scores
from .monitor import (ChartResult, MonitorModel, fit_monitor, kde_quantile,
                      monitor_phase2, spe_statistic, t2_statistic)
from .pipeline import TrainedModel, TrainResult, monitor_csv, prepare_profiles, train
from .serialize import load_model, save_model
from .simulate import SimulatedData, simulate
from .smooth import (FunctionalVariable, StandardizationFunctions, penalized_smooth,
                     select_lambda_gcv, smooth_variable, standardize,
                     standardize_with, unstandardize)

__version__ = "0.1.0"
