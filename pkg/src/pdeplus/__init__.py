"""Interpretable spatio-temporal prediction via supervised dimension reduction plus kriging."""

from .baselines import OrdinaryKrigingModel, naive_predict, ordinary_kriging_fit_predict
from .data import (
    SplitIndices,
    Standardization,
    STDataset,
    build_covariates,
    load_long_csv,
    save_long_csv,
    split_learn_test,
    standardize_covariates,
)
from .estimators import NaiveMeanRegressor, OrdinaryKrigingRegressor, PdePlusRegressor
from .exceptions import (
    CollinearBasisError,
    ConditioningError,
    DegenerateColumnError,
    FlatLinkError,
    InvalidInputError,
    PdePlusError,
    SingularMetricError,
    UnderdeterminedVariogramError,
)
from .initdir import (
    InitResult,
    choose_kappa,
    generalized_eigen,
    initial_directions,
    mrsir_init,
    pe_mrphd_init,
)
from .kriging import (
    EmpiricalVariogram,
    KrigingSystem,
    ProductSumCovariance,
    covariance_eval,
    empirical_variogram,
    fit_product_sum,
    grid_covariance_matrix,
    krige_predict,
    semivariance_eval,
)
from .mave import KernelWeights, MaveSolution, kernel_weights, mave_solve
from .metrics import MetricsReport, cos_accuracy, matched_direction_accuracy, rimse_rpmse
from .model import (
    PdePlusConfig,
    PdePlusModel,
    load_model,
    model_from_dict,
    model_to_dict,
    pdeplus_fit,
    pdeplus_predict,
    pdeplus_predict_points,
    save_model,
)
from .pde import (
    PdeConfig,
    PdeFit,
    pde_fit,
    pde_iterate,
    pde_step1,
    pde_step2_linear_fit,
    pde_step5_finalize,
    silverman_bandwidth,
)
from .scaling import ScaledCoefficients, knn_transfer, knn_transfer_batch, scale_fit
from .simulate import SimTruth, gen_example1, gen_example2, generate
from .benchmark import BenchmarkResult, REFERENCE_RESULTS, default_config, run_benchmark

__version__ = "0.1.0"
