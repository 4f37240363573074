"""Expectile neural networks with parameter-transfer learning.

A single-hidden-layer network trained under the asymmetric squared loss
estimates conditional expectiles of a phenotype from SNP dosages and
covariates. Fits can be warmed up from a model trained on a related
phenotype, optionally freezing the shared representation layer.
"""
from .data import (ColumnMeta, CovariateScaler, Dataset, SplitSpec, load_csv,
                   load_schema, split, split_sizes, standardize_covariates,
                   validate_schema)
from .errors import (ConfigError, DataError, DimensionError, ExpnnError,
                     OptimizationError)
from .expectile import ExpectileSolution, linear_expectile_fit, scalar_expectile
from .experiment import (ArmResult, CellResult, ExperimentConfig,
                         ExperimentReport, compare_transfer,
                         expectile_curve_rows, mean_expectile_loss, mse,
                         run_experiment, run_replicate, select_hyperparams,
                         write_curves_tsv, write_tsv)
from .figures import render_curves_figure, render_report_figure
from .loss import (Gradient, GradientCheckReport, RiskValue, check_gradient,
                   loss_tau, loss_tau_df, risk, risk_and_gradient, risk_gradient)
from .model import (ACTIVATIONS, EnnConfig, HIDDEN_ACTIVATIONS, LoadedModel,
                    MODEL_SCHEMA_VERSION, ModelParams, OUTPUT_ACTIVATIONS,
                    activation, forward, forward_batch, load_model,
                    param_count, save_model)
from .optimize import (FreezeSpec, OptimReport, VectorResult, flatten_params,
                       init_params, minimize, minimize_vector, unflatten_params)
from .synth import SyntheticSpec, generate_synthetic
from .transfer import TransferPlan, fit_source, transfer_fit

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS", "ArmResult", "CellResult", "ColumnMeta", "ConfigError",
    "CovariateScaler", "DataError", "Dataset", "DimensionError", "EnnConfig",
    "ExpectileSolution", "ExperimentConfig", "ExperimentReport", "ExpnnError",
    "FreezeSpec", "Gradient", "GradientCheckReport", "HIDDEN_ACTIVATIONS",
    "LoadedModel", "MODEL_SCHEMA_VERSION", "ModelParams", "OUTPUT_ACTIVATIONS",
    "OptimReport", "OptimizationError", "RiskValue", "SplitSpec",
    "SyntheticSpec", "TransferPlan", "VectorResult", "activation",
    "check_gradient", "compare_transfer", "expectile_curve_rows", "fit_source",
    "flatten_params", "forward", "forward_batch", "generate_synthetic",
    "init_params", "linear_expectile_fit", "load_csv", "load_model",
    "load_schema", "loss_tau", "loss_tau_df", "mean_expectile_loss",
    "minimize", "minimize_vector", "mse", "param_count", "render_curves_figure",
    "render_report_figure", "risk", "risk_and_gradient", "risk_gradient",
    "run_experiment", "run_replicate", "save_model", "scalar_expectile",
    "select_hyperparams", "split", "split_sizes", "standardize_covariates",
    "transfer_fit", "unflatten_params", "validate_schema", "write_curves_tsv",
    "write_tsv",
]
