"""Fixed-effects linear, factor and tree-ensemble forecasting models."""

from .base import ConvergenceError, Fingerprint, FittedModel, RankDeficiencyError, SchemaMismatchError
from .design import INFOSETS, DesignMatrix, build_design, from_arrays, infoset_features
from .linear import (LinearFEModel, fit_elastic_net, fit_factor_ridge, fit_lasso, fit_ols_fe, fit_pcr,
                     fit_quantile, fit_ridge, kkt_residual)
from .registry import (FAMILIES, LINEAR_FAMILIES, TREE_FAMILIES, HyperparamError, ModelSpec, fit, load_defaults,
                       predict, sample_params, validate)
from .serialize import load_model, save_model
from .trees import (COUNTRY_FEATURE, GroupedModel, Tree, TreeEnsemble, fit_bagging, fit_extra_trees,
                    fit_gradient_boosting, fit_multilayer, fit_random_forest, fit_tree)

__all__ = [
    "ConvergenceError", "Fingerprint", "FittedModel", "RankDeficiencyError", "SchemaMismatchError",
    "INFOSETS", "DesignMatrix", "build_design", "from_arrays", "infoset_features",
    "LinearFEModel", "fit_elastic_net", "fit_factor_ridge", "fit_lasso", "fit_ols_fe", "fit_pcr",
    "fit_quantile", "fit_ridge", "kkt_residual",
    "FAMILIES", "LINEAR_FAMILIES", "TREE_FAMILIES", "HyperparamError", "ModelSpec", "fit", "load_defaults",
    "predict", "sample_params", "validate", "load_model", "save_model",
    "COUNTRY_FEATURE", "GroupedModel", "Tree", "TreeEnsemble", "fit_bagging", "fit_extra_trees",
    "fit_gradient_boosting", "fit_multilayer", "fit_random_forest", "fit_tree",
]
