"""From-scratch tree learners: second-order boosting and a random forest."""

from .ensemble import (Hyperparameters, Tree, TreeEnsemble, fit_gbdt,
                       fit_random_forest, load_model, predict,
                       random_forest_defaults, raw_score, save_model,
                       tweedie_defaults, variable_importance,
                       xgboost_defaults)
from .objectives import (squared_grad_hess, squared_loss, tweedie_grad_hess,
                         tweedie_loss, validate_tweedie_power)
from .search import SearchResult, Trial, kfold_cv, random_grid_search

__all__ = [
    "Hyperparameters", "Tree", "TreeEnsemble",
    "fit_gbdt", "fit_random_forest", "predict", "raw_score",
    "save_model", "load_model", "variable_importance",
    "xgboost_defaults", "tweedie_defaults", "random_forest_defaults",
    "squared_grad_hess", "squared_loss", "tweedie_grad_hess", "tweedie_loss",
    "validate_tweedie_power",
    "kfold_cv", "random_grid_search", "SearchResult", "Trial",
]
