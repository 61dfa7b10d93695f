from .cv import CVReport, FoldResult, GridResult, PreparedFold, cv_accuracy, grid_search, nested_cv, prepare_folds
from .folds import FoldPlan, time_series_folds
from .metrics import AUCUndefinedWarning, Metrics, auc_trapezoid, evaluate, mean_metrics, roc_auc, roc_curve
from .search import BayesOptResult, Categorical, GaussianProcess, Numeric, SearchSpace, bayes_opt

__all__ = [
    "AUCUndefinedWarning",
    "BayesOptResult",
    "CVReport",
    "Categorical",
    "FoldPlan",
    "FoldResult",
    "GaussianProcess",
    "GridResult",
    "Metrics",
    "Numeric",
    "PreparedFold",
    "SearchSpace",
    "auc_trapezoid",
    "bayes_opt",
    "cv_accuracy",
    "evaluate",
    "grid_search",
    "mean_metrics",
    "nested_cv",
    "prepare_folds",
    "roc_auc",
    "roc_curve",
    "time_series_folds",
]
