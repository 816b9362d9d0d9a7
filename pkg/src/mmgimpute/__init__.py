"""Multiple imputation restricted by an undirected graph over the study variables.

Each connected block of missing variables is imputed from a submodel
conditioned on the block's observed graph neighbors and fitted on every row
that observes the block and those neighbors.
"""

__version__ = "0.1.0"

from .dataset import ColumnSpec, DataMatrix, load_csv, pattern_table, rows_at_least, write_csv
from .estimators import (
    EstimatorReport,
    bootstrap,
    estimate_aipw,
    estimate_cc,
    estimate_ipw,
    estimate_ra,
    fit_nuisances,
    fit_odds,
    fit_regression,
    make_estimator,
)
from .exceptions import MMGError, NoSupportError
from .graph import UndirectedGraph, read_graph, write_graph
from .graph_select import partial_corr_graph
from .imputer import SubmodelStore, fit_all, impute_row, multiple_impute, pool, write_run
from .patterns import Pattern, factorization, missing_components, model_pattern_of, psi

__all__ = [
    "ColumnSpec", "DataMatrix", "EstimatorReport", "MMGError", "NoSupportError", "Pattern",
    "SubmodelStore", "UndirectedGraph", "bootstrap", "estimate_aipw", "estimate_cc", "estimate_ipw",
    "estimate_ra", "factorization", "fit_all", "fit_nuisances", "fit_odds", "fit_regression",
    "impute_row", "load_csv", "make_estimator", "missing_components", "model_pattern_of",
    "multiple_impute", "partial_corr_graph", "pattern_table", "pool", "psi", "read_graph",
    "rows_at_least", "write_csv", "write_graph", "write_run",
]
