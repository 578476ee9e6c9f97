"""Calibration measurement toolkit: binned calibration-error estimators,
temperature scaling, estimator-bias analysis and selective-prediction costs."""

__version__ = "0.1.0"

from .core import (
    BinningScheme,
    BinningSpec,
    BinStats,
    PredictionSet,
    ScoreKind,
    TopLabelView,
    bin_assign,
    top_label_view,
    validate,
)
from .metrics import Aggregation, EceConfig, Norm, brier, ece, nll, reliability_data
from .recal import (
    Temperature,
    apply_temperature,
    confidence_factor,
    fit_temperature,
    logits_of,
    probabilities_of,
    split_holdout,
    subset_classes,
)
