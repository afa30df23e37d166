"""Differentially private confidence recalibration across multiple data sources."""

from .core import (
    BinningScheme,
    ConfidenceStats,
    Dataset,
    LabeledLogits,
    accuracy,
    average_confidence,
    bin_index,
    confidence,
    confidence_stats,
    ece,
    nll_sum,
    predict_label,
)
from .dp import INFINITE, BudgetExhausted, NoiseSpec, PrivacyBudget, charge, laplace_sample, mechanize
from .golden import Mode, SearchConfig, golden_section
from .protocol import PrivateSource, QueryKind, QueryResponse, QuerySpec, aggregate, evaluate_query, respond
from .recalibrators import (
    Accounting,
    BinRemapModel,
    Method,
    RecalConfig,
    TemperatureModel,
    acc_t,
    apply,
    ece_t,
    fit_nonprivate,
    hist_bin,
    nll_t,
    none_baseline,
    one_source,
    recalibrate,
)

__version__ = "0.1.0"
