"""Detection methods behind one contract.

Eight methods, fixed ids and registration order:
zscore, mad, iqr, iforest, gbt_residual, excess_performance, bayes_hier, copula.
"""

from .base import (
    AthleteHistory,
    DetectionResult,
    DetectorConfig,
    FlagEntry,
    MethodInfo,
    UnknownMethod,
    histories_from_records,
    list_methods,
    method_ids,
    method_info,
    register_method,
    run_detector,
    run_methods,
)
from . import statistical, ml, bayes, copula

for _method in (
    statistical.ZSCORE,
    statistical.MAD,
    statistical.IQR,
    ml.IFOREST,
    ml.GBT_RESIDUAL,
    statistical.EXCESS,
    bayes.BAYES_HIER,
    copula.COPULA,
):
    register_method(_method)

__all__ = [
    "AthleteHistory",
    "DetectionResult",
    "DetectorConfig",
    "FlagEntry",
    "MethodInfo",
    "UnknownMethod",
    "histories_from_records",
    "list_methods",
    "method_ids",
    "method_info",
    "register_method",
    "run_detector",
    "run_methods",
    "statistical",
    "ml",
    "bayes",
    "copula",
]
