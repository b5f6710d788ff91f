"""Longitudinal anomaly screening for athletics performance data."""

__version__ = "0.1.0"

from . import detectors, evaluation, oracle, records, store, synth

__all__ = ["detectors", "evaluation", "oracle", "records", "store", "synth", "__version__"]
