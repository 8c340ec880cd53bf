"""Myoelectric decoding pipeline with a synthetic signal front-end.

Subpackages mirror the processing chain: :mod:`myodecode.synth` generates
movement profiles and surrogate EMG, :mod:`myodecode.dsp` expands and
filters channels and extracts MAV features, :mod:`myodecode.decoder`
trains and runs the Kalman-filter decoder, :mod:`myodecode.evaluation`
scores SNR/RMSE and equivalence statistics, :mod:`myodecode.datastore`
persists sessions, and :mod:`myodecode.runtime` drives everything on the
fixed 40-ms control cadence.
"""

from . import datastore, decoder, dsp, evaluation, runtime, synth
from .errors import MyodecodeError, NumericalError, SchemaError

__version__ = "0.1.0"

__all__ = [
    "datastore",
    "decoder",
    "dsp",
    "evaluation",
    "runtime",
    "synth",
    "MyodecodeError",
    "NumericalError",
    "SchemaError",
    "__version__",
]
