"""Learning-based edge caching simulator."""

import json

from ._core import (
    CacheState,
    ConfigError,
    DimensionError,
    Error,
    InputError,
    JoinError,
    NumericError,
    ParseError,
    PreferenceModel,
    gradient,
    logistic_loss,
    predict_prob,
    proximal_weight,
    run_cli,
    run_experiment as _run_experiment,
    sigmoid,
)


def run_experiment(config):
    """Runs a config given as a dict or a JSON string and returns one metrics dict per job."""
    if not isinstance(config, str):
        config = json.dumps(config)
    return _run_experiment(config)


__all__ = [
    "CacheState",
    "ConfigError",
    "DimensionError",
    "Error",
    "InputError",
    "JoinError",
    "NumericError",
    "ParseError",
    "PreferenceModel",
    "gradient",
    "logistic_loss",
    "predict_prob",
    "proximal_weight",
    "run_cli",
    "run_experiment",
    "sigmoid",
]
