"""Iterative regularization of linear inverse problems by dual gradient descent."""

import json

from ._itreg import InputError, prox, problem as _problem, run as _run, spectral_norm
from ._itreg import stopping_schedule, value

__all__ = ["InputError", "prox", "problem", "run", "spectral_norm", "stopping_schedule", "value"]


def run(config):
    """Run an experiment from a config dict (same keys as the JSON config files)."""
    return _run(json.dumps(config))


def problem(config):
    """Generate the problem instance described by a config dict."""
    return _problem(json.dumps(config))
