"""Random ReLU networks: sampling, exact gradients, flip search and probes."""

import json

from ._core import *  # noqa: F401,F403
from ._core import __version__, _run_experiment


def run_experiment(config):
    """Run a config dict; returns (csv_text, summary_dict)."""
    csv_text, summary = _run_experiment(json.dumps(config))
    return csv_text, json.loads(summary)
