"""Energy-minimal NOMA/TDMA resource allocation for M2M uplinks."""

import json

from ._core import (
    M2MError,
    closed_form_powers,
    default_scenario,
    eh_harvest,
    optimal_device_time,
)

__all__ = [
    "M2MError",
    "closed_form_powers",
    "default_scenario",
    "eh_harvest",
    "optimal_device_time",
    "solve",
    "sweep",
]


def _config_text(config):
    if config is None:
        return ""
    if isinstance(config, dict):
        return json.dumps(config)
    return str(config)


def solve(strategy="noma", config=None, seed=None):
    """Solve one instance. `config` is a scenario dict or JSON text."""
    from ._core import _solve_json

    return json.loads(_solve_json(strategy, _config_text(config), seed))


def sweep(param, grid, replications=50, config=None, workers=0):
    """Monte-Carlo sweep; one dict per (value, replication, strategy)."""
    from ._core import _sweep_json

    return json.loads(_sweep_json(param, list(grid), replications, _config_text(config), workers))
