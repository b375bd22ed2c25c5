"""Battery dispatch on a three-phase feeder with heterogeneous GNNs.

Configs travel as JSON strings (see docs/formats.md); `config()` builds one
from keyword overrides of the defaults.
"""

import json

from ._core import (
    Error,
    FormatError,
    GenerationError,
    SchemaError,
    TrainingError,
    UsageError,
    cigre18_json,
    default_config,
    evaluate,
    full_scale_config,
    gain_ratio,
    generate_dataset,
    optimize_dispatch,
    power_flow,
    report,
    train,
)


def config(full_scale=False, **overrides):
    """Run config JSON with top-level keys replaced; `model` and `sampling` merge."""
    cfg = json.loads(full_scale_config() if full_scale else default_config())
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    return json.dumps(cfg)
