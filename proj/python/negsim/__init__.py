"""Concurrent bilateral negotiation simulator (Python bindings)."""

from ._core import (
    __version__,
    generate_dataset,
    metric_utility,
    reward_regression,
    run_experiment,
    run_teacher,
    seller_ids,
    utility,
    validate_spec,
)

__all__ = [
    "__version__",
    "generate_dataset",
    "metric_utility",
    "reward_regression",
    "run_experiment",
    "run_teacher",
    "seller_ids",
    "utility",
    "validate_spec",
]
