"""Simulation and tail analytics for the single-server feedback queue.

Thin re-export of the compiled module. Distribution laws are the same strings
the command line accepts, e.g. ``exp(rate=0.2)`` or
``pareto(shape=2.5, scale=0.6)``.
"""

from ._tailq import (  # noqa: F401
    busy_count_tail,
    busy_period_tail,
    canonical_law,
    completion_time_tail,
    derive,
    estimate_tail,
    first_sojourn_tail,
    fluid_multiplier,
    law_integrated_tail,
    law_inverse_survival,
    law_mean,
    law_tail,
    run_experiment,
    sample_law,
    simulate_busy,
    simulate_cycle,
    simulate_tagged,
    stationary_sojourn_tail,
)

__all__ = [
    "busy_count_tail",
    "busy_period_tail",
    "canonical_law",
    "completion_time_tail",
    "derive",
    "estimate_tail",
    "first_sojourn_tail",
    "fluid_multiplier",
    "law_integrated_tail",
    "law_inverse_survival",
    "law_mean",
    "law_tail",
    "run_experiment",
    "sample_law",
    "simulate_busy",
    "simulate_cycle",
    "simulate_tagged",
    "stationary_sojourn_tail",
]
