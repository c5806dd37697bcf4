"""Monte Carlo estimators of the first-best makespan lower bounds.

Two statistics bound the optimal makespan from below on a machine set of
size m':

* worst best runtime -- E[max over jobs of (min of m' fresh draws)]; sharp
  when there are few jobs per machine.
* average best runtime -- E[sum over jobs of (min of m' draws)] / m'; sharp
  when the load factor is large.

``opt_reference`` evaluates both on a reduced machine count round(delta * m)
and reports the larger, which is the usual comparison target for mechanism
campaigns.  Estimates always use fresh draws, independent of any mechanism
run, so the ratio numerator and denominator stay uncorrelated unless the
caller explicitly pairs them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import DistributionSpec

__all__ = [
    "OptEstimate",
    "expected_worst_best",
    "expected_average_best",
    "opt_reference",
    "reduced_machine_count",
]


@dataclass(frozen=True)
class OptEstimate:
    kind: str  # "worst-best" | "average-best" | "max-of-both"
    machines_used: int
    mean: float
    standard_error: float
    trials: int

    def __post_init__(self):
        if self.mean < 0 or self.standard_error < 0 or self.trials < 1:
            raise ValueError("estimate requires mean >= 0, se >= 0, trials >= 1")


def _spec_list(specs, n: int) -> list[DistributionSpec]:
    if isinstance(specs, DistributionSpec):
        return [specs] * n
    specs = list(specs)
    if len(specs) != n:
        raise ValueError(f"need one spec per job: got {len(specs)} for n={n}")
    return specs


def _per_trial_stats(specs, n, machines, trials, rng):
    """Per-trial (max over jobs, sum over jobs) of each job's m'-fold minimum."""
    worst = np.full(trials, -np.inf)
    total = np.zeros(trials)
    for spec in _spec_list(specs, n):
        best = spec.sample(rng, (trials, machines)).min(axis=1)
        np.maximum(worst, best, out=worst)
        total += best
    return worst, total


def _estimate(kind, machines, samples) -> OptEstimate:
    trials = samples.size
    se = float(np.std(samples, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return OptEstimate(kind, machines, float(samples.mean()), se, trials)


def expected_worst_best(
    specs, n: int, machines: int, trials: int, rng: np.random.Generator
) -> OptEstimate:
    """E[max over jobs of each job's best runtime on `machines` machines]."""
    if machines < 1 or trials < 1:
        raise ValueError("need machines >= 1 and trials >= 1")
    worst, _ = _per_trial_stats(specs, n, machines, trials, rng)
    return _estimate("worst-best", machines, worst)


def expected_average_best(
    specs, n: int, machines: int, trials: int, rng: np.random.Generator
) -> OptEstimate:
    """E[sum of best runtimes] divided by the (reduced) machine count."""
    if machines < 1 or trials < 1:
        raise ValueError("need machines >= 1 and trials >= 1")
    _, total = _per_trial_stats(specs, n, machines, trials, rng)
    return _estimate("average-best", machines, total / machines)


def reduced_machine_count(m: int, delta: float) -> int:
    """round(delta * m), half away from zero; errors when delta * m < 1."""
    raw = delta * m
    if raw < 1.0 - 1e-12:
        raise ValueError(f"reduced machine count delta*m = {raw:.3g} < 1")
    return int(math.floor(raw + 0.5))


def opt_reference(
    specs, n: int, m: int, delta: float, trials: int, rng: np.random.Generator
) -> OptEstimate:
    """The larger of the two bounds on round(delta * m) machines."""
    machines = reduced_machine_count(m, delta)
    worst, total = _per_trial_stats(specs, n, machines, trials, rng)
    wb = _estimate("worst-best", machines, worst)
    ab = _estimate("average-best", machines, total / machines)
    larger = wb if wb.mean >= ab.mean else ab
    return OptEstimate("max-of-both", machines, larger.mean, larger.standard_error, trials)
