"""Mean aggregation of black-box estimators into low-depth estimators.

Running a conforming black box independently and averaging trades query
count for circuit depth.  Two plans are provided: one driven by bias and
variance budgets (Chebyshev concentration, success floor above one half),
one driven by bias, per-run precision and failure probability (Hoeffding
concentration, explicit failure target).  A median booster lifts any
above-half success probability toward certainty.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Callable, NamedTuple

from .blackbox import Uqae1Contract, Uqae2Contract
from .core import ResourceLedger, SeedSpec, TargetSpec, ceil_int, derive_stream

# Bias fraction r and variance fraction s used by default for the
# bias/variance plan; they satisfy s < (1 - r)^2 / 2 with modest slack.
DEFAULT_BIAS_FRACTION_BV = 0.05
DEFAULT_VARIANCE_FRACTION_BV = 100.0 / 225.0

# Symmetric default split r = s = 1/4 for the precision/failure plan.
DEFAULT_BIAS_FRACTION_PF = 0.25
DEFAULT_TAIL_FRACTION_PF = 0.25

Uqae1Sampler = Callable[[Uqae1Contract, SeedSpec, ResourceLedger], float]
Uqae2Sampler = Callable[[Uqae2Contract, SeedSpec, ResourceLedger], float]


class FeasibilityCheck(NamedTuple):
    valid: bool
    success_floor: float


def bias_variance_floor(bias_fraction: float, variance_fraction: float) -> FeasibilityCheck:
    """Feasibility of mean aggregation under bias/variance budgets.

    An estimator with bias at most ``bias_fraction * eps`` and variance at
    most ``variance_fraction * eps^2`` lands within eps of the truth with
    probability at least ``1 - variance_fraction / (1 - bias_fraction)^2``
    (Chebyshev).  The combination is valid when that floor exceeds 1/2,
    i.e. when variance_fraction < (1 - bias_fraction)^2 / 2.
    """
    if not 0.0 < bias_fraction < 1.0:
        raise ValueError("bias_fraction must lie in (0, 1)")
    if variance_fraction <= 0.0:
        raise ValueError("variance_fraction must be positive")
    headroom = (1.0 - bias_fraction) ** 2
    valid = variance_fraction < 0.5 * headroom
    return FeasibilityCheck(valid, 1.0 - variance_fraction / headroom)


@dataclass(frozen=True)
class Type1Plan:
    """Aggregation schedule for a bias/variance black box."""

    bias_fraction: float
    variance_fraction: float
    bias_bound: float
    variance_bound: float
    runs: int

    @classmethod
    def from_target(
        cls,
        target: TargetSpec,
        bias_fraction: float = DEFAULT_BIAS_FRACTION_BV,
        variance_fraction: float = DEFAULT_VARIANCE_FRACTION_BV,
    ) -> "Type1Plan":
        check = bias_variance_floor(bias_fraction, variance_fraction)
        if not check.valid:
            raise ValueError(
                "variance_fraction must stay below (1 - bias_fraction)^2 / 2 "
                f"(got r={bias_fraction}, s={variance_fraction})"
            )
        eps, beta = target.epsilon, target.beta
        return cls(
            bias_fraction=bias_fraction,
            variance_fraction=variance_fraction,
            bias_bound=bias_fraction * eps,
            variance_bound=variance_fraction * eps ** (2.0 - 2.0 * beta),
            runs=ceil_int(eps ** (-2.0 * beta)),
        )

    def contract(self) -> Uqae1Contract:
        return Uqae1Contract(self.bias_bound, self.variance_bound)


@dataclass(frozen=True)
class Type2Plan:
    """Aggregation schedule for a bias/precision/failure black box.

    ``runs`` is fixed first from the overall failure budget; the per-run
    failure probability then divides half that budget across the runs while
    also keeping the conditional bias shift below tail_fraction * eps.
    """

    bias_fraction: float
    tail_fraction: float
    output_cap: float
    bias_bound: float
    run_precision: float
    run_fail_prob: float
    runs: int

    @classmethod
    def from_target(
        cls,
        target: TargetSpec,
        bias_fraction: float = DEFAULT_BIAS_FRACTION_PF,
        tail_fraction: float = DEFAULT_TAIL_FRACTION_PF,
        output_cap: float = 1.0,
    ) -> "Type2Plan":
        if bias_fraction <= 0 or tail_fraction <= 0:
            raise ValueError("fractions must be positive")
        if bias_fraction + tail_fraction >= 1.0:
            raise ValueError("bias_fraction + tail_fraction must stay below 1")
        if output_cap < 1.0:
            raise ValueError("output_cap must be at least 1")
        eps, delta, beta = target.epsilon, target.delta, target.beta
        slack = 1.0 - bias_fraction - tail_fraction
        runs = ceil_int(2.0 * math.log(4.0 / delta) * eps ** (-2.0 * beta) / slack**2)
        run_fail_prob = min(delta / (2.0 * runs), tail_fraction * eps / output_cap)
        return cls(
            bias_fraction=bias_fraction,
            tail_fraction=tail_fraction,
            output_cap=output_cap,
            bias_bound=bias_fraction * eps,
            run_precision=eps ** (1.0 - beta),
            run_fail_prob=run_fail_prob,
            runs=runs,
        )

    def contract(self) -> Uqae2Contract:
        return Uqae2Contract(
            self.bias_bound, self.run_precision, self.run_fail_prob, self.output_cap
        )


def _seeded_mean(values: list[float]) -> float:
    # fsum gives an exactly rounded sum, so the reduction is independent of
    # any parallel schedule the runs might have used.
    return math.fsum(values) / len(values)


def aggregate_type1(
    sampler: Uqae1Sampler,
    target: TargetSpec,
    bias_fraction: float = DEFAULT_BIAS_FRACTION_BV,
    variance_fraction: float = DEFAULT_VARIANCE_FRACTION_BV,
    *,
    seed: SeedSpec,
    ledger: ResourceLedger,
) -> float:
    """Mean of independent bias/variance-contract runs.

    The sampler must honour Uqae1Contract(bias_fraction * eps,
    variance_fraction * eps^(2 - 2 beta)); the mean of ceil(eps^(-2 beta))
    such runs then lands within eps of the truth with probability above the
    :func:`bias_variance_floor`.
    """
    plan = Type1Plan.from_target(target, bias_fraction, variance_fraction)
    contract = plan.contract()
    estimates = [
        sampler(contract, derive_stream(seed, index), ledger) for index in range(plan.runs)
    ]
    return _seeded_mean(estimates)


def aggregate_type2(
    sampler: Uqae2Sampler,
    target: TargetSpec,
    bias_fraction: float = DEFAULT_BIAS_FRACTION_PF,
    tail_fraction: float = DEFAULT_TAIL_FRACTION_PF,
    output_cap: float = 1.0,
    *,
    seed: SeedSpec,
    ledger: ResourceLedger,
) -> float:
    """Mean of independent precision/failure-contract runs.

    Good/bad decomposition plus a union bound keeps the bad-run mass below
    half the failure budget; Hoeffding on the good part covers the rest, so
    the mean lands within eps with probability at least 1 - delta.
    """
    plan = Type2Plan.from_target(target, bias_fraction, tail_fraction, output_cap)
    contract = plan.contract()
    estimates = [
        sampler(contract, derive_stream(seed, index), ledger) for index in range(plan.runs)
    ]
    return _seeded_mean(estimates)


def boost_repetitions(success_floor: float, delta_target: float) -> int:
    """Odd repetition count driving a per-run success floor > 1/2 down to
    failure probability delta_target via the median (Chernoff bound)."""
    if not 0.5 < success_floor < 1.0:
        raise ValueError("success_floor must lie in (1/2, 1)")
    if not 0.0 < delta_target < 1.0:
        raise ValueError("delta_target must lie in (0, 1)")
    raw = math.log(1.0 / delta_target) / (2.0 * (success_floor - 0.5) ** 2)
    repetitions = max(1, ceil_int(raw))
    return repetitions if repetitions % 2 == 1 else repetitions + 1


def median_boost(
    runner: Callable[[SeedSpec, ResourceLedger], float],
    repetitions: int,
    *,
    seed: SeedSpec,
    ledger: ResourceLedger,
) -> float:
    """Median of an odd number of independent estimates.

    If each run succeeds with probability p > 1/2, the median fails with
    probability at most exp(-2 * repetitions * (p - 1/2)^2); use
    :func:`boost_repetitions` to size ``repetitions`` for a failure target.
    """
    if repetitions < 1 or repetitions % 2 == 0:
        raise ValueError("repetitions must be a positive odd integer")
    estimates = [runner(derive_stream(seed, index), ledger) for index in range(repetitions)]
    return float(statistics.median(estimates))
