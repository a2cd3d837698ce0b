"""Detection inefficiency: coarse-grained statistics and critical efficiency.

Every photon is registered independently with probability eta (identical
for all four detectors, heralded source, no dark counts).  A pair then
contributes one of nine increment events: both photons seen (joint quantum
law), one side seen (that party's marginal, the other increment 0), or
nothing.  Parties keep the majority rule, so an undetected side outputs 1,
exactly like a tie.

The critical efficiency eta_min(N) is the largest root of S_N(eta) = 1
below 1: above it the aggregated statistics still violate the local bound
without any fair-sampling assumption.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .aggregation import (
    AggregatedDistribution,
    aggregate_pair,
    bell_from_aggregates,
    convolve_increments,
    DifferenceDistribution,
    majority_probabilities,
)
from .quantum import (
    BellValue,
    MeasurementSetting,
    PairDistribution,
    TwoQubitState,
    correlation_table,
)

__all__ = [
    "LossyIncrementLaw",
    "EfficiencyResult",
    "NoViolationError",
    "lossy_increment_law",
    "aggregate_pair_eta",
    "s_n_eta",
    "eta_min",
    "brute_force_p_n_eta",
]

LAW_ATOL = 1e-12
BISECTION_MAX_ITERATIONS = 60
BRUTE_FORCE_ETA_MAX_N = 4


class NoViolationError(RuntimeError):
    """Raised when no efficiency threshold exists (S_N >= 1 even at eta = 1)."""


@dataclass(frozen=True)
class LossyIncrementLaw:
    """Per-pair joint increment law under loss; prob[da+1, db+1] for da, db in {-1,0,+1}."""

    prob: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.prob, dtype=float)
        if p.shape != (3, 3):
            raise ValueError(f"increment law must be 3x3, got {p.shape}")
        if p.min() < -LAW_ATOL:
            raise ValueError("negative increment probability")
        if abs(p.sum() - 1.0) > LAW_ATOL:
            raise ValueError(f"increment law mass {p.sum()} differs from 1")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "prob", p)


def lossy_increment_law(pair: PairDistribution, eta: float) -> LossyIncrementLaw:
    """Mix the joint law (both seen) with marginals (one seen) by eta weights."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must be in [0, 1], got {eta}")
    pa0, pa1 = pair.alice_marginal()
    pb0, pb1 = pair.bob_marginal()
    both = eta * eta
    single = eta * (1.0 - eta)
    law = np.zeros((3, 3))
    law[2, 2] = both * pair.p00
    law[2, 0] = both * pair.p01
    law[0, 2] = both * pair.p10
    law[0, 0] = both * pair.p11
    law[2, 1] = single * pa0
    law[0, 1] = single * pa1
    law[1, 2] = single * pb0
    law[1, 0] = single * pb1
    law[1, 1] = (1.0 - eta) ** 2
    return LossyIncrementLaw(prob=law)


def aggregate_pair_eta(pair: PairDistribution, n: int, eta: float) -> AggregatedDistribution:
    """Aggregated law for n pairs at detection efficiency eta.

    eta = 1 reduces to the lossless law exactly, so that case reuses the
    lossless fast path.
    """
    if eta == 1.0:
        return aggregate_pair(pair, n)
    law = lossy_increment_law(pair, eta)
    table = convolve_increments(law.prob, n)
    return majority_probabilities(DifferenceDistribution(n=n, prob=table))


def s_n_eta(state: TwoQubitState,
            settings: tuple[MeasurementSetting, MeasurementSetting,
                            MeasurementSetting, MeasurementSetting],
            n: int, eta: float) -> BellValue:
    """S_N with per-photon detection efficiency eta."""
    if n < 1:
        raise ValueError(f"pair count must be >= 1, got {n}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must be in [0, 1], got {eta}")
    table = correlation_table(state, settings)
    aggregates = {(x, y): aggregate_pair_eta(table.dist(x, y), n, eta)
                  for x in (1, 2) for y in (1, 2)}
    return bell_from_aggregates(aggregates)


@dataclass(frozen=True)
class EfficiencyResult:
    """Critical efficiency for n pairs, with the solver trace that produced it."""

    n: int
    eta_min: float
    bracket: tuple[float, float]
    iterations: int
    s_at_eta_min: float


def eta_min(state: TwoQubitState,
            settings: tuple[MeasurementSetting, MeasurementSetting,
                            MeasurementSetting, MeasurementSetting],
            n: int, tol: float = 1e-10) -> EfficiencyResult:
    """Bisect for the largest root of S_N(eta) = 1 below 1.

    The initial bracket [eta0, 1] comes from scanning eta downward from 1
    in steps of 0.01 until S_N >= 1 (eta = 0 always qualifies since both
    parties then output 1 deterministically and S = 1).
    """
    if tol < 1e-10:
        raise ValueError(f"tolerance must be >= 1e-10, got {tol}")

    def s_at(eta):
        return s_n_eta(state, settings, n, eta).s

    if not s_at(1.0) < 1.0:
        raise NoViolationError(f"no violation at eta = 1 for n = {n}; no threshold exists")

    lo = 1.0
    step = 1
    while lo > 0.0:
        lo = max(1.0 - 0.01 * step, 0.0)
        if s_at(lo) >= 1.0:
            break
        step += 1
    bracket = (lo, 1.0)

    hi = 1.0
    iterations = 0
    while iterations < BISECTION_MAX_ITERATIONS and hi - lo > tol:
        mid = (lo + hi) / 2.0
        if s_at(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    return EfficiencyResult(n=n, eta_min=hi, bracket=bracket,
                            iterations=iterations, s_at_eta_min=s_at(hi))


def brute_force_p_n_eta(pair: PairDistribution, eta: float, n: int) -> AggregatedDistribution:
    """Oracle: enumerate all 4^n detection patterns and their outcome assignments.

    Independent of the convolution route; per pair the pattern is one of
    {both, Alice only, Bob only, neither} and the detected outcomes are
    drawn from the joint law or the single-party marginals.
    """
    if not 1 <= n <= BRUTE_FORCE_ETA_MAX_N:
        raise ValueError(f"lossy brute force supports 1 <= n <= {BRUTE_FORCE_ETA_MAX_N}, got {n}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must be in [0, 1], got {eta}")
    pa = pair.alice_marginal()
    pb = pair.bob_marginal()
    pattern_weight = (eta * eta, eta * (1.0 - eta), (1.0 - eta) * eta, (1.0 - eta) ** 2)
    agg = np.zeros(4)
    for pattern in product(range(4), repeat=n):
        w_pattern = 1.0
        for d in pattern:
            w_pattern *= pattern_weight[d]
        if w_pattern == 0.0:
            continue
        per_pair_events = []
        for d in pattern:
            if d == 0:
                per_pair_events.append([(1 - 2 * a, 1 - 2 * b, pair.prob(a, b))
                                        for a in (0, 1) for b in (0, 1)])
            elif d == 1:
                per_pair_events.append([(1 - 2 * a, 0, pa[a]) for a in (0, 1)])
            elif d == 2:
                per_pair_events.append([(0, 1 - 2 * b, pb[b]) for b in (0, 1)])
            else:
                per_pair_events.append([(0, 0, 1.0)])
        for combo in product(*per_pair_events):
            w = w_pattern
            d_a = d_b = 0
            for da, db, pr in combo:
                w *= pr
                d_a += da
                d_b += db
            out_a = 0 if d_a > 0 else 1
            out_b = 0 if d_b > 0 else 1
            agg[2 * out_a + out_b] += w
    return AggregatedDistribution(*agg)
