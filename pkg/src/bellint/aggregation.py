"""Majority-vote coarse-graining of N i.i.d. pairs, exactly.

Each party sees only the photon counts N0, N1 collected by its two detectors
over N pairs and outputs the label of the busier detector; on a tie
(N0 <= N1, which includes seeing nothing at all) the output is 1.  Writing
D = N0 - N1, the output is 0 iff D > 0.

Three exact routes to the aggregated law p_N(ab|xy) are provided:

- a dynamic program over the joint count differences (D_A, D_B), a
  (2N+1) x (2N+1) table convolved N times with the per-pair increment law
  (O(N^3) work, the general-purpose route);
- a conditional-binomial factorization for per-pair laws with unbiased
  marginals (p00 = p11, p01 = p10): splitting pairs into "equal outcome"
  and "unequal outcome" groups makes U = N00 - N11 and W = N01 - N10
  independent symmetric binomial differences given the group sizes, so the
  quadrant masses are Bernstein polynomials in (1 + c)/2 with c the
  per-pair correlation.  Precomputing the coefficient tables makes one
  evaluation O(N), which is what lets N run into the thousands;
- literal enumeration of all 4^N outcome strings (the oracle, N <= 8).

The N -> infinity limit of the unbiased case is the bivariate-normal
orthant law: p_inf(00) = 1/4 + arcsin(rho)/(2 pi) and cyclically, with rho
the per-pair correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .quantum import (
    BELL_TERMS,
    BellValue,
    CorrelationTable,
    MeasurementSetting,
    PairDistribution,
    TwoQubitState,
    correlation_table,
)

__all__ = [
    "DifferenceDistribution",
    "AggregatedDistribution",
    "UnsupportedRegimeError",
    "difference_distribution",
    "majority_probabilities",
    "aggregate_pair",
    "brute_force_p_n",
    "s_n",
    "bell_from_aggregates",
    "asymptotic_s",
]

MASS_ATOL = 1e-10
# Per-pair laws whose outcome marginals are unbiased to this tolerance take
# the factorized route; Born-rule values for maximally mixed marginals land
# within a few ulp of exact symmetry.
SYMMETRY_ATOL = 1e-13

BRUTE_FORCE_MAX_N = 8


class UnsupportedRegimeError(ValueError):
    """Raised when the asymptotic limit is requested for biased marginals."""


@dataclass(frozen=True)
class DifferenceDistribution:
    """Joint law of (D_A, D_B) after n pairs; prob[i, j] is P(D_A = i - n, D_B = j - n)."""

    n: int
    prob: np.ndarray

    def __post_init__(self):
        size = 2 * self.n + 1
        p = np.asarray(self.prob, dtype=float)
        if p.shape != (size, size):
            raise ValueError(f"table must be {size}x{size} for n={self.n}, got {p.shape}")
        mass = p.sum()
        if abs(mass - 1.0) > MASS_ATOL:
            raise ValueError(f"difference table mass {mass} differs from 1")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "prob", p)

    def probability(self, d_a: int, d_b: int) -> float:
        return float(self.prob[d_a + self.n, d_b + self.n])


@dataclass(frozen=True)
class AggregatedDistribution:
    """Coarse-grained outcome law p_N(ab|xy) for one setting pair."""

    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self):
        values = (self.p00, self.p01, self.p10, self.p11)
        if min(values) < -MASS_ATOL:
            raise ValueError(f"negative aggregated probability in {values}")
        total = sum(values)
        if abs(total - 1.0) > MASS_ATOL:
            raise ValueError(f"aggregated probabilities sum to {total}")

    def prob(self, a: int, b: int) -> float:
        return (self.p00, self.p01, self.p10, self.p11)[2 * a + b]

    def as_array(self) -> np.ndarray:
        return np.array([self.p00, self.p01, self.p10, self.p11])


def increment_law(pair: PairDistribution) -> np.ndarray:
    """Lossless per-pair increment law on {-1,0,+1}^2 (middle row/col empty).

    Entry [da+1, db+1] is the probability of (delta_A, delta_B) = (da, db),
    where delta = +1 for a detector-0 hit and -1 for a detector-1 hit.
    """
    law = np.zeros((3, 3))
    law[2, 2] = pair.p00
    law[2, 0] = pair.p01
    law[0, 2] = pair.p10
    law[0, 0] = pair.p11
    return law


def convolve_increments(law: np.ndarray, n: int) -> np.ndarray:
    """n-fold convolution of a 3x3 increment law into a (2n+1)^2 table."""
    if n < 1:
        raise ValueError(f"pair count must be >= 1, got {n}")
    law = np.asarray(law, dtype=float)
    if law.shape != (3, 3):
        raise ValueError(f"increment law must be 3x3, got {law.shape}")
    size = 2 * n + 1
    table = np.zeros((size, size))
    table[n, n] = 1.0
    steps = [(da, db, law[da + 1, db + 1])
             for da in (-1, 0, 1) for db in (-1, 0, 1) if law[da + 1, db + 1] != 0.0]
    for _ in range(n):
        nxt = np.zeros_like(table)
        for da, db, w in steps:
            src = table[max(0, -da):size - max(0, da), max(0, -db):size - max(0, db)]
            nxt[max(0, da):size - max(0, -da), max(0, db):size - max(0, -db)] += w * src
        table = nxt
    return table


def difference_distribution(pair: PairDistribution, n: int) -> DifferenceDistribution:
    """Exact joint law of (D_A, D_B) for n i.i.d. pairs drawn from `pair`."""
    if n < 1:
        raise ValueError(f"pair count must be >= 1, got {n}")
    return DifferenceDistribution(n=n, prob=convolve_increments(increment_law(pair), n))


def majority_probabilities(diff: DifferenceDistribution) -> AggregatedDistribution:
    """Apply the majority rule: output 0 iff D > 0, output 1 on D <= 0 (ties)."""
    n = diff.n
    t = diff.prob
    pos = slice(n + 1, None)
    rest = slice(0, n + 1)
    return AggregatedDistribution(
        p00=float(t[pos, pos].sum()),
        p01=float(t[pos, rest].sum()),
        p10=float(t[rest, pos].sum()),
        p11=float(t[rest, rest].sum()),
    )


# ---------------------------------------------------------------------------
# Factorized route for unbiased per-pair laws.
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _quadrant_tables(n: int) -> np.ndarray:
    """Quadrant masses conditional on k "equal outcome" pairs out of n.

    Returns a (4, n+1) array Q with Q[:, k] = (q00, q01, q10, q11)(n, k),
    the majority-rule quadrant probabilities given that U = N00 - N11 is a
    symmetric binomial difference over k pairs and W = N01 - N10 one over
    n - k pairs, independently.  Output 0 on both sides needs |W| < U; the
    remaining quadrants follow from D_A = U + W > 0 and D_B = U - W > 0.
    """
    # rows[k][j] = C(k, j) / 2^k, built by the halved Pascal recurrence
    rows = [np.array([1.0])]
    for k in range(1, n + 1):
        prev = rows[-1]
        rows.append((np.concatenate(([0.0], prev)) + np.concatenate((prev, [0.0]))) / 2.0)

    q = np.zeros((4, n + 1))
    for k in range(n + 1):
        m = n - k
        pmf_u = rows[k]
        u = 2 * np.arange(k + 1) - k
        cdf_y = np.concatenate(([0.0], np.cumsum(rows[m])))

        def cdf_w(w):
            # P(W <= w) with W = 2Y - m, Y ~ Bin(m, 1/2)
            idx = np.floor_divide(w + m, 2)
            return cdf_y[np.clip(idx + 1, 0, m + 1)]

        q00 = pmf_u @ np.maximum(cdf_w(u - 1) - cdf_w(-u), 0.0)
        q01 = pmf_u @ (1.0 - cdf_w(np.maximum(u, 1 - u) - 1))
        q10 = pmf_u @ cdf_w(np.minimum(-u, u - 1))
        q[:, k] = (q00, q01, q10, 1.0 - q00 - q01 - q10)
    return q


def _binomial_weights(n: int, p: float) -> np.ndarray:
    """Bin(n, p) pmf over k = 0..n, stable for large n."""
    if p <= 0.0:
        w = np.zeros(n + 1)
        w[0] = 1.0
        return w
    if p >= 1.0:
        w = np.zeros(n + 1)
        w[n] = 1.0
        return w
    k = np.arange(n + 1)
    if n <= 60:
        coeff = np.array([math.comb(n, int(j)) for j in k], dtype=float)
        return coeff * p ** k * (1.0 - p) ** (n - k)
    log_coeff = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return np.exp(log_coeff + k * math.log(p) + (n - k) * math.log1p(-p))


def aggregate_symmetric(c: float, n: int) -> AggregatedDistribution:
    """Aggregated law for an unbiased per-pair law with correlation c.

    The per-pair distribution is ((1+c)/4, (1-c)/4, (1-c)/4, (1+c)/4); the
    number of equal-outcome pairs is Bin(n, (1+c)/2) and the quadrant masses
    follow from the cached conditional tables.
    """
    if not -1.0 - 1e-12 <= c <= 1.0 + 1e-12:
        raise ValueError(f"correlation must be in [-1, 1], got {c}")
    if n < 1:
        raise ValueError(f"pair count must be >= 1, got {n}")
    weights = _binomial_weights(n, (1.0 + c) / 2.0)
    p00, p01, p10, p11 = _quadrant_tables(n) @ weights
    return AggregatedDistribution(p00=p00, p01=p01, p10=p10, p11=p11)


def aggregate_pair(pair: PairDistribution, n: int) -> AggregatedDistribution:
    """Aggregated law p_N for one setting pair, choosing the fastest exact route."""
    if n < 1:
        raise ValueError(f"pair count must be >= 1, got {n}")
    if (abs(pair.p00 - pair.p11) <= SYMMETRY_ATOL
            and abs(pair.p01 - pair.p10) <= SYMMETRY_ATOL):
        return aggregate_symmetric(pair.correlation(), n)
    return majority_probabilities(difference_distribution(pair, n))


def brute_force_p_n(pair: PairDistribution, n: int) -> AggregatedDistribution:
    """Literal sum over all 4^n outcome strings; the oracle for the fast routes."""
    if not 1 <= n <= BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force supports 1 <= n <= {BRUTE_FORCE_MAX_N}, got {n}")
    p = pair.as_array()
    codes = np.arange(4 ** n)
    digits = (codes[:, None] // 4 ** np.arange(n)) % 4     # per-pair outcome index
    weight = p[digits].prod(axis=1)
    delta_a = 1 - 2 * (digits // 2)
    delta_b = 1 - 2 * (digits % 2)
    out_a = (delta_a.sum(axis=1) <= 0).astype(int)         # 1 on ties
    out_b = (delta_b.sum(axis=1) <= 0).astype(int)
    agg = np.zeros(4)
    np.add.at(agg, 2 * out_a + out_b, weight)
    return AggregatedDistribution(*agg)


def bell_from_aggregates(tables: dict[tuple[int, int], AggregatedDistribution]) -> BellValue:
    """Six-term functional evaluated on aggregated laws keyed by (x, y)."""
    return BellValue(sum(tables[(x, y)].prob(a, b) for a, b, x, y in BELL_TERMS))


def s_n(state: TwoQubitState,
        settings: tuple[MeasurementSetting, MeasurementSetting,
                        MeasurementSetting, MeasurementSetting],
        n: int) -> BellValue:
    """S_N for n lossless pairs, exact for any state and settings."""
    table = correlation_table(state, settings)
    aggregates = {(x, y): aggregate_pair(table.dist(x, y), n)
                  for x in (1, 2) for y in (1, 2)}
    return bell_from_aggregates(aggregates)


MARGINAL_BIAS_ATOL = 1e-9


def asymptotic_s(state: TwoQubitState,
                 settings: tuple[MeasurementSetting, MeasurementSetting,
                                 MeasurementSetting, MeasurementSetting]) -> BellValue:
    """N -> infinity limit of S_N via the bivariate-normal orthant law.

    Requires every single-pair outcome marginal to equal 1/2 (otherwise the
    majority saturates and the central limit route does not apply).
    """
    table = correlation_table(state, settings)
    gains = {}
    for x in (1, 2):
        for y in (1, 2):
            d = table.dist(x, y)
            for label, marg in (("Alice", d.alice_marginal()), ("Bob", d.bob_marginal())):
                if abs(marg[0] - 0.5) > MARGINAL_BIAS_ATOL:
                    raise UnsupportedRegimeError(
                        f"{label} marginal {marg[0]} at (x={x}, y={y}) is biased; "
                        "the orthant limit needs unbiased marginals")
            gains[(x, y)] = math.asin(d.correlation()) / (2.0 * math.pi)
    s = sum(0.25 + gains[(x, y)] if a == b else 0.25 - gains[(x, y)]
            for a, b, x, y in BELL_TERMS)
    return BellValue(s)
