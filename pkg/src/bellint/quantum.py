"""Two-qubit states, projective measurements and the six-term Bell functional.

Conventions
-----------
- States are 4x4 density matrices on C^2 (x) C^2, Alice first.
- A measurement setting is the Bloch vector m of its outcome-1 projector:
  P1 = (1 + m.sigma)/2 and P0 = 1 - P1.  Outcomes are the projector
  eigenvalues 0/1, so every observable is encoded by a single unit vector.
- The Bell functional is the Zohren-Gill form of CHSH,

      S = p(01|22) + p(10|12) + p(01|11) + p(11|21) + p(10|21) + p(00|21),

  with local bound S >= 1 and quantum minimum (3 - sqrt(2))/2 for one pair.

All values are 64-bit floats.  Born-rule probabilities in [-1e-12, 0) are
clamped to zero; anything more negative raises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

__all__ = [
    "ATOL",
    "TwoQubitState",
    "MeasurementSetting",
    "PairDistribution",
    "CorrelationTable",
    "BellValue",
    "werner_state",
    "reference_settings",
    "pair_probabilities",
    "correlation_table",
    "bell_functional",
    "deterministic_strategy_value",
    "minimum_local_value",
]

ATOL = 1e-12

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_ID2 = np.eye(2, dtype=complex)

# The six (a, b, x, y) cells summed by the Bell functional.
BELL_TERMS = ((0, 1, 2, 2), (1, 0, 1, 2), (0, 1, 1, 1),
              (1, 1, 2, 1), (1, 0, 2, 1), (0, 0, 2, 1))


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TwoQubitState:
    """Validated two-qubit density matrix (unit trace, Hermitian, PSD)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"state matrix must be 4x4, got {m.shape}")
        if abs(np.trace(m).real - 1.0) > ATOL or abs(np.trace(m).imag) > ATOL:
            raise ValueError(f"state trace must be 1, got {np.trace(m)}")
        if np.max(np.abs(m - m.conj().T)) > ATOL:
            raise ValueError("state matrix is not Hermitian")
        if np.linalg.eigvalsh(m).min() < -ATOL:
            raise ValueError("state matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", _frozen_array(m, complex))


@dataclass(frozen=True)
class MeasurementSetting:
    """Bloch vector of the outcome-1 projector P1 = (1 + bloch.sigma)/2."""

    bloch: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bloch, dtype=float)
        if b.shape != (3,):
            raise ValueError(f"bloch vector must have 3 components, got {b.shape}")
        if abs(np.linalg.norm(b) - 1.0) > ATOL:
            raise ValueError(f"bloch vector must be unit length, |b| = {np.linalg.norm(b)}")
        object.__setattr__(self, "bloch", _frozen_array(b, float))

    def projector(self, outcome: int) -> np.ndarray:
        """2x2 projector for outcome 0 or 1."""
        p1 = (_ID2 + self.bloch[0] * SIGMA_X + self.bloch[1] * SIGMA_Y
              + self.bloch[2] * SIGMA_Z) / 2.0
        return p1 if outcome == 1 else _ID2 - p1


def _clamp_probability(p: float, atol: float = ATOL) -> float:
    if p < -atol or p > 1.0 + atol:
        raise ValueError(f"probability {p} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class PairDistribution:
    """Joint outcome law p(ab|xy) of a single pair at one setting choice."""

    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self):
        for name in ("p00", "p01", "p10", "p11"):
            object.__setattr__(self, name, _clamp_probability(getattr(self, name)))
        total = self.p00 + self.p01 + self.p10 + self.p11
        if abs(total - 1.0) > ATOL:
            raise ValueError(f"pair probabilities sum to {total}, expected 1")

    def prob(self, a: int, b: int) -> float:
        return (self.p00, self.p01, self.p10, self.p11)[2 * a + b]

    def as_array(self) -> np.ndarray:
        return np.array([self.p00, self.p01, self.p10, self.p11])

    def alice_marginal(self) -> tuple[float, float]:
        """(p_A(0), p_A(1))."""
        return (self.p00 + self.p01, self.p10 + self.p11)

    def bob_marginal(self) -> tuple[float, float]:
        return (self.p00 + self.p10, self.p01 + self.p11)

    def correlation(self) -> float:
        """E[(-1)^a (-1)^b] = p00 + p11 - p01 - p10."""
        return (self.p00 + self.p11) - (self.p01 + self.p10)


@dataclass(frozen=True)
class CorrelationTable:
    """PairDistribution for each (x, y) in {1,2}^2, checked for no-signaling."""

    d11: PairDistribution
    d12: PairDistribution
    d21: PairDistribution
    d22: PairDistribution

    def __post_init__(self):
        for x in (1, 2):
            m1 = self.dist(x, 1).alice_marginal()
            m2 = self.dist(x, 2).alice_marginal()
            if abs(m1[0] - m2[0]) > ATOL:
                raise ValueError(f"Alice marginal for x={x} depends on y: {m1[0]} vs {m2[0]}")
        for y in (1, 2):
            m1 = self.dist(1, y).bob_marginal()
            m2 = self.dist(2, y).bob_marginal()
            if abs(m1[0] - m2[0]) > ATOL:
                raise ValueError(f"Bob marginal for y={y} depends on x: {m1[0]} vs {m2[0]}")

    def dist(self, x: int, y: int) -> PairDistribution:
        if x not in (1, 2) or y not in (1, 2):
            raise ValueError(f"settings must be in {{1, 2}}, got ({x}, {y})")
        return {(1, 1): self.d11, (1, 2): self.d12,
                (2, 1): self.d21, (2, 2): self.d22}[(x, y)]


@dataclass(frozen=True)
class BellValue:
    """Value of the six-term functional; the local bound is 1."""

    s: float
    classical_bound: float = 1.0

    def __post_init__(self):
        if not -1e-9 <= self.s <= 6.0 + 1e-9:
            raise ValueError(f"Bell value {self.s} outside [0, 6]")

    @property
    def violates(self) -> bool:
        return self.s < self.classical_bound


def werner_state(v: float) -> TwoQubitState:
    """Isotropic mixture v |phi+><phi+| + (1 - v)/4 of visibility v in [0, 1]."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must be in [0, 1], got {v}")
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1.0 / math.sqrt(2.0)
    return TwoQubitState(v * np.outer(phi, phi.conj()) + (1.0 - v) * np.eye(4) / 4.0)


def reference_settings() -> tuple[MeasurementSetting, MeasurementSetting,
                                  MeasurementSetting, MeasurementSetting]:
    """Settings (A1, A2, B1, B2) attaining S = (3 - sqrt(2))/2 for one pair.

    A1 = -x, A2 = -y, B1 = -(x + y)/sqrt(2), B2 = (-x + y)/sqrt(2).
    """
    r = 1.0 / math.sqrt(2.0)
    return (MeasurementSetting(np.array([-1.0, 0.0, 0.0])),
            MeasurementSetting(np.array([0.0, -1.0, 0.0])),
            MeasurementSetting(np.array([-r, -r, 0.0])),
            MeasurementSetting(np.array([-r, r, 0.0])))


def pair_probabilities(state: TwoQubitState, a_setting: MeasurementSetting,
                       b_setting: MeasurementSetting) -> PairDistribution:
    """Born-rule joint law p(ab) = Tr[rho (Pa (x) Pb)] for one pair."""
    rho = state.matrix
    pa = (a_setting.projector(0), a_setting.projector(1))
    pb = (b_setting.projector(0), b_setting.projector(1))
    probs = [np.einsum("ij,ji->", rho, np.kron(pa[a], pb[b])).real
             for a, b in product((0, 1), repeat=2)]
    return PairDistribution(*probs)


def correlation_table(state: TwoQubitState,
                      settings: tuple[MeasurementSetting, MeasurementSetting,
                                      MeasurementSetting, MeasurementSetting]) -> CorrelationTable:
    """All four single-pair distributions for settings (A1, A2, B1, B2)."""
    a1, a2, b1, b2 = settings
    return CorrelationTable(
        d11=pair_probabilities(state, a1, b1),
        d12=pair_probabilities(state, a1, b2),
        d21=pair_probabilities(state, a2, b1),
        d22=pair_probabilities(state, a2, b2),
    )


def bell_functional(table: CorrelationTable) -> BellValue:
    """Evaluate S on a correlation table."""
    return BellValue(sum(table.dist(x, y).prob(a, b) for a, b, x, y in BELL_TERMS))


def deterministic_strategy_value(a1: int, a2: int, b1: int, b2: int) -> BellValue:
    """S for the local strategy with fixed outputs (a1, a2, b1, b2)."""
    for bit in (a1, a2, b1, b2):
        if bit not in (0, 1):
            raise ValueError(f"strategy outputs must be bits, got {(a1, a2, b1, b2)}")
    a_of = {1: a1, 2: a2}
    b_of = {1: b1, 2: b2}
    s = sum(1.0 for a, b, x, y in BELL_TERMS if a_of[x] == a and b_of[y] == b)
    return BellValue(s)


def minimum_local_value() -> float:
    """Minimum of S over all 16 deterministic local strategies (equals 1)."""
    return min(deterministic_strategy_value(*bits).s
               for bits in product((0, 1), repeat=4))
