"""Event-level Monte Carlo of the pairing-erasure test.

A source emits n entangled pairs per run at times 0, tau, ..., (n-1) tau.
Bob's photons travel a single fixed path; each of Alice's photons takes a
random delay line (an integer multiple of tau), so several emission slots
can explain one arrival time.  Detection is i.i.d. with efficiency eta per
photon.  A run is kept when both parties register all n photons (fair
sampling) and, if required, the arrival pattern is pairing-ambiguous:
Alice's arrival times are pairwise distinct and admit at least two perfect
matchings to emission slots.

Per-run random streams are derived from (master seed, run index), so runs
can be evaluated in any order or in parallel with identical results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .quantum import MeasurementSetting, TwoQubitState, pair_probabilities, reference_settings, werner_state

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "EstimateReport",
    "InsufficientDataError",
    "simulate_run",
    "run_stream",
    "run_experiment",
    "estimate_s",
    "count_perfect_matchings",
    "count_perfect_matchings_naive",
]

MATCHING_MAX_N = 15

SETTING_PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))
# (a, b, x, y) cells of the six-term functional, as in quantum.BELL_TERMS.
TERMS = ((0, 1, 2, 2), (1, 0, 1, 2), (0, 1, 1, 1),
         (1, 1, 2, 1), (1, 0, 2, 1), (0, 0, 2, 1))


class InsufficientDataError(RuntimeError):
    """A setting pair required by the functional has no kept runs."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs of one simulated campaign; defaults follow the proposed setup."""

    n: int = 3
    v: float = 1.0
    eta: float = 1.0
    tau: float = 1.0
    path_delays: tuple[int, ...] = (6, 7, 8, 9, 10)
    runs: int = 10000
    seed: int = 0
    settings: tuple[MeasurementSetting, MeasurementSetting,
                    MeasurementSetting, MeasurementSetting] | None = None
    ambiguity_required: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"pairs per run must be >= 1, got {self.n}")
        if self.runs < 1:
            raise ValueError(f"run count must be >= 1, got {self.runs}")
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"visibility must be in [0, 1], got {self.v}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.eta}")
        if self.tau <= 0.0:
            raise ValueError(f"pulse period must be positive, got {self.tau}")
        delays = tuple(int(d) for d in self.path_delays)
        if len(delays) == 0:
            raise ValueError("path_delays must not be empty")
        if len(set(delays)) != len(delays):
            raise ValueError(f"path_delays must be distinct, got {delays}")
        if min(delays) < 0:
            raise ValueError(f"path_delays must be nonnegative, got {delays}")
        object.__setattr__(self, "path_delays", delays)
        if self.settings is None:
            object.__setattr__(self, "settings", reference_settings())


@dataclass(frozen=True)
class RunRecord:
    """Everything one run produced, including what postselection saw."""

    x: int
    y: int
    alice_outcomes: tuple[int, ...]        # per pair; -1 when the photon was lost
    bob_outcomes: tuple[int, ...]
    alice_arrivals: tuple[float, ...]      # detected photons, emission + delay, in time units
    alice_hits: tuple[tuple[float, ...], tuple[float, ...]]   # times per detector 0/1
    bob_hits: tuple[tuple[float, ...], tuple[float, ...]]
    kept: bool
    output_a: int
    output_b: int


def run_stream(seed: int, run_index: int) -> np.random.Generator:
    """Independent per-run generator; the split depends only on (seed, index)."""
    return np.random.default_rng([seed, run_index])


@lru_cache(maxsize=16)
def _subset_bits(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.uint32)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(np.int64)


def count_perfect_matchings(compat) -> int:
    """Permanent of a 0/1 compatibility matrix by Ryser inclusion-exclusion."""
    a = np.asarray(compat)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"compatibility matrix must be square, got {a.shape}")
    n = a.shape[0]
    if n > MATCHING_MAX_N:
        raise ValueError(f"matrix size {n} exceeds the supported maximum {MATCHING_MAX_N}")
    a = a.astype(np.int64)
    bits = _subset_bits(n)
    row_sums = bits @ a.T                       # (2^n, n): per subset, sum over chosen columns
    products = row_sums.prod(axis=1)
    signs = 1 - 2 * ((n - bits.sum(axis=1)) % 2)
    return int(signs @ products)


def count_perfect_matchings_naive(compat) -> int:
    """Permutation enumeration, for cross-checking the Ryser path (small n)."""
    a = np.asarray(compat).astype(np.int64)
    n = a.shape[0]
    return sum(1 for perm in permutations(range(n))
               if all(a[i, perm[i]] for i in range(n)))


class _Sampler:
    """Per-config sampling tables shared by every run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        state = werner_state(cfg.v)
        a1, a2, b1, b2 = cfg.settings
        alice = {1: a1, 2: a2}
        bob = {1: b1, 2: b2}
        self.cum = {}
        for x, y in SETTING_PAIRS:
            dist = pair_probabilities(state, alice[x], bob[y])
            self.cum[(x, y)] = np.cumsum(dist.as_array())
        self.delays = np.asarray(cfg.path_delays, dtype=np.int64)

    def draw(self, stream: np.random.Generator) -> RunRecord:
        cfg = self.cfg
        n = cfg.n
        xy = int(stream.integers(0, 4))
        x, y = 1 + xy // 2, 1 + xy % 2

        outcome_codes = np.searchsorted(self.cum[(x, y)], stream.random(n), side="right")
        a_out = outcome_codes // 2          # 0/1 outcome per pair
        b_out = outcome_codes % 2
        alice_seen = stream.random(n) < cfg.eta
        bob_seen = stream.random(n) < cfg.eta
        delay_idx = stream.integers(0, len(self.delays), size=int(alice_seen.sum()))
        delays = self.delays[delay_idx]

        slots = np.flatnonzero(alice_seen)
        arrival_slots = slots + delays       # integer units of tau
        alice_outcomes = np.where(alice_seen, a_out, -1)
        bob_outcomes = np.where(bob_seen, b_out, -1)

        kept = bool(alice_seen.all() and bob_seen.all())
        if kept and cfg.ambiguity_required:
            kept = self._ambiguous(arrival_slots)

        detected_a = a_out[alice_seen]
        detected_b = b_out[bob_seen]
        out_a = 0 if (detected_a == 0).sum() > (detected_a == 1).sum() else 1
        out_b = 0 if (detected_b == 0).sum() > (detected_b == 1).sum() else 1

        tau = cfg.tau
        alice_times = arrival_slots * tau
        bob_times = np.flatnonzero(bob_seen) * tau
        return RunRecord(
            x=x, y=y,
            alice_outcomes=tuple(int(o) for o in alice_outcomes),
            bob_outcomes=tuple(int(o) for o in bob_outcomes),
            alice_arrivals=tuple(float(t) for t in alice_times),
            alice_hits=(tuple(float(t) for t in alice_times[detected_a == 0]),
                        tuple(float(t) for t in alice_times[detected_a == 1])),
            bob_hits=(tuple(float(t) for t in bob_times[detected_b == 0]),
                      tuple(float(t) for t in bob_times[detected_b == 1])),
            kept=kept,
            output_a=out_a,
            output_b=out_b,
        )

    def _ambiguous(self, arrival_slots: np.ndarray) -> bool:
        # Coincident arrivals cannot be told apart by the detectors, so the
        # run is discarded rather than counted as ambiguous.
        if len(set(arrival_slots.tolist())) != len(arrival_slots):
            return False
        compat = np.isin(arrival_slots[:, None] - np.arange(self.cfg.n)[None, :],
                         self.delays)
        return count_perfect_matchings(compat) >= 2


def simulate_run(cfg: ExperimentConfig, stream: np.random.Generator) -> RunRecord:
    """Sample a single run from its dedicated random stream."""
    return _Sampler(cfg).draw(stream)


@dataclass(frozen=True)
class EstimateReport:
    """Plug-in estimate of S_N from kept runs, with a bootstrap error bar."""

    s_hat: float
    stderr: float
    kept_runs: int
    total_runs: int
    term_probabilities: dict
    postselection_rate: float
    bootstrap_resamples: int

    def to_dict(self) -> dict:
        return {
            "s_hat": self.s_hat,
            "stderr": self.stderr,
            "kept_runs": self.kept_runs,
            "total_runs": self.total_runs,
            "term_probabilities": dict(self.term_probabilities),
            "postselection_rate": self.postselection_rate,
            "bootstrap_resamples": self.bootstrap_resamples,
        }


def _term_name(a, b, x, y):
    return f"p({a}{b}|{x}{y})"


def _s_from_counts(cell_counts: np.ndarray) -> float | None:
    """cell_counts[xy, 2a+b] -> plug-in S, or None if a setting pair is empty."""
    totals = cell_counts.sum(axis=1)
    s = 0.0
    for a, b, x, y in TERMS:
        xy = SETTING_PAIRS.index((x, y))
        if totals[xy] == 0:
            return None
        s += cell_counts[xy, 2 * a + b] / totals[xy]
    return s


def _estimate_from_codes(codes: np.ndarray, total_runs: int,
                         bootstrap_b: int, seed: int) -> EstimateReport:
    """codes: one entry per kept run, 4 * xy_index + (2a + b)."""
    if bootstrap_b < 1:
        raise ValueError(f"bootstrap resample count must be >= 1, got {bootstrap_b}")
    kept = len(codes)
    counts = np.bincount(codes, minlength=16).reshape(4, 4).astype(float)
    missing = [SETTING_PAIRS[i] for i in range(4) if counts[i].sum() == 0]
    if missing:
        raise InsufficientDataError(
            f"no kept runs for setting pairs {missing}; cannot estimate the functional")
    s_hat = _s_from_counts(counts)

    stderr = 0.0
    if bootstrap_b > 1:
        rng = np.random.default_rng(seed)
        replicates = []
        for _ in range(bootstrap_b):
            resampled = codes[rng.integers(0, kept, size=kept)]
            rep_counts = np.bincount(resampled, minlength=16).reshape(4, 4).astype(float)
            s_rep = _s_from_counts(rep_counts)
            if s_rep is not None:         # drop replicates with an empty required cell
                replicates.append(s_rep)
        if len(replicates) >= 2:
            stderr = float(np.std(replicates, ddof=1))

    terms = {}
    for a, b, x, y in TERMS:
        xy = SETTING_PAIRS.index((x, y))
        terms[_term_name(a, b, x, y)] = float(counts[xy, 2 * a + b] / counts[xy].sum())
    return EstimateReport(
        s_hat=float(s_hat), stderr=stderr,
        kept_runs=kept, total_runs=total_runs,
        term_probabilities=terms,
        postselection_rate=kept / total_runs,
        bootstrap_resamples=bootstrap_b,
    )


def _record_code(record: RunRecord) -> int:
    xy = SETTING_PAIRS.index((record.x, record.y))
    return 4 * xy + 2 * record.output_a + record.output_b


def estimate_s(records, bootstrap_b: int = 1000, seed: int = 0) -> EstimateReport:
    """Estimate S_N and its bootstrap standard error from run records."""
    records = list(records)
    codes = np.array([_record_code(r) for r in records if r.kept], dtype=np.int64)
    if len(codes) == 0:
        raise InsufficientDataError("no kept runs at all")
    return _estimate_from_codes(codes, total_runs=len(records),
                                bootstrap_b=bootstrap_b, seed=seed)


def _log_line(index: int, record: RunRecord) -> str:
    return json.dumps({
        "run": index,
        "x": record.x,
        "y": record.y,
        "output_a": record.output_a,
        "output_b": record.output_b,
        "kept": record.kept,
        "alice_arrivals": list(record.alice_arrivals),
    }, sort_keys=True)


def run_experiment(cfg: ExperimentConfig, bootstrap_b: int = 1000,
                   bootstrap_seed: int = 0, log_file=None) -> EstimateReport:
    """Simulate cfg.runs runs and estimate S_N from the kept ones.

    Streams records (memory stays flat in cfg.runs); when log_file is given,
    one JSON line per run is written in run order.
    """
    sampler = _Sampler(cfg)
    codes = np.empty(cfg.runs, dtype=np.int64)
    kept = 0
    for i in range(cfg.runs):
        record = sampler.draw(run_stream(cfg.seed, i))
        if record.kept:
            codes[kept] = _record_code(record)
            kept += 1
        if log_file is not None:
            log_file.write(_log_line(i, record) + "\n")
    if kept == 0:
        raise InsufficientDataError(
            f"none of the {cfg.runs} runs survived postselection")
    return _estimate_from_codes(codes[:kept], total_runs=cfg.runs,
                                bootstrap_b=bootstrap_b, seed=bootstrap_seed)
