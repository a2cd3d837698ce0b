"""Multi-start minimization of S_N over the four measurement Bloch vectors.

The search space is eight angles, one (theta, phi) spherical pair per
setting.  Every run seeds start 0 with the reference settings, so the
optimum never falls short of the single-pair witness, and adds uniformly
random starts with per-start streams derived from (master seed, start
index).  Local refinement is Nelder-Mead; the reduction over starts picks
the smallest value with ties broken by start index, which makes results
independent of how starts are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from ._parallel import map_ordered
from .loss import s_n_eta
from .quantum import BellValue, MeasurementSetting, werner_state, reference_settings

__all__ = [
    "AngleVector",
    "OptimizerConfig",
    "OptimizationResult",
    "SweepCell",
    "NonConvergenceError",
    "settings_from_angles",
    "angles_from_settings",
    "reference_angles",
    "minimize_s_n",
    "sweep",
    "violation_threshold",
]


class NonConvergenceError(RuntimeError):
    """No start converged within the evaluation budget; carries the best attempt."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class OptimizerConfig:
    """Multi-start search budget.  Start 0 is always the reference settings."""

    starts: int = 32
    tol: float = 1e-9          # objective-spread stopping tolerance per start
    xatol: float = 1e-7
    max_evals: int = 20000     # per start
    seed: int = 0
    n_cap: int = 24            # sweep guard against runaway pair counts

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError(f"need at least one start, got {self.starts}")
        if self.max_evals < 1:
            raise ValueError(f"max_evals must be >= 1, got {self.max_evals}")


@dataclass(frozen=True)
class AngleVector:
    """Spherical angles (theta1, phi1, ..., theta4, phi4) for the four settings."""

    angles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        if a.shape != (8,):
            raise ValueError(f"angle vector must have 8 components, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("angles must be finite")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)


def settings_from_angles(angles: AngleVector) -> tuple[MeasurementSetting, MeasurementSetting,
                                                       MeasurementSetting, MeasurementSetting]:
    """Spherical to Cartesian, one unit Bloch vector per (theta, phi) pair."""
    a = angles.angles
    out = []
    for i in range(4):
        theta, phi = a[2 * i], a[2 * i + 1]
        out.append(MeasurementSetting(np.array([
            np.sin(theta) * np.cos(phi),
            np.sin(theta) * np.sin(phi),
            np.cos(theta),
        ])))
    return tuple(out)


def angles_from_settings(settings) -> AngleVector:
    """Inverse map; phi is reduced to [0, 2 pi)."""
    vals = []
    for s in settings:
        x, y, z = s.bloch
        vals.append(float(np.arccos(np.clip(z, -1.0, 1.0))))
        vals.append(float(np.arctan2(y, x)) % (2.0 * np.pi))
    return AngleVector(np.array(vals))


def reference_angles() -> AngleVector:
    return angles_from_settings(reference_settings())


@dataclass(frozen=True)
class OptimizationResult:
    best_angles: AngleVector
    best_s: BellValue
    n: int
    v: float
    eta: float
    starts: int
    converged: bool
    evaluations: int


def _random_start(seed: int, index: int) -> np.ndarray:
    rng = np.random.default_rng([seed, index])
    theta = rng.uniform(0.0, np.pi, size=4)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=4)
    return np.stack([theta, phi], axis=1).ravel()


def minimize_s_n(v: float, n: int, eta: float = 1.0,
                 cfg: OptimizerConfig | None = None) -> OptimizationResult:
    """Minimize S_N over settings for the visibility-v state at efficiency eta."""
    cfg = cfg or OptimizerConfig()
    if n < 1:
        raise ValueError(f"pair count must be >= 1, got {n}")
    state = werner_state(v)

    def objective(x: np.ndarray) -> float:
        return s_n_eta(state, settings_from_angles(AngleVector(x)), n, eta).s

    start_points = [reference_angles().angles]
    start_points += [_random_start(cfg.seed, i) for i in range(1, cfg.starts)]

    def run_start(x0):
        res = _scipy_minimize(objective, x0, method="Nelder-Mead",
                              options={"fatol": cfg.tol, "xatol": cfg.xatol,
                                       "maxfev": cfg.max_evals, "maxiter": cfg.max_evals})
        return float(res.fun), res.x, int(res.nfev), bool(res.success)

    outcomes = map_ordered(run_start, start_points)
    best_idx = min(range(len(outcomes)), key=lambda i: (outcomes[i][0], i))
    best_fun, best_x, _, _ = outcomes[best_idx]
    result = OptimizationResult(
        best_angles=AngleVector(best_x),
        best_s=BellValue(best_fun),
        n=n, v=v, eta=eta,
        starts=cfg.starts,
        converged=any(ok for _, _, _, ok in outcomes),
        evaluations=sum(nfev for _, _, nfev, _ in outcomes),
    )
    if not result.converged:
        raise NonConvergenceError(
            f"no start converged within {cfg.max_evals} evaluations for (v={v}, n={n})",
            result)
    return result


@dataclass(frozen=True)
class SweepCell:
    n: int
    v: float
    result: OptimizationResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None and self.error is None


def _fixed_settings_cell(v: float, n: int, eta: float) -> OptimizationResult:
    """Evaluate at the reference settings without optimizing."""
    value = s_n_eta(werner_state(v), reference_settings(), n, eta)
    return OptimizationResult(best_angles=reference_angles(), best_s=value,
                              n=n, v=v, eta=eta, starts=0, converged=True,
                              evaluations=4)


def _one_cell(v: float, n: int, eta: float, cfg: OptimizerConfig,
              optimize: bool) -> SweepCell:
    try:
        if optimize:
            result = minimize_s_n(v, n, eta, cfg)
        else:
            result = _fixed_settings_cell(v, n, eta)
        return SweepCell(n=n, v=v, result=result)
    except NonConvergenceError as exc:
        return SweepCell(n=n, v=v, result=exc.result, error=str(exc))
    except Exception as exc:  # cell failures must not abort the sweep
        return SweepCell(n=n, v=v, result=None, error=str(exc))


def sweep(v_list, n_max: int, eta: float = 1.0,
          cfg: OptimizerConfig | None = None, optimize: bool = True) -> list[SweepCell]:
    """One cell per (v, n); rows ordered by (v, n) regardless of scheduling."""
    cfg = cfg or OptimizerConfig()
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if n_max > cfg.n_cap:
        raise ValueError(f"n_max {n_max} exceeds the configured cap {cfg.n_cap}")
    cells = [(float(v), n) for v in sorted(v_list) for n in range(1, n_max + 1)]
    return map_ordered(lambda cell: _one_cell(cell[0], cell[1], eta, cfg, optimize), cells)


def violation_threshold(v: float, parity: str, cfg: OptimizerConfig | None = None,
                        eta: float = 1.0, margin: float = 1e-7,
                        optimize: bool = True, max_n: int = 60) -> int:
    """Largest n of the given parity with S_N < 1 - margin.

    Scans n upward and stops after two consecutive non-violations (guards
    against a single optimizer miss); returns 0 when even the first n does
    not violate.  The scan is truncated at max_n.
    """
    if parity not in ("odd", "even"):
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")
    cfg = cfg or OptimizerConfig()
    n = 1 if parity == "odd" else 2
    last_violation = 0
    misses = 0
    while misses < 2 and n <= max_n:
        cell = _one_cell(v, n, eta, cfg, optimize)
        if cell.result is not None and cell.result.best_s.s < 1.0 - margin:
            last_violation = n
            misses = 0
        else:
            misses += 1
        n += 2
    return last_violation
