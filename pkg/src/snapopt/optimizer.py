"""Iterative correction of SNAP pulse parameters.

One iteration simulates the coherent per-mode dynamics, extracts the three
coherent errors of every mode, and applies the linear corrections scaled by a
learning rate.  Repeating the step drives the errors to zero far beyond the
small-error regime in which the corrections are derived, provided the gate is
longer than a target-dependent threshold (the optimization limit); below it
the iteration stalls or pushes an amplitude negative, which is reported as a
convergence failure rather than an exception.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import PropagationConfig, propagate_modes
from .errors import CoherentErrorSet, coherent_mean_overlap_error, extract_errors
from .exceptions import ConfigError, DivergenceError, DomainError
from .pulse import PulseSpec, TargetOp, apply_corrections, make_unoptimized

DEFAULT_LIMIT_GRID = tuple(np.arange(0.75, 6.01, 0.25) * np.pi)


@dataclass(frozen=True)
class OptimizerConfig:
    """Loop controls.

    ``eta`` scales every correction; 0.5 trades convergence speed against
    overshoot near the optimization limit.  Failure is declared when the best
    error has not improved by at least 1% over ``divergence_window``
    consecutive iterations.  ``polish_iterations`` appends full-strength
    (eta = 1) steps after convergence, kept only while they improve; they
    sharpen the fixed point when downstream consumers need endpoint residuals
    well below the stopping threshold.
    """

    eta: float = 0.5
    threshold: float = 1e-5
    max_iterations: int = 500
    divergence_window: int = 25
    improvement_factor: float = 0.99
    polish_iterations: int = 0
    chit_grid: tuple = DEFAULT_LIMIT_GRID
    limit_resolution: float = 0.01 * np.pi
    propagation: PropagationConfig = field(default_factory=PropagationConfig)

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta: must lie in (0, 1]")
        if self.threshold <= 0:
            raise ConfigError("threshold: must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations: must be at least 1")
        if self.divergence_window < 1:
            raise ConfigError("divergence_window: must be at least 1")


@dataclass(frozen=True)
class OptimizerReport:
    """Outcome of one optimization run."""

    converged: bool
    iterations: int
    error_trace: np.ndarray
    final_errors: CoherentErrorSet
    pulse: PulseSpec
    message: str = ""

    @property
    def final_error(self) -> float:
        return float(self.error_trace[-1])

    @property
    def best_error(self) -> float:
        return float(self.error_trace.min())

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_error": self.final_error,
            "best_error": self.best_error,
            "message": self.message,
            "error_trace": [float(x) for x in self.error_trace],
            "pulse": self.pulse.to_dict(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _evaluate_pulse(pulse, target, system, prop_config):
    finals, _, _ = propagate_modes(pulse, system, prop_config)
    errs = extract_errors(finals, target)
    err = coherent_mean_overlap_error(finals, target, protocol=system.protocol)
    return errs, err


def optimize(target: TargetOp, gate_time: float, system,
             config: OptimizerConfig | None = None,
             initial_pulse: PulseSpec | None = None) -> OptimizerReport:
    """Run the correction loop from the flat resonant pulse.

    Returns a converged report once the coherent mean overlap error drops
    below the threshold, or a failure report carrying the best pulse seen.
    """
    config = config or OptimizerConfig()
    pulse = initial_pulse or make_unoptimized(target, gate_time, system)
    trace: list[float] = []
    best_err = np.inf
    best = None
    stall = 0
    message = f"exhausted {config.max_iterations} iterations"
    for iteration in range(1, config.max_iterations + 1):
        errs, err = _evaluate_pulse(pulse, target, system, config.propagation)
        trace.append(err)
        if err < best_err * config.improvement_factor:
            stall = 0
        else:
            stall += 1
        if err < best_err:
            best_err, best = err, (pulse, errs)
        if err < config.threshold:
            if config.polish_iterations:
                pulse, errs, err = _polish(pulse, errs, err, target, system, config)
                trace.append(err)
            return OptimizerReport(True, iteration, np.array(trace), errs,
                                   pulse, "converged")
        if stall >= config.divergence_window:
            message = (f"no {1 - config.improvement_factor:.0%} improvement over "
                       f"{config.divergence_window} iterations")
            break
        try:
            pulse = apply_corrections(pulse, errs, config.eta)
        except DivergenceError as exc:
            message = str(exc)
            break
    pulse, errs = best if best is not None else (pulse, errs)
    return OptimizerReport(False, len(trace), np.array(trace), errs, pulse, message)


def _polish(pulse, errs, err, target, system, config):
    """Full-strength steps after convergence, kept only while improving."""
    for _ in range(config.polish_iterations):
        try:
            cand = apply_corrections(pulse, errs, 1.0)
        except DivergenceError:
            break
        cand_errs, cand_err = _evaluate_pulse(cand, target, system,
                                              config.propagation)
        if cand_err >= err:
            break
        pulse, errs, err = cand, cand_errs, cand_err
    return pulse, errs, err


def first_order_sensitivities(pulse: PulseSpec, target: TargetOp, system,
                              mode_n: int, config: PropagationConfig | None = None,
                              rel_step: float = 1e-6) -> np.ndarray:
    """Finite-difference Jacobian d(eps_L, eps_T, dtheta)/d(dlam, domega, dalpha).

    Central differences around the given pulse, perturbing only mode
    ``mode_n``.  In the slow-gate limit the diagonal approaches
    (2T, -2T/pi, 1) and the off-diagonal entries vanish.
    """
    if not 0 <= mode_n < pulse.n_modes:
        raise DomainError("mode_n must index an addressed mode")
    lam_scale = float(pulse.lam[mode_n])
    steps = np.array([rel_step * lam_scale, rel_step * lam_scale, rel_step])
    if min(steps) < 1e-14:
        raise DomainError("finite-difference step underflows double precision")

    def perturbed(param: str, delta: float) -> PulseSpec:
        arr = np.array(getattr(pulse, param))
        arr[mode_n] += delta
        return replace(pulse, **{param: arr})

    sub_target = TargetOp(target.theta[mode_n:mode_n + 1])

    def errors_of(p: PulseSpec) -> np.ndarray:
        finals, _, _ = propagate_modes(p, system, config, fock_modes=[mode_n])
        errs = extract_errors(finals, sub_target)
        return np.array([errs.eps_l[0], errs.eps_t[0], errs.dtheta[0]])

    jac = np.zeros((3, 3))
    for col, (param, delta) in enumerate(zip(("lam", "omega", "alpha"), steps)):
        hi = errors_of(perturbed(param, +delta))
        lo = errors_of(perturbed(param, -delta))
        jac[:, col] = (hi - lo) / (2.0 * delta)
    return jac


@dataclass(frozen=True)
class LimitResult:
    """Outcome of an optimization-limit search."""

    found: bool
    chi_t: float | None
    grid_floor: bool
    scanned: tuple
    converged: tuple
    message: str = ""


def find_optimization_limit(target: TargetOp, system,
                            config: OptimizerConfig | None = None) -> LimitResult:
    """Smallest dimensionless gate time chi*T with a convergent optimization.

    Coarse scan over the configured grid, then bisection of the bracket down
    to the configured resolution.  Non-monotone convergence on the scanned
    grid (a failure above a success) widens the bracket to the last failure.
    """
    config = config or OptimizerConfig()
    grid = np.sort(np.asarray(config.chit_grid, dtype=float))
    if grid.size == 0:
        raise ConfigError("chit_grid: must be non-empty")

    def converges(chi_t: float) -> bool:
        return optimize(target, chi_t / system.chi, system, config).converged

    flags = [converges(x) for x in grid]
    conv_idx = [i for i, f in enumerate(flags) if f]
    if not conv_idx:
        return LimitResult(False, None, False, tuple(grid), tuple(flags),
                           "no convergent grid point")
    fail_idx = [i for i, f in enumerate(flags) if not f]
    if not fail_idx:
        return LimitResult(True, float(grid[0]), True, tuple(grid), tuple(flags),
                           "every grid point converges; limit is at or below the grid")
    lo = grid[max(fail_idx)]
    above = [i for i in conv_idx if grid[i] > lo]
    if not above:
        return LimitResult(False, None, False, tuple(grid), tuple(flags),
                           "no convergent point above the last failure")
    hi = grid[min(above)]
    while hi - lo > config.limit_resolution:
        mid = 0.5 * (lo + hi)
        if converges(mid):
            hi = mid
        else:
            lo = mid
    return LimitResult(True, float(hi), False, tuple(grid), tuple(flags), "bracketed")


def averaged_optimization_limit(n_modes: int, system,
                                config: OptimizerConfig | None = None,
                                n_samples: int = 16,
                                seed: int = 0) -> tuple[float, list[float]]:
    """Mean optimization limit over uniformly random target phase vectors."""
    rng = np.random.default_rng([seed, 0x51A9])
    limits: list[float] = []
    for _ in range(n_samples):
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
        res = find_optimization_limit(TargetOp(theta), system, config)
        if not res.found:
            raise DomainError("limit search failed for a sampled target; "
                              "extend chit_grid")
        limits.append(res.chi_t)
    return float(np.mean(limits)), limits
