"""Coherent-error geometry and initial-state-averaged fidelities.

The terminal state of each driven Fock mode is decomposed as

    psi_n = sqrt(1 - |eps_n|^2 / 4) e^{i(theta_n + dtheta_n)} |x,n>
            - (eps_n / 2) |g,n>,        eps_n = (eps_L + i eps_T) e^{i dtheta}

so the residual ground amplitude encodes a complex error whose rotated real
and imaginary parts are the longitudinal and transversal errors, and the
excited amplitude carries the phase error.  On the Bloch sphere these are the
coordinates of the endpoint in the Lambert azimuthal equal-area projection
taken at the excited pole.

Fidelities are mean squared overlaps averaged over all normalized initial
cavity amplitude vectors.  The average is evaluated exactly through the
quartic moments of the uniform (Haar) distribution on the amplitude sphere;
a Monte Carlo path exists for cross-validation only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DegenerateStateError, DomainError
from .pulse import TargetOp, wrap_angle

EXCITED_AMPLITUDE_FLOOR = 1e-9


@dataclass(frozen=True)
class CoherentErrorSet:
    """Per-mode (eps_L, eps_T, dtheta) triples."""

    eps_l: np.ndarray
    eps_t: np.ndarray
    dtheta: np.ndarray

    def __post_init__(self):
        for name in ("eps_l", "eps_t", "dtheta"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name}: entries must be finite")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (self.eps_l.size == self.eps_t.size == self.dtheta.size):
            raise DomainError("error component vectors must share one length")
        if np.any(np.abs(self.eps) > 2.0 + 1e-12):
            raise DomainError("|eps_n| exceeds the geometric bound of 2")

    @property
    def n_modes(self) -> int:
        return self.eps_l.size

    @property
    def eps(self) -> np.ndarray:
        """Complex errors eps_n = (eps_L + i eps_T) e^{i dtheta}."""
        return (self.eps_l + 1j * self.eps_t) * np.exp(1j * self.dtheta)

    @classmethod
    def zero(cls, n_modes: int) -> "CoherentErrorSet":
        z = np.zeros(n_modes)
        return cls(z, z.copy(), z.copy())


def extract_errors(final_mode_states, target: TargetOp) -> CoherentErrorSet:
    """Invert the terminal-state decomposition for each mode.

    ``final_mode_states`` is (L, 2) with columns (ground, excited) amplitude.
    """
    states = np.asarray(final_mode_states, dtype=complex)
    if states.ndim != 2 or states.shape != (target.n_modes, 2):
        raise DomainError("final states must be (L, 2) matching the target")
    norms = np.linalg.norm(states, axis=1)
    if np.abs(norms - 1.0).max() > 1e-6:
        raise DomainError("per-mode states must be normalized")
    if np.abs(states[:, 1]).min() < EXCITED_AMPLITUDE_FLOOR:
        raise DegenerateStateError(
            "excited amplitude vanishes; the phase error is undefined"
        )
    eps = -2.0 * states[:, 0]
    dtheta = wrap_angle(np.angle(states[:, 1]) - target.theta)
    rotated = eps * np.exp(-1j * dtheta)
    return CoherentErrorSet(rotated.real, rotated.imag, dtheta)


def terminal_state_from_errors(errors: CoherentErrorSet, target: TargetOp) -> np.ndarray:
    """Forward construction of the per-mode (ground, excited) amplitudes."""
    if errors.n_modes != target.n_modes:
        raise DomainError("error set and target have different lengths")
    eps = errors.eps
    if np.any(np.abs(eps) > 2.0):
        raise DomainError("|eps_n| must not exceed 2")
    ce = np.sqrt(1.0 - np.abs(eps) ** 2 / 4.0) * np.exp(
        1j * (target.theta + errors.dtheta)
    )
    return np.stack([-eps / 2.0, ce], axis=1)


def projection_bloch(state2) -> tuple[float, float, float]:
    """Bloch coordinates used by the projection, viewed from the excited pole.

    Returns (<sx>, <sy>, bz) with bz = P_ground - P_excited, so the target
    (fully excited) state sits at the south pole bz = -1.
    """
    cg, ce = complex(state2[0]), complex(state2[1])
    cross = np.conj(cg) * ce
    return 2.0 * cross.real, 2.0 * cross.imag, abs(cg) ** 2 - abs(ce) ** 2


def lambert_projection(bloch_vector, target_angle: float = 0.0) -> tuple[float, float]:
    """Equal-area projection (X, Y) of a Bloch point about the excited pole.

    ``target_angle`` orients the in-plane axes: X along sigma_{angle}, Y along
    sigma_{angle + pi/2}.  For a terminal state projected with the drive phase
    angle (theta_n + pi/2), (X, Y) equals (eps_T, eps_L).
    """
    bx, by, bz = (float(v) for v in bloch_vector)
    if bz >= 1.0 - 1e-15:
        raise DomainError("projection undefined at the antipodal pole <sz> = 1")
    ca, sa = np.cos(target_angle), np.sin(target_angle)
    sx = bx * ca + by * sa
    sy = -bx * sa + by * ca
    scale = np.sqrt(2.0 / (1.0 - bz))
    return scale * sx, scale * sy


# ---------------------------------------------------------------------------
# Initial-state averaging


def haar_amplitudes(n_modes: int, size: int, rng: np.random.Generator,
                    distribution: str = "complex") -> np.ndarray:
    """Uniformly distributed normalized amplitude vectors, shape (size, L)."""
    if distribution == "complex":
        z = rng.standard_normal((size, n_modes)) + 1j * rng.standard_normal(
            (size, n_modes)
        )
    elif distribution == "real":
        z = rng.standard_normal((size, n_modes)).astype(complex)
    else:
        raise ConfigError("distribution: must be 'complex' or 'real'")
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@dataclass(frozen=True)
class FidelityReport:
    """Mean-squared-overlap fidelity and its per-outcome components."""

    f: float
    f_g: float
    f_e: float
    f_f: float | None
    protocol: str
    ec: bool
    coherent_only: bool
    method: str = "exact-moment"
    distribution: str = "complex"
    n_samples: int | None = None
    seed: int | None = None
    stderr: float | None = None

    def __post_init__(self):
        if self.f > 1.0 + 1e-9:
            raise DomainError("fidelity exceeds 1 beyond tolerance")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "f", "f_g", "f_e", "f_f", "protocol", "ec", "coherent_only",
            "method", "distribution", "n_samples", "seed", "stderr")}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _outcomes(protocol: str, ec: bool) -> list[str]:
    if protocol == "ge":
        return ["g", "e"] if ec else ["e"]
    if protocol == "gf":
        return ["g", "e", "f"] if ec else ["f"]
    raise ConfigError("protocol: must be 'ge' or 'gf'")


def _coherent_overlaps(finals: np.ndarray, target: TargetOp, protocol: str,
                       outcome: str) -> np.ndarray:
    """Diagonal overlap w_n = <t_{o,n}|phi_n> for per-mode coherent states."""
    if outcome == "g":
        return finals[:, 0]
    if protocol == "gf" and outcome == "e":
        return np.zeros(target.n_modes, dtype=complex)
    return np.exp(-1j * target.theta) * finals[:, 1]


def _moment_average_rank1(w: np.ndarray, distribution: str) -> float:
    L = w.size
    s1 = float(np.sum(np.abs(w) ** 2))
    s2 = float(np.abs(np.sum(w)) ** 2)
    if distribution == "complex":
        return (s1 + s2) / (L * (L + 1))
    return (2.0 * s1 + s2) / (L * (L + 2))


def _target_matrix(target: TargetOp, protocol: str, outcome: str, layout) -> np.ndarray:
    from . import hilbert  # local import to keep module load cheap

    rows = np.zeros((target.n_modes, layout.dim), dtype=complex)
    for n in range(target.n_modes):
        amps = np.zeros(target.n_modes, dtype=complex)
        amps[n] = 1.0
        phases = 1.0 if outcome == "g" else np.exp(1j * target.theta[n])
        rows[n] = hilbert.cavity_state(layout, outcome, amps * phases)
    return rows


def _moment_average_units(units: np.ndarray, tmat: np.ndarray,
                          distribution: str) -> float:
    """Exact average of <t(c)| E[rho_in(c)] |t(c)> over amplitude vectors.

    ``units[n, m]`` is the evolved matrix unit E[|g n><g m|]; ``tmat`` holds
    the target states row-wise.  Only second and fourth moments of c appear,
    so the average reduces to three contractions of the process data.
    """
    L = tmat.shape[0]
    tc = tmat.conj()
    term1 = np.einsum("md,nnde,me->", tc, units, tmat)
    term2 = np.einsum("nd,nmde,me->", tc, units, tmat)
    if distribution == "complex":
        return float((term1 + term2).real) / (L * (L + 1))
    term3 = np.einsum("md,nmde,ne->", tc, units, tmat)
    return float((term1 + term2 + term3).real) / (L * (L + 2))


def averaged_fidelity(process_outputs, target: TargetOp, protocol: str = "ge",
                      ec: bool = False, *, layout=None,
                      distribution: str = "complex",
                      method: str = "exact-moment",
                      n_samples: int = 100_000,
                      seed: int | None = None) -> FidelityReport:
    """Initial-state-averaged mean squared overlap.

    ``process_outputs`` is either (L, 2) per-mode coherent final amplitudes
    or the (L, L, dim, dim) array of evolved matrix units from
    ``lindblad_process_map``; the latter needs ``layout``.
    """
    arr = np.asarray(process_outputs)
    coherent = arr.ndim == 2
    if not coherent and arr.ndim != 4:
        raise DomainError("process_outputs must be (L, 2) or (L, L, dim, dim)")
    if arr.shape[0] != target.n_modes:
        raise DomainError("process outputs and target disagree on mode count")
    if not coherent and layout is None:
        raise ConfigError("layout: required for process-map averaging")

    components: dict[str, float] = {}
    stderr = None
    if method == "exact-moment":
        for outcome in ("g", "e", "f"):
            if outcome == "f" and protocol == "ge":
                continue
            if coherent:
                w = _coherent_overlaps(arr, target, protocol, outcome)
                components[outcome] = _moment_average_rank1(w, distribution)
            else:
                tmat = _target_matrix(target, protocol, outcome, layout)
                components[outcome] = _moment_average_units(arr, tmat, distribution)
    elif method == "monte-carlo":
        rng = np.random.default_rng(seed)
        c = haar_amplitudes(target.n_modes, n_samples, rng, distribution)
        per_outcome: dict[str, np.ndarray] = {}
        for outcome in ("g", "e", "f"):
            if outcome == "f" and protocol == "ge":
                continue
            if coherent:
                w = _coherent_overlaps(arr, target, protocol, outcome)
                vals = np.abs((np.abs(c) ** 2) @ w) ** 2
            else:
                tmat = _target_matrix(target, protocol, outcome, layout)
                quad = np.einsum("md,nqde,pe->mpnq", tmat.conj(), arr, tmat)
                vals = np.einsum("sm,sp,sn,sq,mpnq->s", c.conj(), c, c,
                                 c.conj(), quad, optimize=True).real
            per_outcome[outcome] = vals
        used = _outcomes(protocol, ec)
        total = sum(per_outcome[o] for o in used)
        stderr = float(np.std(total) / np.sqrt(n_samples))
        components = {o: float(np.mean(v)) for o, v in per_outcome.items()}
    else:
        raise ConfigError("method: must be 'exact-moment' or 'monte-carlo'")

    used = _outcomes(protocol, ec)
    f = float(sum(components[o] for o in used))
    return FidelityReport(
        f=f,
        f_g=float(components["g"]),
        f_e=float(components["e"]),
        f_f=(float(components["f"]) if protocol == "gf" else None),
        protocol=protocol,
        ec=ec,
        coherent_only=coherent,
        method=method,
        distribution=distribution,
        n_samples=(n_samples if method == "monte-carlo" else None),
        seed=(seed if method == "monte-carlo" else None),
        stderr=stderr,
    )


def coherent_mean_overlap_error(finals, target: TargetOp, protocol: str = "ge") -> float:
    """1 - F of the success outcome from coherent per-mode final states.

    This is the optimizer's objective and stopping quantity.
    """
    report = averaged_fidelity(finals, target, protocol=protocol, ec=False)
    return 1.0 - report.f
