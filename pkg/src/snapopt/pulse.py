"""SNAP drive waveforms: parameterization, evaluation, and correction updates.

A SNAP drive is a sum of L phasors, one per addressed Fock mode,

    Omega(t) = env(t) * sum_n lambda_n exp(i (omega_n t + alpha_n - dw_n T/2))

where dw_n = omega_n - omega_ref_n is the detuning from the frequency that
addresses mode n resonantly; the -dw_n T/2 phase cancels the phase shift a
detuning would otherwise imprint on the gate.  The uncorrected pulse uses
lambda_n = pi/(2T), omega_n = omega_ref_n and alpha_n = theta_n + pi/2, which
in the slow-gate limit drives each |g,n> -> e^{i theta_n} |x,n> exactly.

With higher-order frame terms enabled (cavity Kerr K and the dispersive-shift
correction chi'), the resonant frequencies become chi n - chi' (n^2-n)/2 and
the drive phases pick up -(K - chi') (n^2-n) T / 2 to compensate the frame
change at the end of the gate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigError, DivergenceError, DomainError


def wrap_angle(x):
    """Wrap to the canonical branch (-pi, pi]; exactly pi maps to +pi."""
    w = np.mod(np.asarray(x, dtype=float), 2.0 * np.pi)
    out = np.where(w > np.pi, w - 2.0 * np.pi, w)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TargetOp:
    """Target phases theta_n, n = 0..L-1, one per addressed Fock mode."""

    theta: np.ndarray

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if th.ndim != 1 or th.size < 1:
            raise DomainError("theta must be a non-empty 1-d phase vector")
        th = wrap_angle(th)
        th.flags.writeable = False
        object.__setattr__(self, "theta", th)

    @property
    def n_modes(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class EnvelopeSpec:
    """Raised-cosine switching envelope.

    The ramps occupy pi/beta at each end; beta*T > 2*pi is required so both
    ramps fit inside the pulse.  The plateau value beta*T/(beta*T - pi)
    normalizes the envelope to integrate to T, which preserves the half-pi
    pulse area of the flat drive.
    """

    beta: float
    enabled: bool = True

    def validate(self, gate_time: float) -> None:
        if self.enabled and self.beta * gate_time <= 2.0 * np.pi:
            raise ConfigError("envelope.beta: beta*T must exceed 2*pi")


def default_envelope(gate_time: float) -> EnvelopeSpec:
    """Smoothing coefficient 2*pi / (0.2 T), the experimentally used value."""
    return EnvelopeSpec(beta=2.0 * np.pi / (0.2 * gate_time), enabled=True)


def envelope(spec: EnvelopeSpec, t, gate_time: float):
    """Evaluate the envelope at time(s) t in [0, T].

    The falling edge mirrors the rising edge, (1 - cos(beta (T-t)))/2, so the
    envelope vanishes at both ends and the integral equals T exactly.
    """
    spec.validate(gate_time)
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12) or np.any(t > gate_time * (1 + 1e-12)):
        raise DomainError("envelope evaluated outside [0, T]")
    if not spec.enabled:
        out = np.ones_like(t)
        return out if out.ndim else 1.0
    beta = spec.beta
    ramp = np.pi / beta
    plateau = beta * gate_time / (beta * gate_time - np.pi)
    rising = 0.5 * (1.0 - np.cos(beta * t))
    falling = 0.5 * (1.0 - np.cos(beta * (gate_time - t)))
    out = plateau * np.where(
        t <= ramp, rising, np.where(t >= gate_time - ramp, falling, 1.0)
    )
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PulseSpec:
    """Immutable drive parameterization of one SNAP pulse.

    ``omega_ref`` holds the resonant (uncorrected) frequency of each mode;
    the detuning entering the -dw T/2 phase term is measured against it.
    """

    gate_time: float
    lam: np.ndarray
    omega: np.ndarray
    alpha: np.ndarray
    omega_ref: np.ndarray
    envelope: EnvelopeSpec
    frame_corrections: bool = False

    def __post_init__(self):
        if self.gate_time <= 0:
            raise ConfigError("gate_time: must be positive")
        arrays = {}
        for name in ("lam", "omega", "alpha", "omega_ref"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            arr.flags.writeable = False
            arrays[name] = arr
        sizes = {a.size for a in arrays.values()}
        if len(sizes) != 1:
            raise ConfigError("per-mode parameter vectors must share one length")
        if np.any(arrays["lam"] <= 0):
            raise ConfigError("lam: amplitudes must be positive")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)
        self.envelope.validate(self.gate_time)

    @property
    def n_modes(self) -> int:
        return self.lam.size

    @property
    def delta_omega(self) -> np.ndarray:
        return self.omega - self.omega_ref

    def to_dict(self) -> dict:
        return {
            "T": self.gate_time,
            "modes": [
                {"lambda": float(l), "omega": float(w), "alpha": float(a),
                 "omega_ref": float(wr)}
                for l, w, a, wr in zip(self.lam, self.omega, self.alpha, self.omega_ref)
            ],
            "envelope": {"beta": self.envelope.beta, "enabled": self.envelope.enabled},
            "frame_corrections": self.frame_corrections,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSpec":
        modes = data["modes"]
        omega = np.array([m["omega"] for m in modes], dtype=float)
        return cls(
            gate_time=float(data["T"]),
            lam=np.array([m["lambda"] for m in modes], dtype=float),
            omega=omega,
            alpha=np.array([m["alpha"] for m in modes], dtype=float),
            omega_ref=np.array(
                [m.get("omega_ref", m["omega"]) for m in modes], dtype=float
            ),
            envelope=EnvelopeSpec(**data["envelope"]),
            frame_corrections=bool(data.get("frame_corrections", False)),
        )

    @classmethod
    def from_json(cls, text: str) -> "PulseSpec":
        return cls.from_dict(json.loads(text))


def resonant_frequencies(n_modes: int, system, frame_corrections: bool) -> np.ndarray:
    """Per-mode resonant drive frequencies chi*n (- chi'(n^2-n)/2 if enabled)."""
    n = np.arange(n_modes, dtype=float)
    omega = system.chi * n
    if system.protocol == "gf":
        omega = system.chi_f * n
    if frame_corrections:
        omega = omega - 0.5 * system.chi_prime * (n * n - n)
    return omega


def make_unoptimized(target: TargetOp, gate_time: float, system,
                     envelope_spec: EnvelopeSpec | None = None,
                     frame_corrections: bool = False) -> PulseSpec:
    """Flat-amplitude resonant drive: lambda = pi/(2T) on every mode."""
    if gate_time <= 0:
        raise ConfigError("gate_time: must be positive")
    L = target.n_modes
    n = np.arange(L, dtype=float)
    lam = np.full(L, np.pi / (2.0 * gate_time))
    omega = resonant_frequencies(L, system, frame_corrections)
    alpha = target.theta + np.pi / 2.0
    if frame_corrections:
        alpha = alpha - 0.5 * (system.kerr - system.chi_prime) * (n * n - n) * gate_time
    return PulseSpec(
        gate_time=gate_time,
        lam=lam,
        omega=omega,
        alpha=wrap_angle(alpha),
        omega_ref=omega,
        envelope=envelope_spec or EnvelopeSpec(beta=0.0, enabled=False),
        frame_corrections=frame_corrections,
    )


def evaluate(pulse: PulseSpec, t):
    """Complex drive amplitude Omega(t); t may be a scalar or an array."""
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12) or np.any(t > pulse.gate_time * (1 + 1e-12)):
        raise DomainError("pulse evaluated outside [0, T]")
    phase_offset = pulse.alpha - 0.5 * pulse.delta_omega * pulse.gate_time
    phases = np.multiply.outer(t, pulse.omega) + phase_offset
    out = (pulse.lam * np.exp(1j * phases)).sum(axis=-1)
    out = out * envelope(pulse.envelope, t, pulse.gate_time)
    return out if out.ndim else complex(out)


def apply_corrections(pulse: PulseSpec, errors, eta: float) -> PulseSpec:
    """One correction step, scaled by the learning rate eta.

    Per mode: the longitudinal error trims the amplitude, the transversal
    error detunes the drive, and the phase error shifts the drive phase:

        lam   -> lam   - eta * eps_L / (2 T)
        omega -> omega + eta * pi * eps_T / (2 T)
        alpha -> alpha - eta * dtheta

    The -dw T/2 phase in ``evaluate`` tracks the omega update implicitly.
    """
    if not 0.0 < eta <= 1.0:
        raise ConfigError("eta: learning rate must lie in (0, 1]")
    if errors.n_modes != pulse.n_modes:
        raise ConfigError("errors: mode count differs from the pulse")
    T = pulse.gate_time
    lam = pulse.lam - eta * errors.eps_l / (2.0 * T)
    if np.any(lam <= 0):
        raise DivergenceError("amplitude update drove lambda_n below zero")
    return replace(
        pulse,
        lam=lam,
        omega=pulse.omega + eta * np.pi * errors.eps_t / (2.0 * T),
        alpha=wrap_angle(pulse.alpha - eta * errors.dtheta),
    )
