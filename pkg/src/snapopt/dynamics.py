"""Time evolution of the driven cavity-transmon system.

In the frame rotating with the static Hamiltonian, the drive block-diagonalizes
over photon number: Fock mode n sees the effective two-level drive
w_n(t) = Omega(t) exp(-i nu_n t), with nu_n the dispersive shift of mode n.
Coherent propagation therefore runs as L independent two-level problems,
which is exact and feeds the optimizer's inner loop cheaply.  Full-space
propagation is reserved for the Lindblad master equation, whose cavity-decay
channel couples the photon-number blocks.

All integrators are fixed-step RK4 (deterministic, auditable by step halving).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hilbert
from .exceptions import ConfigError, DomainError, PrecisionError
from .integrators import rk4_fixed, round_up_steps, two_level_propagators
from .pulse import PulseSpec, TargetOp, evaluate, resonant_frequencies, wrap_angle

AMPLITUDE_PHASE_FLOOR = 1e-12


@dataclass(frozen=True)
class PropagationConfig:
    """Integrator settings shared by the coherent and Lindblad propagators.

    ``n_steps`` is a minimum; it is rounded up so the recording segments
    divide it evenly.  With ``audit`` set, every propagation is repeated at
    half the step and must agree within ``audit_tol``.
    """

    n_steps: int = 20000
    sample_points: int = 257
    audit: bool = False
    audit_tol: float = 1e-9
    batch_elements: int = 500_000

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigError("n_steps: must be at least 1")
        if self.sample_points < 2:
            raise ConfigError("sample_points: must be at least 2")


@dataclass(frozen=True)
class NoJumpTrajectory:
    """Per-mode coherent evolution (mu_n, phi_gn, phi_fn) on a time grid.

    ``mu`` is the excited-state occupancy relative to the mode's total,
    ``phi_g`` the unwrapped ground-amplitude phase, and ``phi_f`` the
    unwrapped excited-amplitude phase less the target phase of the mode.
    Where an amplitude magnitude falls below 1e-12 the phase holds its
    previous unwrapped value.
    """

    times: np.ndarray
    mu: np.ndarray
    phi_g: np.ndarray
    phi_f: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.mu.shape[0]

    @property
    def gate_time(self) -> float:
        return float(self.times[-1])


def _kerr_frame_phases(system, n_modes: int, t):
    """Phase factors mapping Kerr-frame amplitudes back to the chi frame.

    Returns (phase_g, phase_x) with shapes broadcasting (n_modes,) x t.
    """
    n = np.arange(n_modes, dtype=float)
    quad = n * n - n
    tarr = np.asarray(t, dtype=float)
    pg = np.exp(1j * 0.5 * system.kerr * np.multiply.outer(quad, tarr))
    px = np.exp(1j * 0.5 * (system.kerr - system.chi_prime) * np.multiply.outer(quad, tarr))
    return pg, px


def _drive_batch(pulse: PulseSpec, system, fock_modes, n_steps: int):
    """Modulated drive samples w_n(t_j) on the half-step grid, (len(modes), 2n+1)."""
    T = pulse.gate_time
    t = np.linspace(0.0, T, 2 * n_steps + 1)
    omega_base = evaluate(pulse, t)
    nu = resonant_frequencies(int(max(fock_modes)) + 1, system, pulse.frame_corrections)
    nu = nu[np.asarray(fock_modes, dtype=int)]
    return omega_base[None, :] * np.exp(-1j * np.multiply.outer(nu, t))


def _segments_for(config: PropagationConfig, batch: int, n_steps: int, record: bool) -> int:
    if record:
        return config.sample_points - 1
    per_segment = max(1, config.batch_elements // max(batch, 1))
    return max(1, -(-n_steps // per_segment))


def propagate_modes(pulse: PulseSpec, system, config: PropagationConfig | None = None,
                    fock_modes=None, record: bool = False):
    """Evolve |g> under the pulse for each addressed Fock mode.

    Returns (finals, boundary_amplitudes, times): ``finals`` is (L, 2) with
    the ground and excited amplitudes at t=T in the chi frame;
    ``boundary_amplitudes`` is (L, S+1, 2) on the sample grid when ``record``
    is set, else None.
    """
    config = config or PropagationConfig()
    if fock_modes is None:
        fock_modes = np.arange(pulse.n_modes)
    fock_modes = np.atleast_1d(np.asarray(fock_modes, dtype=int))
    segments = _segments_for(config, fock_modes.size, config.n_steps, record)
    n_steps = round_up_steps(config.n_steps, segments)
    h = pulse.gate_time / n_steps

    def run(steps, segs):
        drive = _drive_batch(pulse, system, fock_modes, steps)
        u = two_level_propagators(drive, pulse.gate_time / steps, segs)
        return u[..., :, 0]  # first column: evolution of |g>

    amps = run(n_steps, segments)
    if config.audit:
        amps_fine = run(2 * n_steps, segments)
        if np.abs(amps_fine[:, -1] - amps[:, -1]).max() > config.audit_tol:
            raise PrecisionError(
                "step-halving audit failed: final amplitudes moved by more "
                f"than {config.audit_tol:g}"
            )
        amps = amps_fine
    times = np.linspace(0.0, pulse.gate_time, segments + 1)
    if pulse.frame_corrections:
        pg, px = _kerr_frame_phases(system, int(fock_modes.max()) + 1, times)
        amps = amps.copy()
        amps[..., 0] *= pg[fock_modes]
        amps[..., 1] *= px[fock_modes]
    finals = amps[:, -1]
    return finals, (amps if record else None), times


def propagate_mode(pulse: PulseSpec, system, fock_n: int,
                   config: PropagationConfig | None = None) -> np.ndarray:
    """Final (g, excited) amplitudes of one Fock mode; transmon starts in |g>."""
    if fock_n >= pulse.n_modes:
        raise DomainError("fock_n must index an addressed mode")
    finals, _, _ = propagate_modes(pulse, system, config, fock_modes=[fock_n])
    return finals[0]


def _unwrap_with_hold(amps: np.ndarray) -> np.ndarray:
    """Continuously unwrapped phases along the last axis, held when |amp| ~ 0."""
    mags = np.abs(amps)
    raw = np.angle(amps)
    out = np.zeros_like(raw)
    prev = np.zeros(amps.shape[0])
    for s in range(amps.shape[-1]):
        defined = mags[:, s] >= AMPLITUDE_PHASE_FLOOR
        step = wrap_angle(raw[:, s] - prev)
        prev = np.where(defined, prev + step, prev)
        out[:, s] = prev
    return out


def record_trajectory(pulse: PulseSpec, system, target: TargetOp,
                      config: PropagationConfig | None = None) -> NoJumpTrajectory:
    """No-jump trajectory (mu_n, phi_gn, phi_fn) on the sample grid."""
    _, amps, times = propagate_modes(pulse, system, config, record=True)
    mu = np.clip(np.abs(amps[..., 1]) ** 2, 0.0, 1.0)
    phi_g = _unwrap_with_hold(amps[..., 0])
    phi_f = _unwrap_with_hold(amps[..., 1]) - target.theta[:, None]
    return NoJumpTrajectory(times=times, mu=mu, phi_g=phi_g, phi_f=phi_f)


def ideal_final_state(target: TargetOp, amplitudes, outcome: str,
                      layout: hilbert.HilbertLayout, protocol: str = "ge") -> np.ndarray:
    """Post-measurement target state for a given transmon readout outcome.

    Outcome g is the input state (the gate must be repeated), outcome e is
    the phase-imprinted state on the e level (for gf this is the state after
    one f->e decay under chi matching), outcome f the gf success state.
    """
    valid = ("g", "e") if protocol == "ge" else ("g", "e", "f")
    if outcome not in valid:
        raise DomainError(f"outcome {outcome!r} invalid for the {protocol} protocol")
    amps = np.asarray(amplitudes, dtype=complex)
    if amps.size != target.n_modes:
        raise DomainError("amplitude vector length must match the target")
    phases = np.ones_like(amps) if outcome == "g" else np.exp(1j * target.theta)
    return hilbert.cavity_state(layout, outcome, amps * phases)


def flip_second_stage(layout: hilbert.HilbertLayout):
    """Unitary of the idealized instantaneous final flip (excited <-> ground)."""
    ops = hilbert.build_operators(layout)
    x = layout.transmon_levels - 1
    u = ops.transition("g", x) + ops.transition(x, "g")
    for level in range(1, layout.transmon_levels - 1):
        u = u + ops.projector(level)
    return u


def propagate_state(pulse: PulseSpec, system, initial: np.ndarray,
                    layout: hilbert.HilbertLayout,
                    config: PropagationConfig | None = None) -> np.ndarray:
    """Full-space coherent Schroedinger propagation of a state vector."""
    config = config or PropagationConfig()
    n_steps = config.n_steps
    T = pulse.gate_time
    h = T / n_steps
    nt, nc = layout.transmon_levels, layout.fock_truncation
    if initial.shape != (layout.dim,):
        raise DomainError("initial state dimension does not match the layout")
    t = np.linspace(0.0, T, 2 * n_steps + 1)
    drive = evaluate(pulse, t)[None, :] * np.exp(
        -1j * np.multiply.outer(resonant_frequencies(nc, system, pulse.frame_corrections), t)
    )
    xi = nt - 1

    def rhs(j, y):
        v = y.reshape(nt, nc)
        out = np.zeros_like(v)
        w = drive[:, j]
        out[xi] = -1j * w * v[0]
        out[0] = -1j * w.conj() * v[xi]
        return out.reshape(-1)

    final, _ = rk4_fixed(initial, rhs, h, n_steps)
    if abs(np.linalg.norm(final) - np.linalg.norm(initial)) > 1e-8:
        raise PrecisionError("coherent propagation lost norm beyond 1e-8")
    return final


class _LindbladRHS:
    """Master-equation right-hand side with precomputed time samples.

    Jump operators in the rotating frame carry explicit phases:
    e->g decay and f->e decay rotate with the cavity photon number, cavity
    decay with the transmon level; the dephasing projectors are static.
    Their L+L products are all time independent, so the anticommutator term
    reduces to a fixed diagonal.
    """

    def __init__(self, pulse: PulseSpec, system, layout: hilbert.HilbertLayout,
                 n_steps: int):
        nt, nc = layout.transmon_levels, layout.fock_truncation
        self.nt, self.nc = nt, nc
        self.dim = layout.dim
        T = pulse.gate_time
        t = np.linspace(0.0, T, 2 * n_steps + 1)
        nu = resonant_frequencies(nc, system, pulse.frame_corrections)
        self.drive = evaluate(pulse, t)[None, :] * np.exp(-1j * np.multiply.outer(nu, t))
        n = np.arange(nc, dtype=float)
        self.sys = system
        self.gamma = {
            "eg": system.gamma_eg,
            "fe": system.gamma_fe if nt == 3 else 0.0,
            "ee": system.gamma_ee if nt >= 2 else 0.0,
            "ff": system.gamma_ff if nt == 3 else 0.0,
            "cav": system.gamma_cav,
        }
        self.phase_eg = np.exp(1j * system.chi * np.multiply.outer(n, t))
        self.phase_fe = (
            np.exp(1j * (system.chi_f - system.chi) * np.multiply.outer(n, t))
            if nt == 3 else None
        )
        levels_chi = [0.0, system.chi] + ([system.chi_f] if nt == 3 else [])
        self.phase_cav = np.exp(1j * np.multiply.outer(np.array(levels_chi), t))
        a_cav = np.diag(np.sqrt(np.arange(1, nc)), k=1).astype(complex)
        self.kron_a = [
            np.kron(np.eye(nt)[i][:, None] * np.eye(nt)[i][None, :], a_cav)
            for i in range(nt)
        ]
        qdiag = np.zeros(self.dim)
        proj = lambda lvl: np.kron(np.eye(nt)[lvl], np.ones(nc))
        qdiag += self.gamma["eg"] * proj(1)
        qdiag += self.gamma["ee"] * proj(1)
        if nt == 3:
            qdiag += self.gamma["fe"] * proj(2)
            qdiag += self.gamma["ff"] * proj(2)
        qdiag += self.gamma["cav"] * np.kron(np.ones(nt), n)
        self.qdiag = qdiag

    def _block(self, rho, i, j):
        nc = self.nc
        return rho[..., i * nc:(i + 1) * nc, j * nc:(j + 1) * nc]

    def __call__(self, j, rho):
        nt, nc = self.nt, self.nc
        h = np.zeros((self.dim, self.dim), dtype=complex)
        w = self.drive[:, j]
        xi = nt - 1
        rows = np.arange(nc) + xi * nc
        cols = np.arange(nc)
        h[rows, cols] = w
        h[cols, rows] = w.conj()
        out = -1j * (h @ rho - rho @ h)
        out -= 0.5 * (self.qdiag[:, None] * rho + rho * self.qdiag[None, :])
        if self.gamma["eg"]:
            p = self.phase_eg[:, j]
            src = self._block(rho, 1, 1)
            self._block(out, 0, 0)[...] += self.gamma["eg"] * (
                p[:, None] * src * p.conj()[None, :]
            )
        if self.gamma["fe"]:
            p = self.phase_fe[:, j]
            src = self._block(rho, 2, 2)
            self._block(out, 1, 1)[...] += self.gamma["fe"] * (
                p[:, None] * src * p.conj()[None, :]
            )
        if self.gamma["ee"]:
            self._block(out, 1, 1)[...] += self.gamma["ee"] * self._block(rho, 1, 1)
        if self.gamma["ff"]:
            self._block(out, 2, 2)[...] += self.gamma["ff"] * self._block(rho, 2, 2)
        if self.gamma["cav"]:
            q = self.phase_cav[:, j]
            l_cav = sum(qi * k for qi, k in zip(q, self.kron_a))
            out += self.gamma["cav"] * (l_cav @ rho @ l_cav.conj().T)
        return out


def propagate_lindblad(pulse: PulseSpec, system, initial: np.ndarray,
                       layout: hilbert.HilbertLayout,
                       config: PropagationConfig | None = None) -> np.ndarray:
    """Evolve a density matrix through the gate under noise.

    Trace and Hermiticity are verified on exit (1e-8 / 1e-10); a final
    eigenvalue below -1e-6 raises ``PrecisionError`` (step too coarse).
    """
    config = config or PropagationConfig()
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (layout.dim, layout.dim):
        raise DomainError("initial density matrix does not match the layout")
    out = _propagate_lindblad_batch(pulse, system, initial[None], layout, config)[0]
    if abs(np.trace(out).real - np.trace(initial).real) > 1e-8:
        raise PrecisionError("Lindblad propagation failed to preserve the trace")
    if np.abs(out - out.conj().T).max() > 1e-10:
        raise PrecisionError("Lindblad propagation broke Hermiticity")
    if np.linalg.eigvalsh((out + out.conj().T) / 2).min() < -1e-6:
        raise PrecisionError("density matrix went negative; refine the step")
    return out


def _propagate_lindblad_batch(pulse: PulseSpec, system, rhos: np.ndarray,
                              layout: hilbert.HilbertLayout,
                              config: PropagationConfig) -> np.ndarray:
    n_steps = config.n_steps
    rhs = _LindbladRHS(pulse, system, layout, n_steps)
    h = pulse.gate_time / n_steps

    def run(steps):
        local = _LindbladRHS(pulse, system, layout, steps) if steps != n_steps else rhs
        final, _ = rk4_fixed(rhos, local, pulse.gate_time / steps, steps)
        return final

    out = run(n_steps)
    if config.audit:
        fine = run(2 * n_steps)
        if np.abs(fine - out).max() > config.audit_tol:
            raise PrecisionError("step-halving audit failed for Lindblad propagation")
        out = fine
    return out


def lindblad_process_map(pulse: PulseSpec, system, layout: hilbert.HilbertLayout,
                         n_modes: int, config: PropagationConfig | None = None) -> np.ndarray:
    """Evolved matrix units E[|g n><g n'|], returned as (L, L, dim, dim).

    This is the linear process data needed for exact initial-state averaging
    of noisy fidelities; the L^2 units propagate in one batched integration.
    """
    config = config or PropagationConfig()
    L = n_modes
    units = np.zeros((L * L, layout.dim, layout.dim), dtype=complex)
    for n in range(L):
        for m in range(L):
            units[n * L + m, layout.index("g", n), layout.index("g", m)] = 1.0
    out = _propagate_lindblad_batch(pulse, system, units, layout, config)
    traces = np.einsum("bii->b", out)
    expected = np.eye(L).reshape(-1)
    if np.abs(traces - expected).max() > 1e-8:
        raise PrecisionError("process-map propagation failed the trace check")
    return out.reshape(L, L, layout.dim, layout.dim)
