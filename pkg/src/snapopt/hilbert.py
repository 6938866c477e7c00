"""Operator and state algebra on the composite transmon (x) cavity space.

The cavity Fock space is truncated to ``fock_truncation`` levels.  The
composite index convention is transmon-major throughout the package:

    index(level t, photon n) = t * fock_truncation + n

States are plain complex ndarrays of length ``dim``; density matrices are
``(dim, dim)`` ndarrays.  Everything here is dense: the spaces involved are
at most 3 x ~12 dimensional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

TRANSMON_LABELS = {"g": 0, "e": 1, "f": 2}


@dataclass(frozen=True)
class HilbertLayout:
    """Shape of the composite Hilbert space.

    ``transmon_levels`` is 2 for the ge drive protocol and 3 for gf.
    ``fock_truncation`` must leave headroom above the highest addressed
    Fock mode (displacements and cavity decay leak into a few extra levels).
    """

    transmon_levels: int
    fock_truncation: int

    def __post_init__(self):
        if self.transmon_levels not in (2, 3):
            raise DomainError("transmon_levels must be 2 or 3")
        if self.fock_truncation < 2:
            raise DomainError("fock_truncation must be at least 2")

    @property
    def dim(self) -> int:
        return self.transmon_levels * self.fock_truncation

    def index(self, level, fock_n: int) -> int:
        t = TRANSMON_LABELS[level] if isinstance(level, str) else int(level)
        if not 0 <= t < self.transmon_levels:
            raise DomainError(f"transmon level {level!r} out of range")
        if not 0 <= fock_n < self.fock_truncation:
            raise DomainError(f"Fock index {fock_n} out of range")
        return t * self.fock_truncation + fock_n


def layout_for(system, n_modes: int, headroom: int = 4) -> HilbertLayout:
    """Layout sized for a gate addressing Fock modes 0..n_modes-1.

    Headroom of 4 keeps leakage from small displacements and single-photon
    decay far below the truncation boundary (2 extra levels already suffice).
    """
    if n_modes < 1:
        raise DomainError("n_modes must be >= 1")
    return HilbertLayout(system.transmon_levels, n_modes + headroom)


class Operators:
    """Dense operator set on a composite layout.

    Cavity operators act as identity on the transmon factor and vice versa.
    ``sigma_x/y/z`` and ``sigma_alpha`` live on the drive pair: (g, e) for a
    two-level transmon, (g, f) for three levels, with the middle level a
    bystander.
    """

    def __init__(self, layout: HilbertLayout):
        self.layout = layout
        nt = layout.fock_truncation
        a_cav = np.diag(np.sqrt(np.arange(1, nt)), k=1).astype(complex)
        eye_t = np.eye(layout.transmon_levels, dtype=complex)
        self.a = np.kron(eye_t, a_cav)
        self.a_dag = self.a.conj().T
        self.number = self.a_dag @ self.a
        self.identity = np.eye(layout.dim, dtype=complex)
        self._drive_pair = (0, layout.transmon_levels - 1)

    def transition(self, upper, lower) -> np.ndarray:
        """|upper><lower| on the transmon, identity on the cavity."""
        nt = self.layout.transmon_levels
        u = TRANSMON_LABELS[upper] if isinstance(upper, str) else int(upper)
        l = TRANSMON_LABELS[lower] if isinstance(lower, str) else int(lower)
        if not (0 <= u < nt and 0 <= l < nt):
            raise DomainError("transmon level out of range")
        m = np.zeros((nt, nt), dtype=complex)
        m[u, l] = 1.0
        return np.kron(m, np.eye(self.layout.fock_truncation, dtype=complex))

    def projector(self, level) -> np.ndarray:
        return self.transition(level, level)

    @property
    def sigma_x(self) -> np.ndarray:
        g, x = self._drive_pair
        return self.transition(x, g) + self.transition(g, x)

    @property
    def sigma_y(self) -> np.ndarray:
        g, x = self._drive_pair
        return 1j * (self.transition(x, g) - self.transition(g, x))

    @property
    def sigma_z(self) -> np.ndarray:
        g, x = self._drive_pair
        return self.projector(x) - self.projector(g)

    def sigma_alpha(self, alpha: float) -> np.ndarray:
        """sigma_x rotated by alpha about +z: cos(a) sx + sin(a) sy."""
        return math.cos(alpha) * self.sigma_x + math.sin(alpha) * self.sigma_y


def build_operators(layout: HilbertLayout) -> Operators:
    return Operators(layout)


def tensor_basis_state(layout: HilbertLayout, level, fock_n: int) -> np.ndarray:
    """Unit vector |level, fock_n> in the composite ordering."""
    vec = np.zeros(layout.dim, dtype=complex)
    vec[layout.index(level, fock_n)] = 1.0
    return vec


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Truncated, renormalized coherent-state amplitude vector of length n_max."""
    n = np.arange(n_max)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, n_max)))))
    amps = np.exp(-abs(alpha) ** 2 / 2.0 - 0.5 * log_fact) * np.asarray(alpha, complex) ** n
    return amps / np.linalg.norm(amps)


def cavity_state(layout: HilbertLayout, level, amplitudes) -> np.ndarray:
    """State with the transmon in ``level`` and the cavity in sum_n c_n |n>."""
    amps = np.asarray(amplitudes, dtype=complex)
    if amps.size > layout.fock_truncation:
        raise DomainError("amplitude vector longer than the Fock truncation")
    vec = np.zeros(layout.dim, dtype=complex)
    t = TRANSMON_LABELS[level] if isinstance(level, str) else int(level)
    base = t * layout.fock_truncation
    vec[base:base + amps.size] = amps
    return vec


def expectation(state_or_rho: np.ndarray, operator: np.ndarray) -> complex:
    """<psi|O|psi> for a vector, Tr(rho O) for a matrix."""
    arr = np.asarray(state_or_rho)
    if operator.shape[0] != operator.shape[1]:
        raise DomainError("operator must be square")
    if arr.ndim == 1:
        if arr.shape[0] != operator.shape[0]:
            raise DomainError("state and operator dimensions differ")
        return complex(np.vdot(arr, operator @ arr))
    if arr.ndim == 2:
        if arr.shape != operator.shape:
            raise DomainError("density matrix and operator dimensions differ")
        return complex(np.trace(arr @ operator))
    raise DomainError("expected a state vector or a density matrix")


def trace_out_transmon(rho: np.ndarray, layout: HilbertLayout) -> np.ndarray:
    """Reduced cavity density matrix."""
    nt, nc = layout.transmon_levels, layout.fock_truncation
    return rho.reshape(nt, nc, nt, nc).trace(axis1=0, axis2=2)


def assert_valid_density_matrix(rho: np.ndarray, *, herm_tol: float = 1e-10,
                                trace_tol: float = 1e-8, eig_floor: float = -1e-9) -> None:
    """Raise if rho is visibly non-Hermitian, non-unit-trace or negative."""
    if np.abs(rho - rho.conj().T).max() > herm_tol:
        raise DomainError("density matrix is not Hermitian within tolerance")
    if abs(np.trace(rho).real - 1.0) > trace_tol or abs(np.trace(rho).imag) > trace_tol:
        raise DomainError("density matrix trace deviates from 1")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < eig_floor:
        raise DomainError("density matrix has a significantly negative eigenvalue")
