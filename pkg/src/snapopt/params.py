"""Physical parameters of the dispersively coupled cavity-transmon system.

All frequencies and rates are angular (rad/s) unless the instance is
dimensionless, in which case they are expressed in units of the dispersive
shift chi (chi == 1) and times are in units of 1/chi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .exceptions import ConfigError

TWO_PI = 2.0 * math.pi

# Measured device constants (angular frequencies in rad/s, times in s).
CHI_HZ = 486.1e3
KERR_HZ = 699.0
CHI_PRIME_HZ = 0.97e3
OMEGA_GE_HZ = 4.092820e9
OMEGA_C_HZ = 4.484628e9
T1_TRANSMON = 110e-6
T2_RAMSEY = 48e-6
T2_ECHO = 105e-6
T1_CAVITY = 1.00e-3


def pure_dephasing_rate(t1: float, t2: float) -> float:
    """Pure dephasing rate Gamma_phi = 1/T2 - 1/(2 T1)."""
    return 1.0 / t2 - 1.0 / (2.0 * t1)


@dataclass(frozen=True)
class SystemParams:
    """Static system constants for one cavity-transmon device.

    ``gamma_ee``/``gamma_ff`` are the Lindblad rates of the projector
    dephasing operators; a coherence to level x decays at ``gamma_xx / 2``,
    so ``gamma_ee = 2 * Gamma_phi`` reproduces a Ramsey decay at Gamma_phi.
    Frequencies ``omega_*`` are bookkeeping only: the rotating frame removes
    them from the dynamics.
    """

    chi: float = 1.0
    chi_f: float = 1.0
    chi_prime: float = 0.0
    kerr: float = 0.0
    omega_ge: float = 0.0
    omega_gf: float = 0.0
    omega_c: float = 0.0
    gamma_eg: float = 0.0
    gamma_fe: float = 0.0
    gamma_ee: float = 0.0
    gamma_ff: float = 0.0
    gamma_cav: float = 0.0
    protocol: str = "ge"
    dimensionless: bool = True

    def __post_init__(self):
        if self.protocol not in ("ge", "gf"):
            raise ConfigError(f"protocol: must be 'ge' or 'gf', got {self.protocol!r}")
        for name in ("gamma_eg", "gamma_fe", "gamma_ee", "gamma_ff", "gamma_cav"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: rates must be non-negative")
        if self.chi <= 0:
            raise ConfigError("chi: must be positive")

    @property
    def transmon_levels(self) -> int:
        return 2 if self.protocol == "ge" else 3

    @property
    def excited_label(self) -> str:
        """Label of the driven excited level ('e' for ge, 'f' for gf)."""
        return "e" if self.protocol == "ge" else "f"

    def chi_matched(self, tol: float = 1e-12) -> bool:
        return abs(self.chi_f - self.chi) <= tol * abs(self.chi)

    def with_rates(self, **rates: float) -> "SystemParams":
        return replace(self, **rates)

    def to_dimensionless(self) -> "SystemParams":
        """Rescale so that chi == 1; rates become Gamma/chi, times chi*t."""
        if self.dimensionless:
            return self
        c = self.chi
        return replace(
            self,
            chi=1.0,
            chi_f=self.chi_f / c,
            chi_prime=self.chi_prime / c,
            kerr=self.kerr / c,
            omega_ge=self.omega_ge / c,
            omega_gf=self.omega_gf / c,
            omega_c=self.omega_c / c,
            gamma_eg=self.gamma_eg / c,
            gamma_fe=self.gamma_fe / c,
            gamma_ee=self.gamma_ee / c,
            gamma_ff=self.gamma_ff / c,
            gamma_cav=self.gamma_cav / c,
            dimensionless=True,
        )


def table_defaults(protocol: str = "ge", include_noise: bool = True,
                   include_kerr: bool = True) -> SystemParams:
    """Measured device parameters in SI (rad/s) units.

    Decay rates are 1/T1; the transmon dephasing rate uses the Ramsey T2
    through ``pure_dephasing_rate``.  The f-level rates are not measured
    independently: f->e decay is taken as twice the e->g rate (matrix-element
    scaling of the transmon ladder) and f dephasing equal to e dephasing.
    """
    gamma_phi = pure_dephasing_rate(T1_TRANSMON, T2_RAMSEY)
    gamma_eg = 1.0 / T1_TRANSMON
    chi = TWO_PI * CHI_HZ
    return SystemParams(
        chi=chi,
        chi_f=chi,
        chi_prime=TWO_PI * CHI_PRIME_HZ if include_kerr else 0.0,
        kerr=TWO_PI * KERR_HZ if include_kerr else 0.0,
        omega_ge=TWO_PI * OMEGA_GE_HZ,
        omega_gf=0.0,
        omega_c=TWO_PI * OMEGA_C_HZ,
        gamma_eg=gamma_eg if include_noise else 0.0,
        gamma_fe=2.0 * gamma_eg if include_noise else 0.0,
        gamma_ee=2.0 * gamma_phi if include_noise else 0.0,
        gamma_ff=2.0 * gamma_phi if include_noise else 0.0,
        gamma_cav=1.0 / T1_CAVITY if include_noise else 0.0,
        protocol=protocol,
        dimensionless=False,
    )
