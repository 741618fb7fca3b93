"""Cavity-QED photophysics of the emitter: Purcell enhancement, quantum
efficiency, photon indistinguishability, and saturation.

Rate convention
---------------
The toolkit's default rate convention is plain frequency (Hz): the
emission rate is 1/lifetime, the pure dephasing rate is the free-space
FWHM linewidth expressed in Hz, and the cavity rate is the cavity FWHM
in Hz. This is the one convention that simultaneously reproduces the
free-space indistinguishability of ~2e-4, the 124 MHz cavity-linewidth
threshold for 90% indistinguishability, and the 779 GHz free-spectral-
range chain. An angular-frequency convention (all rates multiplied by
2 pi) is available where functions take a ``convention`` argument;
indistinguishability values are invariant under the choice because the
formulas are ratios of rates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import linewidth_nm_to_hz, rate_from_lifetime_ps

TWO_PI = 2.0 * math.pi

_CONVENTIONS = ("plain", "angular")


class PhotophysicsError(ValueError):
    """Invalid photophysical parameters."""


@dataclass(frozen=True)
class EmitterPhotophysics:
    """Measured free-space properties of the emitter."""

    zpl_wavelength_nm: float = 565.85
    free_linewidth_nm: float = 5.76
    free_lifetime_ps: float = 897.0
    zpl_fraction: float = 0.632
    degree_of_polarization: float = 0.904

    def __post_init__(self):
        for name in ("zpl_wavelength_nm", "free_linewidth_nm", "free_lifetime_ps"):
            if getattr(self, name) <= 0:
                raise PhotophysicsError(f"{name} must be positive")
        for name in ("zpl_fraction", "degree_of_polarization"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise PhotophysicsError(f"{name} must lie in [0, 1]")

    @property
    def emission_rate_hz(self) -> float:
        return rate_from_lifetime_ps(self.free_lifetime_ps)

    @property
    def dephasing_rate_hz(self) -> float:
        return linewidth_nm_to_hz(self.free_linewidth_nm, self.zpl_wavelength_nm)


@dataclass(frozen=True)
class CoupledRates:
    """Rate quadruple of the emitter-cavity system (one convention throughout)."""

    emission_rate: float
    dephasing_rate: float
    cavity_rate: float
    coupling_rate: float

    def __post_init__(self):
        if self.emission_rate <= 0:
            raise PhotophysicsError("emission rate must be positive")
        for name in ("dephasing_rate", "cavity_rate", "coupling_rate"):
            if getattr(self, name) < 0:
                raise PhotophysicsError(f"{name} must be non-negative")

    @property
    def transfer_rate(self) -> float:
        """Effective emitter-cavity transfer rate 4 g^2 / (kappa + gamma + gamma*)."""
        total = self.cavity_rate + self.emission_rate + self.dephasing_rate
        return 4.0 * self.coupling_rate ** 2 / total


@dataclass(frozen=True)
class PurcellReport:
    effective_quality_factor: float
    effective_purcell_factor: float
    lifetime_ratio: float
    mirror_purcell_factor: float
    quantum_efficiency: float

    def __post_init__(self):
        if self.effective_quality_factor <= 0:
            raise PhotophysicsError("effective quality factor must be positive")
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise PhotophysicsError(
                f"unphysical quantum efficiency {self.quantum_efficiency:.4g}")


def effective_purcell(
    wavelength_nm: float,
    cavity_fwhm_nm: float,
    emitter_fwhm_nm: float,
    mode_volume_lambda3: float,
) -> tuple[float, float]:
    """(effective Q, effective Purcell factor) in the broad-emitter regime.

    With the emitter much broader than the cavity the enhancement uses
    the combined linewidth: Q_eff = lam/(dlam_cav + dlam_em) and
    F = (3/(4 pi^2)) * Q_eff / V with V in lam^3 units.
    """
    if min(wavelength_nm, cavity_fwhm_nm, emitter_fwhm_nm, mode_volume_lambda3) <= 0:
        raise PhotophysicsError("all Purcell inputs must be positive")
    q_eff = wavelength_nm / (cavity_fwhm_nm + emitter_fwhm_nm)
    f_eff = 3.0 / (4.0 * math.pi ** 2) * q_eff / mode_volume_lambda3
    return q_eff, f_eff


def quantum_efficiency(lifetime_ratio: float, effective_purcell_factor: float,
                       mirror_purcell_factor: float) -> float:
    """Emitter quantum efficiency from the lifetime shortening.

    eta = (f - 1) / (f + F - eps*f) with f the free-space-to-cavity
    lifetime ratio, F the effective Purcell factor, and eps the
    enhancement already present from the bare mirror.
    """
    denom = (lifetime_ratio + effective_purcell_factor
             - mirror_purcell_factor * lifetime_ratio)
    if denom <= 0:
        raise PhotophysicsError(
            f"non-positive denominator {denom:.4g}; inputs outside the validity domain")
    return (lifetime_ratio - 1.0) / denom


def purcell_chain(
    wavelength_nm: float,
    cavity_fwhm_nm: float,
    emitter_fwhm_nm: float,
    mode_volume_lambda3: float,
    lifetime_ratio: float,
    mirror_purcell_factor: float,
) -> PurcellReport:
    """Full enhancement chain: effective Q, Purcell factor, and efficiency."""
    q_eff, f_eff = effective_purcell(wavelength_nm, cavity_fwhm_nm, emitter_fwhm_nm,
                                     mode_volume_lambda3)
    eta = quantum_efficiency(lifetime_ratio, f_eff, mirror_purcell_factor)
    return PurcellReport(q_eff, f_eff, lifetime_ratio, mirror_purcell_factor, eta)


def indistinguishability_free(emission_rate: float, dephasing_rate: float) -> float:
    """Two-photon interference contrast of a dephasing emitter: gamma/(gamma+gamma*)."""
    if emission_rate <= 0:
        raise PhotophysicsError("emission rate must be positive")
    if dephasing_rate < 0:
        raise PhotophysicsError("dephasing rate must be non-negative")
    return emission_rate / (emission_rate + dephasing_rate)


def indistinguishability_cavity(rates: CoupledRates) -> float:
    """Indistinguishability of the cavity-coupled emitter (weak coupling).

    I = (gamma + kappa R/(kappa + R)) / (gamma + kappa + 2 R) with the
    transfer rate R = 4 g^2/(kappa + gamma + gamma*). Reduces to
    gamma/(gamma + kappa) as g -> 0.
    """
    gamma = rates.emission_rate
    kappa = rates.cavity_rate
    transfer = rates.transfer_rate
    if kappa + transfer == 0:
        recycled = 0.0
    else:
        recycled = kappa * transfer / (kappa + transfer)
    return (gamma + recycled) / (gamma + kappa + 2.0 * transfer)


def kappa_for_target_indistinguishability(
    emission_rate: float,
    dephasing_rate: float,
    coupling_rate: float,
    target: float,
    *,
    bracket: tuple[float, float] = (1.0, 1e16),
) -> float:
    """Cavity rate at which the coupled indistinguishability hits the target.

    Bisection on the monotone-decreasing branch of I(kappa); raises when
    the bracket does not straddle the target.
    """
    if not 0.0 < target < 1.0:
        raise PhotophysicsError(f"target must be in (0, 1), got {target}")

    def value(kappa: float) -> float:
        return indistinguishability_cavity(
            CoupledRates(emission_rate, dephasing_rate, kappa, coupling_rate))

    lo, hi = bracket
    v_lo, v_hi = value(lo), value(hi)
    if not (v_hi <= target <= v_lo):
        raise PhotophysicsError(
            f"target {target} not bracketed: I({lo:g})={v_lo:.4g}, I({hi:g})={v_hi:.4g}")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if value(mid) >= target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-12:
            break
    return math.sqrt(lo * hi)


def coupling_from_purcell(effective_purcell_factor: float, cavity_rate: float,
                          emission_rate: float) -> float:
    """Coupling rate from the weak-coupling relation F = 4 g^2/(kappa gamma).

    Returns g in the same convention as the supplied rates.
    """
    if effective_purcell_factor < 0 or cavity_rate < 0 or emission_rate < 0:
        raise PhotophysicsError("inputs must be non-negative")
    return math.sqrt(effective_purcell_factor * cavity_rate * emission_rate) / 2.0


def coupling_report(effective_purcell_factor: float, cavity_rate_hz: float,
                    emission_rate_hz: float) -> dict[str, float]:
    """Coupling rate evaluated side by side in both rate conventions.

    The physical coupling is convention-independent; the numbers differ
    by 2 pi because the inputs do.
    """
    g_plain = coupling_from_purcell(effective_purcell_factor, cavity_rate_hz, emission_rate_hz)
    g_angular = coupling_from_purcell(
        effective_purcell_factor, TWO_PI * cavity_rate_hz, TWO_PI * emission_rate_hz)
    return {
        "coupling_rate_plain_hz": g_plain,
        "coupling_rate_angular_rad_per_s": g_angular,
        "coupling_rate_angular_over_2pi_hz": g_angular / TWO_PI,
    }


def rates_for_emitter_in_cavity(
    emitter: EmitterPhotophysics,
    cavity_fwhm_nm: float,
    effective_purcell_factor: float,
    *,
    convention: str = "plain",
) -> CoupledRates:
    """Assemble the rate quadruple for the measured emitter in the cavity.

    The coupling rate is derived from the effective Purcell factor since
    it is not measured directly.
    """
    if convention not in _CONVENTIONS:
        raise PhotophysicsError(f"convention must be one of {_CONVENTIONS}")
    scale = 1.0 if convention == "plain" else TWO_PI
    gamma = emitter.emission_rate_hz * scale
    gamma_star = emitter.dephasing_rate_hz * scale
    kappa = linewidth_nm_to_hz(cavity_fwhm_nm, emitter.zpl_wavelength_nm) * scale
    g = coupling_from_purcell(effective_purcell_factor, kappa, gamma)
    return CoupledRates(gamma, gamma_star, kappa, g)


def indistinguishability_map(
    emission_rate: float,
    dephasing_rate: float,
    *,
    coupling_range: tuple[float, float] = (1e6, 1e12),
    cavity_range: tuple[float, float] = (1e6, 1e12),
    points: int = 200,
):
    """Indistinguishability over a log-spaced (g, kappa) grid.

    Returns (g values, kappa values, I matrix[i_g, i_kappa]) suitable for
    the three-column CSV export.
    """
    import numpy as np

    gs = np.logspace(math.log10(coupling_range[0]), math.log10(coupling_range[1]), points)
    kappas = np.logspace(math.log10(cavity_range[0]), math.log10(cavity_range[1]), points)
    grid = np.empty((points, points))
    for i, g in enumerate(gs):
        for j, kappa in enumerate(kappas):
            grid[i, j] = indistinguishability_cavity(
                CoupledRates(emission_rate, dephasing_rate, kappa, g))
    return gs, kappas, grid


def saturation_rate(power: float, saturation_power: float, max_rate: float) -> float:
    """Two-level saturation: detected rate = R_inf * P / (P + P_sat)."""
    if power < 0:
        raise PhotophysicsError(f"power must be non-negative, got {power}")
    if saturation_power <= 0:
        raise PhotophysicsError(f"saturation power must be positive, got {saturation_power}")
    return max_rate * power / (power + saturation_power)
