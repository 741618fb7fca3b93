"""Secret-key-rate simulator: single-photon sources vs weak coherent and
decoy-state BB84 over fiber and free-space channels.

Security model
--------------
Multiphoton emissions are treated as tagged, insecure signals
(conservative tagged-states bound): with gain Q, error rate E, and
source multiphoton probability p_m, the untagged fraction is
Omega = (Q - p_m)/Q and

    rate = q_sift * Q * [Omega (1 - H2(E/Omega)) - f_EC H2(E)]

clamped at zero. The decoy protocol uses the asymptotic single-photon
yield estimate instead:

    rate = q_sift * [ -Q_mu f_EC H2(E_mu) + mu e^(-mu) Y_1 (1 - H2(e_1)) ]

with Y_1 = Y_0 + t eta and e_1 = (e_0 Y_0 + e_det t eta)/Y_1. Gains are
Q = Y_0 + mu t eta for sub-Poissonian sources and
Q = 1 - (1 - Y_0) e^(-mu t eta) for Poissonian pulses; errors are
E = (e_0 Y_0 + e_det mu t eta)/Q with e_0 = 1/2. The multiphoton
probability is g2_0 mu^2 / 2 for a sub-Poissonian source and
1 - e^(-mu)(1 + mu) for Poissonian pulses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import transmittance_to_db

SOURCE_KINDS = ("ideal_sps", "real_sps", "wcs", "decoy")
DIVERGENCE_MODELS = ("gaussian_farfield", "friis", "calibrated")

E0_BACKGROUND = 0.5  # dark counts are random in basis


class QkdError(ValueError):
    """Invalid QKD scenario parameters."""


class NoPositiveRateError(RuntimeError):
    """The key rate is zero over the whole optimization domain."""


class NoCrossingError(RuntimeError):
    """The rate difference does not change sign on the search interval."""


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceModel:
    """Photon source: sub-Poissonian (ideal/real) or Poissonian (wcs/decoy).

    ``mean_photons`` is the source efficiency (photons per trigger) for
    the single-photon kinds and the pulse intensity mu for wcs/decoy;
    for the latter ``mu_mode`` selects per-distance optimization or the
    fixed value.
    """

    kind: str = "real_sps"
    mean_photons: float = 0.513
    g2_zero: float = 0.018
    mu_mode: str = "optimal"

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise QkdError(f"kind must be one of {SOURCE_KINDS}, got {self.kind!r}")
        if self.kind in ("ideal_sps", "real_sps"):
            if not 0.0 < self.mean_photons <= 1.0:
                raise QkdError(
                    f"single-photon source efficiency must be in (0, 1], got {self.mean_photons}")
        elif self.mean_photons <= 0:
            raise QkdError(f"mean photon number must be positive, got {self.mean_photons}")
        if not 0.0 <= self.g2_zero <= 1.0:
            raise QkdError(f"g2_zero must be in [0, 1], got {self.g2_zero}")
        if self.mu_mode not in ("fixed", "optimal"):
            raise QkdError(f"mu_mode must be 'fixed' or 'optimal', got {self.mu_mode!r}")

    @property
    def optimizes_mu(self) -> bool:
        return self.kind in ("wcs", "decoy") and self.mu_mode == "optimal"


def ideal_sps() -> SourceModel:
    return SourceModel(kind="ideal_sps", mean_photons=1.0, g2_zero=0.0)


@dataclass(frozen=True)
class ChannelModel:
    """Fiber (attenuation in dB/km) or diffraction-limited free-space link."""

    kind: str = "fiber"
    distance_km: float = 0.0
    attenuation_db_per_km: float = 0.21
    transmit_aperture_m: float = 0.05
    receive_aperture_m: float = 0.60
    wavelength_nm: float = 565.85
    divergence_model: str = "gaussian_farfield"
    divergence_half_angle_rad: float | None = None

    def __post_init__(self):
        if self.kind not in ("fiber", "freespace"):
            raise QkdError(f"channel kind must be 'fiber' or 'freespace', got {self.kind!r}")
        if self.distance_km < 0:
            raise QkdError("distance must be non-negative")
        if self.kind == "fiber" and self.attenuation_db_per_km <= 0:
            raise QkdError("fiber attenuation must be positive")
        if self.kind == "freespace":
            if self.divergence_model not in DIVERGENCE_MODELS:
                raise QkdError(
                    f"divergence model must be one of {DIVERGENCE_MODELS}, "
                    f"got {self.divergence_model!r}")
            if min(self.transmit_aperture_m, self.receive_aperture_m,
                   self.wavelength_nm) <= 0:
                raise QkdError("apertures and wavelength must be positive")
            if self.divergence_model == "calibrated" and (
                    self.divergence_half_angle_rad is None
                    or self.divergence_half_angle_rad <= 0):
                raise QkdError("calibrated model needs a positive divergence_half_angle_rad")

    def at_distance(self, distance_km: float) -> "ChannelModel":
        return replace(self, distance_km=distance_km)


@dataclass(frozen=True)
class DetectorModel:
    """Receiver parameters; defaults follow the standard fiber-QKD
    reference experiment (Gobby-Yuan-Shields) and are all overridable."""

    receiver_efficiency: float = 0.045
    dark_count_per_pulse: float = 1.7e-6
    misalignment_error: float = 0.033
    error_correction_inefficiency: float = 1.22
    sifting_factor: float = 0.5

    def __post_init__(self):
        for name in ("receiver_efficiency", "dark_count_per_pulse", "misalignment_error",
                     "sifting_factor"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise QkdError(f"{name} must be in [0, 1], got {v}")
        if self.error_correction_inefficiency < 1.0:
            raise QkdError("error correction inefficiency must be >= 1")


GYS_DETECTOR = DetectorModel()


@dataclass(frozen=True)
class KeyRateResult:
    rate: float
    below_horizon: bool
    gain: float
    qber: float


@dataclass(frozen=True)
class CrossingReport:
    distance_km: float
    loss_db: float
    rate: float


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def binary_entropy(x: float) -> float:
    """Shannon binary entropy H2 in bits; 0 at both endpoints."""
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def channel_transmittance(channel: ChannelModel) -> float:
    """Channel power transmittance in (0, 1]."""
    d = channel.distance_km
    if d == 0.0:
        return 1.0
    if channel.kind == "fiber":
        return 10.0 ** (-channel.attenuation_db_per_km * d / 10.0)
    diameter = beam_diameter_m(channel)
    return min(1.0, (channel.receive_aperture_m / diameter) ** 2)


def beam_diameter_m(channel: ChannelModel) -> float:
    """Beam diameter at the receiver under the configured divergence model."""
    lam = channel.wavelength_nm * 1e-9
    dist = channel.distance_km * 1e3
    d_t = channel.transmit_aperture_m
    if channel.divergence_model == "gaussian_farfield":
        waist = d_t / 2.0
        rayleigh = math.pi * waist ** 2 / lam
        return 2.0 * waist * math.sqrt(1.0 + (dist / rayleigh) ** 2)
    if channel.divergence_model == "friis":
        # equivalent diameter so (Dr/diameter)^2 = (pi Dt Dr / (4 lam L))^2
        return 4.0 * lam * dist / (math.pi * d_t) if dist > 0 else d_t
    return d_t + 2.0 * channel.divergence_half_angle_rad * dist


def calibrate_divergence_half_angle(
    transmit_aperture_m: float,
    receive_aperture_m: float,
    target_loss_db: float,
    target_distance_km: float,
) -> float:
    """Linear-divergence half angle placing ``target_loss_db`` at the target range.

    Used to reproduce an externally stated loss-distance pair that the
    diffraction models do not predict; the returned constant should be
    logged alongside any result that relies on it.
    """
    t = 10.0 ** (-target_loss_db / 10.0)
    diameter = receive_aperture_m / math.sqrt(t)
    if diameter <= transmit_aperture_m:
        raise QkdError("target loss is reached before any divergence; calibration impossible")
    return (diameter - transmit_aperture_m) / (2.0 * target_distance_km * 1e3)


# ---------------------------------------------------------------------------
# key rates
# ---------------------------------------------------------------------------

def key_rate(source: SourceModel, channel: ChannelModel, detector: DetectorModel,
             mu: float | None = None) -> KeyRateResult:
    """Secret bits per sent signal, clamped at zero.

    ``mu`` overrides the source intensity (used by the optimizer); the
    ``below_horizon`` flag marks a clamped negative rate.
    """
    t = channel_transmittance(channel)
    return _rate_at_transmittance(source, t, detector, mu)


def _rate_at_transmittance(source: SourceModel, t: float, detector: DetectorModel,
                           mu: float | None = None) -> KeyRateResult:
    eta = detector.receiver_efficiency
    y0 = detector.dark_count_per_pulse
    e_det = detector.misalignment_error
    f_ec = detector.error_correction_inefficiency
    q_sift = detector.sifting_factor
    mu_val = source.mean_photons if mu is None else mu
    link = t * eta

    if source.kind in ("ideal_sps", "real_sps"):
        gain = y0 + mu_val * link
        g2 = 0.0 if source.kind == "ideal_sps" else source.g2_zero
        p_multi = g2 * mu_val ** 2 / 2.0
    else:
        gain = 1.0 - (1.0 - y0) * math.exp(-mu_val * link)
        p_multi = 1.0 - math.exp(-mu_val) * (1.0 + mu_val)

    if gain <= 0.0:
        return KeyRateResult(0.0, True, 0.0, 0.5)
    qber = min((E0_BACKGROUND * y0 + e_det * mu_val * link) / gain, 0.5)

    if source.kind == "decoy":
        y1 = y0 + link
        e1 = (E0_BACKGROUND * y0 + e_det * link) / y1
        raw = q_sift * (-gain * f_ec * binary_entropy(qber)
                        + mu_val * math.exp(-mu_val) * y1 * (1.0 - binary_entropy(min(e1, 0.5))))
        return KeyRateResult(max(raw, 0.0), raw <= 0.0, gain, qber)

    untagged = (gain - p_multi) / gain
    if untagged <= 0.0:
        return KeyRateResult(0.0, True, gain, qber)
    phase_error = qber / untagged
    if phase_error >= 0.5:
        return KeyRateResult(0.0, True, gain, qber)
    raw = q_sift * gain * (untagged * (1.0 - binary_entropy(phase_error))
                           - f_ec * binary_entropy(qber))
    return KeyRateResult(max(raw, 0.0), raw <= 0.0, gain, qber)


def optimize_mu(source: SourceModel, channel: ChannelModel, detector: DetectorModel,
                *, mu_max: float = 1.5, tol: float = 1e-5) -> tuple[float, float]:
    """Best pulse intensity for a wcs/decoy source at this channel point.

    A log-spaced pre-scan brackets the optimum (the positive region can
    be a narrow sliver at small mu under heavy loss), then golden-section
    refines it to ``tol``. Raises NoPositiveRateError when the rate is
    zero everywhere.

    Returns (mu_star, rate_at_mu_star).
    """
    if source.kind not in ("wcs", "decoy"):
        raise QkdError("mu optimization applies to wcs/decoy sources only")
    t = channel_transmittance(channel)

    def rate_of(mu: float) -> float:
        return _rate_at_transmittance(source, t, detector, mu).rate

    grid = np.logspace(-6, math.log10(mu_max), 120)
    values = [rate_of(m) for m in grid]
    best = int(np.argmax(values))
    if values[best] <= 0.0:
        raise NoPositiveRateError(
            f"no positive rate for {source.kind} on (0, {mu_max}] at this distance")
    lo = grid[best - 1] if best > 0 else grid[0] * 0.5
    hi = grid[best + 1] if best < len(grid) - 1 else mu_max

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = rate_of(c), rate_of(d)
    while hi - lo > tol:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = rate_of(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = rate_of(d)
    mu_star = 0.5 * (lo + hi)
    return mu_star, rate_of(mu_star)


def effective_rate(source: SourceModel, channel: ChannelModel,
                   detector: DetectorModel) -> float:
    """Key rate with the source's mu policy applied (optimal or fixed)."""
    if source.optimizes_mu:
        try:
            return optimize_mu(source, channel, detector)[1]
        except NoPositiveRateError:
            return 0.0
    return key_rate(source, channel, detector).rate


def find_crossing(
    source_a: SourceModel,
    source_b: SourceModel,
    channel: ChannelModel,
    detector: DetectorModel,
    search_interval_km: tuple[float, float],
    *,
    grid_points: int = 200,
    tol_km: float = 1e-3,
) -> CrossingReport:
    """Distance where the two sources' key rates cross, with loss in dB.

    Scans the interval for a sign change of rate_a - rate_b (re-optimizing
    mu per distance for wcs/decoy sources), then bisects. Raises
    NoCrossingError when no sign change exists in the interval.
    """
    lo, hi = search_interval_km
    if hi <= lo:
        raise QkdError("search interval must satisfy lo < hi")

    def diff(d: float) -> float:
        ch = channel.at_distance(d)
        return (effective_rate(source_a, ch, detector)
                - effective_rate(source_b, ch, detector))

    grid = np.linspace(lo, hi, grid_points)
    values = [diff(d) for d in grid]
    # both rates clamped to zero is equality, not a crossing; bracket the
    # first strict sign change, allowing clamped points in between
    bracket = None
    prev = None
    for i, v in enumerate(values):
        if v == 0.0:
            continue
        if prev is not None and values[prev] * v < 0:
            bracket = (grid[prev], grid[i])
            break
        prev = i
    if bracket is None:
        raise NoCrossingError(
            f"no crossing in interval [{lo}, {hi}] km: rate difference keeps one sign")

    a, b = bracket
    fa = diff(a)
    while b - a > tol_km:
        m = 0.5 * (a + b)
        fm = diff(m)
        if fm != 0.0 and (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    d_cross = 0.5 * (a + b)
    ch = channel.at_distance(d_cross)
    t = channel_transmittance(ch)
    return CrossingReport(
        distance_km=float(d_cross),
        loss_db=float(transmittance_to_db(t)),
        rate=float(effective_rate(source_a, ch, detector)),
    )


def sweep(
    sources: dict[str, SourceModel],
    channel: ChannelModel,
    detector: DetectorModel,
    distances_km,
) -> list[dict[str, float]]:
    """Rate sweep rows for CSV export: one row per distance.

    Each row carries the loss in dB, the rate per source label, and the
    optimized mu for sources that re-optimize per distance.
    """
    rows = []
    for d in distances_km:
        ch = channel.at_distance(float(d))
        t = channel_transmittance(ch)
        row: dict[str, float] = {"distance_km": float(d),
                                 "loss_db": float(transmittance_to_db(t))}
        for label, src in sources.items():
            if src.optimizes_mu:
                try:
                    mu_star, rate = optimize_mu(src, ch, detector)
                except NoPositiveRateError:
                    mu_star, rate = math.nan, 0.0
                row[f"rate_{label}"] = rate
                row[f"mu_{label}"] = mu_star
            else:
                row[f"rate_{label}"] = key_rate(src, ch, detector).rate
        rows.append(row)
    return rows


SECURITY_FORMULAS = """\
binary entropy:      H2(x) = -x log2 x - (1-x) log2(1-x)
fiber transmittance: t = 10^(-alpha d / 10)
free space:          t = min(1, (D_rx / beam_diameter(d))^2)
gain (sps):          Q = Y0 + mu t eta
gain (wcs/decoy):    Q = 1 - (1 - Y0) exp(-mu t eta)
error rate:          E = (0.5 Y0 + e_det mu t eta) / Q
multiphoton (sps):   p_m = g2_0 mu^2 / 2
multiphoton (wcs):   p_m = 1 - exp(-mu)(1 + mu)
untagged fraction:   Omega = (Q - p_m) / Q
tagged-states rate:  R = q Q [Omega (1 - H2(E/Omega)) - f_EC H2(E)]
decoy yield:         Y1 = Y0 + t eta,  e1 = (0.5 Y0 + e_det t eta)/Y1
decoy rate:          R = q [-Q f_EC H2(E) + mu exp(-mu) Y1 (1 - H2(e1))]
"""
